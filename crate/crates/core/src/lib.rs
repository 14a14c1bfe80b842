//! Crowd-solicitation recommendation engine.
//!
//! The pipeline reads a social-platform corpus, turns each user into a named
//! willingness/readiness feature vector, trains a cost-weighted response
//! classifier and then picks the contiguous slice of ranked candidates with
//! the best training response rate. A seeded simulator supplies ground truth.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod features;
pub mod lexicon;
pub mod model;
pub mod par;
pub mod recommend;
pub mod simulator;

pub use error::{Error, Result};
