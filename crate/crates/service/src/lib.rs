//! HTTP JSON facade over a running simulated deployment.
//!
//! The session clock only moves on `POST /api/tick`, so a sequence of calls
//! replays identically for the same deployment, model and seed. Mutating
//! endpoints take the session's write lock; reads share a consistent snapshot.

mod api;
pub mod session;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::sync::RwLock;

pub use api::{router, ApiError, SharedSession};
pub use session::{Mode, ServiceConfig, Session, SessionError};

pub fn shared(session: Session) -> SharedSession {
    Arc::new(RwLock::new(session))
}

/// Binds `addr` and serves until the task is cancelled. Bind failures (for
/// example a busy port) are returned before any request is accepted.
pub async fn serve(session: Session, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(shared(session))).await
}
