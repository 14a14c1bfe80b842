//! Weighted linear SVM trained by full-batch subgradient descent with step
//! `1 / (lambda * t)`.
//!
//! The intercept is folded in as a constant feature and shares the L2
//! penalty. Every epoch uses the subgradient over all rows in index order, so
//! splitting a row into two copies with half the weight leaves the iterates
//! unchanged up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-2,
            epochs: 400,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvmProblem<'a> {
    /// Row-major `n x d`, standardized.
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: &'a [f64],
    pub pinned: &'a [bool],
}

impl SvmProblem<'_> {
    fn d(&self) -> usize {
        self.pinned.len()
    }

    pub fn margin(&self, params: &[f64], i: usize) -> f64 {
        let d = self.d();
        let row = &self.x[i * d..(i + 1) * d];
        row.iter().zip(params).map(|(a, b)| a * b).sum::<f64>() + params[d]
    }

    /// `sum_i w_i * max(0, 1 - s_i * margin_i)`.
    pub fn hinge(&self, params: &[f64]) -> f64 {
        (0..self.y.len())
            .map(|i| {
                let s = 2.0 * self.y[i] - 1.0;
                self.weights[i] * (1.0 - s * self.margin(params, i)).max(0.0)
            })
            .sum()
    }

    pub fn objective(&self, params: &[f64], lambda: f64) -> f64 {
        self.hinge(params) + 0.5 * lambda * params.iter().map(|b| b * b).sum::<f64>()
    }
}

/// Returns `[beta.., intercept]`.
pub fn fit(problem: &SvmProblem<'_>, params: &SvmParams) -> Result<Vec<f64>> {
    let d = problem.d();
    let n = problem.y.len();
    if problem.x.len() != n * d || problem.weights.len() != n {
        return Err(Error::Contract("svm problem dimensions disagree".into()));
    }
    if params.lambda <= 0.0 {
        return Err(Error::Config("svm lambda must be positive".into()));
    }
    let mut theta = vec![0.0; d + 1];
    let mut active = vec![0.0; d + 1];
    for t in 1..=params.epochs.max(1) {
        active.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let s = 2.0 * problem.y[i] - 1.0;
            if s * problem.margin(&theta, i) < 1.0 {
                let c = problem.weights[i] * s;
                let row = &problem.x[i * d..(i + 1) * d];
                for (a, xj) in active.iter_mut().zip(row) {
                    *a += c * xj;
                }
                active[d] += c;
            }
        }
        let eta = 1.0 / (params.lambda * t as f64);
        let shrink = 1.0 - eta * params.lambda;
        for j in 0..=d {
            theta[j] = if j < d && problem.pinned[j] {
                0.0
            } else {
                shrink * theta[j] + eta * active[j]
            };
        }
    }
    Ok(theta)
}
