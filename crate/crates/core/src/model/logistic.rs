//! Weighted, L2-regularized logistic regression fitted by full-batch gradient
//! descent with a backtracking (Armijo) line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            lambda: 1e-3,
            max_iter: 5000,
            tol: 1e-6,
            seed: 42,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// The weighted objective over a standardized design matrix. Parameters are
/// laid out as `[beta_0, .., beta_{d-1}, intercept]`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticProblem<'a> {
    /// Row-major `n x d`.
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: &'a [f64],
    pub lambda: f64,
    /// Coordinates held at zero.
    pub pinned: &'a [bool],
}

impl LogisticProblem<'_> {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.pinned.len()
    }

    fn linear(&self, params: &[f64], i: usize) -> f64 {
        let d = self.d();
        let row = &self.x[i * d..(i + 1) * d];
        row.iter().zip(params).map(|(a, b)| a * b).sum::<f64>() + params[d]
    }

    /// `sum_i w_i * logloss_i + lambda/2 * |beta|^2`.
    pub fn objective(&self, params: &[f64]) -> f64 {
        let d = self.d();
        let mut loss = 0.0;
        for i in 0..self.n() {
            let z = self.linear(params, i);
            loss += self.weights[i] * (softplus(z) - self.y[i] * z);
        }
        let reg: f64 = params[..d].iter().map(|b| b * b).sum();
        loss + 0.5 * self.lambda * reg
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.gradient_at(params, &self.linear_all(params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Objective at the start, then after each accepted step (tracked as the
    /// running sum of the computed decreases).
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticProblem<'_> {
    fn linear_all(&self, params: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.linear(params, i)).collect()
    }

    fn gradient_at(&self, params: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.d();
        let mut g = vec![0.0; d + 1];
        for (i, zi) in z.iter().enumerate() {
            let r = self.weights[i] * (sigmoid(*zi) - self.y[i]);
            let row = &self.x[i * d..(i + 1) * d];
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] = if self.pinned[j] { 0.0 } else { g[j] + self.lambda * params[j] };
        }
        g
    }

    /// Change in the data term when every linear score moves from `z` to
    /// `z + dz`, summed row by row so it stays accurate when it is far below
    /// the rounding of the objective itself.
    fn loss_change(&self, z: &[f64], dz: &[f64]) -> f64 {
        z.iter()
            .zip(dz)
            .enumerate()
            .map(|(i, (&zi, &di))| {
                let soft = if di.abs() < 30.0 {
                    (sigmoid(zi) * di.exp_m1()).ln_1p()
                } else {
                    softplus(zi + di) - softplus(zi)
                };
                self.weights[i] * (soft - self.y[i] * di)
            })
            .sum()
    }
}

/// Minimizes the problem from the zero vector. Each iteration tries a
/// Barzilai-Borwein step length and halves it until the Armijo condition
/// holds, so every accepted step lowers the objective.
pub fn fit(problem: &LogisticProblem<'_>, params: &LogisticParams) -> Result<(Vec<f64>, Trace)> {
    let d = problem.d();
    if problem.x.len() != problem.n() * d || problem.weights.len() != problem.n() {
        return Err(Error::Contract("logistic problem dimensions disagree".into()));
    }
    const ARMIJO: f64 = 1e-4;
    let mut theta = vec![0.0; d + 1];
    let mut z = problem.linear_all(&theta);
    let mut f = problem.objective(&theta);
    let mut g = problem.gradient_at(&theta, &z);
    let mut trace = Trace {
        objective: vec![f],
        iterations: 0,
        converged: false,
    };
    let mut step = 1.0 / problem.weights.iter().sum::<f64>().max(1.0);

    for iter in 0..params.max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < params.tol {
            trace.converged = true;
            break;
        }
        let gsq: f64 = g.iter().map(|v| v * v).sum();
        // Score change per unit step along -g.
        let xg: Vec<f64> = (0..problem.n())
            .map(|i| {
                let row = &problem.x[i * d..(i + 1) * d];
                -(row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() + g[d])
            })
            .collect();
        let beta_g: f64 = theta[..d].iter().zip(&g).map(|(a, b)| a * b).sum();
        let g_beta_sq: f64 = g[..d].iter().map(|v| v * v).sum();
        let mut t = step;
        let delta = loop {
            let dz: Vec<f64> = xg.iter().map(|v| t * v).collect();
            let reg = 0.5 * problem.lambda * (t * t * g_beta_sq - 2.0 * t * beta_g);
            let delta = problem.loss_change(&z, &dz) + reg;
            if delta <= -ARMIJO * t * gsq {
                break delta;
            }
            t *= 0.5;
            if t < 1e-30 {
                trace.iterations = iter;
                return Ok((theta, trace));
            }
        };
        let next: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a - t * b).collect();
        let znext = problem.linear_all(&next);
        let gnext = problem.gradient_at(&next, &znext);
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };

        theta = next;
        z = znext;
        g = gnext;
        f += delta;
        trace.objective.push(f);
        trace.iterations = iter + 1;
    }
    if !trace.converged {
        trace.converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < params.tol;
    }
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_is_monotone_and_gradient_small() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let w = vec![1.0; 20];
        let pinned = vec![false, false];
        let p = LogisticProblem {
            x: &x,
            y: &y,
            weights: &w,
            lambda: 1e-2,
            pinned: &pinned,
        };
        let (theta, trace) = fit(&p, &LogisticParams::default()).unwrap();
        assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.converged, "{} iterations", trace.iterations);
        assert!(p.gradient(&theta).iter().all(|g| g.abs() < 1e-6));
    }
}
