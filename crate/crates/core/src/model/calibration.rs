//! Platt scaling: `p = sigmoid(a * margin + b)` fitted by Newton's method on
//! smoothed targets, with `a` constrained positive so calibrated scores keep
//! the margin order.

use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, margin: f64) -> f64 {
        sigmoid(self.a * margin + self.b)
    }

    pub fn fit(margins: &[f64], labels: &[bool]) -> Platt {
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

        // Work on unit-scale margins; rescale `a` at the end.
        let scale = margins.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let m: Vec<f64> = margins.iter().map(|v| v / scale).collect();

        let nll = |a: f64, b: f64| -> f64 {
            m.iter()
                .zip(&targets)
                .map(|(&f, &t)| {
                    let z = a * f + b;
                    // -(t ln p + (1-t) ln(1-p)) = softplus(z) - t z
                    z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z
                })
                .sum()
        };

        let prior = ((n_pos + 1.0) / (n_neg + 1.0)).ln();
        let (mut a, mut b) = (0.0, prior);
        let mut f = nll(a, b);
        for _ in 0..100 {
            let (mut g1, mut g2, mut h11, mut h22, mut h21) = (0.0, 0.0, 1e-12, 1e-12, 0.0);
            for (&fi, &ti) in m.iter().zip(&targets) {
                let p = sigmoid(a * fi + b);
                let d1 = p - ti;
                let d2 = p * (1.0 - p);
                g1 += fi * d1;
                g2 += d1;
                h11 += fi * fi * d2;
                h22 += d2;
                h21 += fi * d2;
            }
            if g1.abs() < 1e-10 && g2.abs() < 1e-10 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            let mut moved = false;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = nll(na, nb);
                if nf < f + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    f = nf;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }

        if a <= 1e-6 {
            // Margins carry no usable order information; keep a tiny positive
            // slope and refit the offset alone.
            a = 1e-6;
            for _ in 0..100 {
                let (mut g, mut h) = (0.0, 1e-12);
                for (&fi, &ti) in m.iter().zip(&targets) {
                    let p = sigmoid(a * fi + b);
                    g += p - ti;
                    h += p * (1.0 - p);
                }
                if g.abs() < 1e-12 {
                    break;
                }
                b -= g / h;
            }
        }
        Platt { a: a / scale, b }
    }
}
