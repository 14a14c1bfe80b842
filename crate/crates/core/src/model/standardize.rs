use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature centring and scaling fitted on training rows. Masked cells
/// are imputed with the training mean, so they standardize to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub imputation: Vec<f64>,
    /// Features with no spread on the training rows; their coefficients stay 0.
    pub pinned: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<Option<f64>>], width: usize) -> Result<Self> {
        let mut means = vec![0.0; width];
        let mut stds = vec![1.0; width];
        let mut pinned = vec![false; width];
        for j in 0..width {
            let col: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value in feature column {j}")));
            }
            if col.is_empty() {
                pinned[j] = true;
                continue;
            }
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            means[j] = m;
            if sd > 1e-12 * m.abs().max(1.0) {
                stds[j] = sd;
            } else {
                pinned[j] = true;
            }
        }
        Ok(Standardizer {
            imputation: means.clone(),
            means,
            stds,
            pinned,
        })
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, row: &[Option<f64>]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::Contract(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.width()
            )));
        }
        let mut out = Vec::with_capacity(row.len());
        for (j, v) in row.iter().enumerate() {
            let x = if self.pinned[j] {
                0.0
            } else {
                (v.unwrap_or(self.imputation[j]) - self.means[j]) / self.stds[j]
            };
            if !x.is_finite() {
                return Err(Error::Data(format!("feature {j} is not finite after standardization")));
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Row-major standardized design matrix.
    pub fn transform_all(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows.len() * self.width());
        for r in rows {
            out.extend(self.transform(r)?);
        }
        Ok(out)
    }
}
