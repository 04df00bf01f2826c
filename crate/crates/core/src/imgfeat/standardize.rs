use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension z-scoring. Dimensions with zero spread map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Learns population mean and standard deviation per dimension.
pub fn fit_standardizer<R: AsRef<[f64]>>(rows: &[R]) -> Result<Standardizer> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Empty("standardizer training set".into()))?;
    let dim = first.as_ref().len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                id: "standardizer row".into(),
                expected: dim,
                found: r.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(Standardizer { mean, std })
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                id: "standardizer input".into(),
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect())
    }

    /// Inverse transform; zero-spread dimensions return their mean.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}
