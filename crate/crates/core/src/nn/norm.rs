//! Per-feature z-score normalization.

use serde::{Deserialize, Serialize};

/// Features whose spread is below this are centred but not scaled
/// (the slack-bus angle is identically zero, for example).
pub const MIN_STD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits mean and population standard deviation over `rows`, each of
    /// length `dim`. Two passes, accumulated in row order.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f32]> + Clone) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for r in rows.clone() {
            mean.iter_mut().zip(r).for_each(|(m, &x)| *m += x as f64);
            count += 1;
        }
        if count == 0 {
            return Self::identity(dim);
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; dim];
        for r in rows {
            for (k, &x) in r.iter().enumerate() {
                let d = x as f64 - mean[k];
                var[k] += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s < MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Normalization { mean, std }
    }

    /// Appends the normalized row to `out`.
    pub fn push_row(&self, row: &[f32], out: &mut Vec<f64>) {
        out.extend(row.iter().enumerate().map(|(k, &x)| (x as f64 - self.mean[k]) / self.std[k]));
    }
}
