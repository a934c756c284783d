//! Windowing, mini-batch training with early stopping, and checkpoints.

mod train;
mod windows;

use serde::{Deserialize, Serialize};

use crate::nn::{AdamConfig, NnError};

pub use train::{config_hash, history_csv, train, EarlyStopping, EpochRecord, StopReason, TrainOutcome};
pub use windows::{assemble, fit_normalization, make_windows, push_window, split_windows, window_times, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMetric {
    ValAccuracy,
    ValLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Window end times are drawn from `[t_min, t_max)`.
    pub t_min: u32,
    pub t_max: u32,
    pub windows_per_case: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub stop_metric: StopMetric,
    /// Keep every `val_stride`-th validation window (1 keeps all).
    pub val_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 256,
            max_epochs: 400,
            patience: 6,
            t_min: 60,
            t_max: 180,
            windows_per_case: 24,
            dropout: 0.5,
            recurrent_dropout: 0.5,
            stop_metric: StopMetric::ValAccuracy,
            val_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, seq_len: usize) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 || self.max_epochs == 0 || self.windows_per_case == 0 || self.val_stride == 0 {
            return bad("batch size, epochs, windows per case and val stride must be positive".into());
        }
        if self.t_min as usize >= self.t_max as usize || (self.t_min as usize) < seq_len {
            return bad(format!(
                "window range [{}, {}) does not fit sequence length {seq_len}",
                self.t_min, self.t_max
            ));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return bad(format!("learning rate {}", self.adam.lr));
        }
        for r in [self.dropout, self.recurrent_dropout] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("dropout rate {r} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no training windows")]
    EmptyDataset,
    #[error("case {case} ends at t={t_end}, before the first window")]
    CaseTooShort { case: usize, t_end: u32 },
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset feature width {data} does not match the network input {net}")]
    DimensionMismatch { data: usize, net: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}
