//! Training windows and batch assembly.

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::exec::Exec;
use crate::nn::Normalization;
use crate::scenario::Split;

/// A window ending at second `t` of `case`, labeled with `y^t`. The
/// samples themselves stay in the split and are copied out per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub case: u32,
    pub t: u32,
    pub target: u8,
}

/// The `count` end times spread evenly over `[t_min, t_max)`:
/// `t_k = t_min + floor(k (t_max - t_min) / count)`.
pub fn window_times(t_min: u32, t_max: u32, count: usize) -> Vec<u32> {
    let span = (t_max - t_min) as usize;
    (0..count).map(|k| t_min + (k * span / count) as u32).collect()
}

/// Windows of one case. Times past a collapse truncation are dropped.
pub fn make_windows(split: &Split, case: usize, cfg: &TrainConfig) -> Result<Vec<Window>, TrainError> {
    let t_end = split.cases[case].t_end;
    if t_end < cfg.t_min {
        return Err(TrainError::CaseTooShort { case, t_end });
    }
    Ok(window_times(cfg.t_min, cfg.t_max, cfg.windows_per_case)
        .into_iter()
        .filter(|&t| t <= t_end)
        .map(|t| Window { case: case as u32, t, target: split.label(case, t) as u8 })
        .collect())
}

/// Windows of every case, in case order, plus the number of cases skipped
/// as too short.
pub fn split_windows(split: &Split, cfg: &TrainConfig, exec: Exec) -> (Vec<Window>, usize) {
    let per_case = exec.map_indexed(split.len(), |c| make_windows(split, c, cfg));
    let mut out = Vec::new();
    let mut skipped = 0;
    for w in per_case {
        match w {
            Ok(w) => out.extend(w),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

/// Appends the normalized inputs of `w` (the `seq_len` snapshots ending
/// at `w.t`) to `out`, sample-major.
pub fn push_window(split: &Split, w: &Window, seq_len: usize, norm: &Normalization, out: &mut Vec<f64>) {
    let first = w.t as usize + 1 - seq_len;
    for t in first..=w.t as usize {
        norm.push_row(split.snapshot(w.case as usize, t as u32), out);
    }
}

/// Inputs and targets for a batch of windows.
pub fn assemble(split: &Split, windows: &[Window], seq_len: usize, norm: &Normalization) -> (Vec<f64>, Vec<usize>) {
    let mut x = Vec::with_capacity(windows.len() * seq_len * split.dim);
    for w in windows {
        push_window(split, w, seq_len, norm, &mut x);
    }
    (x, windows.iter().map(|w| w.target as usize).collect())
}

/// Z-score statistics over every recorded snapshot of the split.
pub fn fit_normalization(split: &Split) -> Normalization {
    let rows =
        split.cases.iter().enumerate().flat_map(move |(c, meta)| (1..=meta.t_end).map(move |t| split.snapshot(c, t)));
    Normalization::fit(split.dim, rows)
}
