//! Rolling-window prediction, accuracy curves, confusion tables and the
//! two comparative studies.
//!
//! Time is indexed two ways: `t` is the simulation second, and
//! `T = t - 60` counts from the first complete 60-second window.

mod chart;
mod studies;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::nn::{argmax, Arch, Checkpoint, NnError};
use crate::scenario::{Split, StabilityClass, NUM_CLASSES};
use crate::trainer::{push_window, TrainError, Window};

pub use chart::svg_chart;
pub use studies::{
    ablation_summary, aligned_accuracy, generalization_summary, information_onset, onset_report, regime_split,
    run_ablation, run_generalization, AblationResult, GeneralizationResult, ModelRun, OnsetReport, Regime, StudyConfig,
    SUMMARY_T_MAX, SUMMARY_T_MIN,
};

/// First second with a prediction.
pub const FIRST_T: u32 = 60;
/// Curves run over `T = 0..=CURVE_T_MAX`.
pub const CURVE_T_MAX: u32 = 120;
/// `T` of the confusion table.
pub const CONFUSION_T: u32 = 50;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("checkpoint input width {got}, data has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Class probabilities of one case for `t = FIRST_T ..= t_last`.
#[derive(Debug, Clone, PartialEq)]
pub struct CasePredictions {
    pub case: usize,
    pub t_last: u32,
    /// `[t - FIRST_T][class]`
    pub probs: Vec<f64>,
}

impl CasePredictions {
    pub fn len(&self) -> usize {
        self.probs.len() / NUM_CLASSES
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs_at(&self, t: u32) -> Option<&[f64]> {
        if t < FIRST_T || t > self.t_last {
            return None;
        }
        let i = (t - FIRST_T) as usize * NUM_CLASSES;
        self.probs.get(i..i + NUM_CLASSES)
    }

    pub fn class_at(&self, t: u32) -> Option<StabilityClass> {
        self.probs_at(t).and_then(|p| StabilityClass::from_index(argmax(p)))
    }
}

/// Rolling predictions for one case up to `min(t_end, t_max)`. The LSTM
/// sees the `seq_len` snapshots ending at `t`; the feedforward net sees
/// `x^t` alone. Dropout is off.
pub fn rolling_predict(ck: &Checkpoint, split: &Split, case: usize, t_max: u32) -> Result<CasePredictions, EvalError> {
    let spec = &ck.header.spec;
    if spec.input_dim != split.dim {
        return Err(EvalError::DimensionMismatch { expected: split.dim, got: spec.input_dim });
    }
    let t_last = split.cases[case].t_end.min(t_max);
    if t_last < FIRST_T {
        return Ok(CasePredictions { case, t_last: FIRST_T - 1, probs: Vec::new() });
    }
    let seq = match spec.arch {
        Arch::Lstm => spec.seq_len,
        Arch::Ffnn => 1,
    };
    let n = (t_last - FIRST_T + 1) as usize;
    let mut x = Vec::with_capacity(n * seq * split.dim);
    for t in FIRST_T..=t_last {
        let w = Window { case: case as u32, t, target: 0 };
        push_window(split, &w, seq, &ck.header.normalization, &mut x);
    }
    let probs = ck.net.predict(&x, n, Exec::Sequential)?;
    Ok(CasePredictions { case, t_last, probs })
}

/// Rolling predictions for every case of a split, parallel over cases.
pub fn predict_split(
    ck: &Checkpoint,
    split: &Split,
    t_max: u32,
    exec: Exec,
) -> Result<Vec<CasePredictions>, EvalError> {
    exec.map_indexed(split.len(), |c| rolling_predict(ck, split, c, t_max)).into_iter().collect()
}

/// Accuracy per `T`; `counts[T]` cases had a prediction at that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    pub label: String,
    pub accuracy: Vec<f64>,
    pub counts: Vec<usize>,
}

impl EvalCurve {
    /// Mean accuracy over `T_lo..=T_hi`, skipping empty steps.
    pub fn mean_over(&self, t_lo: u32, t_hi: u32) -> f64 {
        let vals: Vec<f64> = (t_lo..=t_hi)
            .filter(|&tt| self.counts.get(tt as usize).is_some_and(|&n| n > 0))
            .map(|tt| self.accuracy[tt as usize])
            .collect();
        if vals.is_empty() {
            return f64::NAN;
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Accuracy over time on the listed cases.
pub fn accuracy_over_time(label: &str, preds: &[CasePredictions], split: &Split, cases: &[usize]) -> EvalCurve {
    curve_from(label, split, cases, |case, t| preds[case].class_at(t))
}

fn curve_from(
    label: &str,
    split: &Split,
    cases: &[usize],
    predict: impl Fn(usize, u32) -> Option<StabilityClass>,
) -> EvalCurve {
    let steps = CURVE_T_MAX as usize + 1;
    let mut hits = vec![0usize; steps];
    let mut counts = vec![0usize; steps];
    for &c in cases {
        for tt in 0..steps {
            let t = FIRST_T + tt as u32;
            if let Some(p) = predict(c, t) {
                counts[tt] += 1;
                hits[tt] += usize::from(p == split.label(c, t));
            }
        }
    }
    let accuracy = hits.iter().zip(&counts).map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect();
    EvalCurve { label: label.into(), accuracy, counts }
}

/// Per-`T` majority-class accuracy: the best any constant guess could do
/// at each instant, computed from the label histogram of the listed
/// cases that are still running.
pub fn majority_baseline(split: &Split, cases: &[usize]) -> EvalCurve {
    let steps = CURVE_T_MAX as usize + 1;
    let mut accuracy = vec![0.0; steps];
    let mut counts = vec![0usize; steps];
    for tt in 0..steps {
        let t = FIRST_T + tt as u32;
        let mut hist = [0usize; NUM_CLASSES];
        for &c in cases.iter().filter(|&&c| split.cases[c].t_end >= t) {
            hist[split.label(c, t).index()] += 1;
        }
        let n: usize = hist.iter().sum();
        counts[tt] = n;
        if n > 0 {
            accuracy[tt] = *hist.iter().max().unwrap() as f64 / n as f64;
        }
    }
    EvalCurve { label: "majority".into(), accuracy, counts }
}

/// Actual × predicted counts at one `T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub big_t: u32,
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionTable {
    pub fn new(big_t: u32) -> Self {
        ConfusionTable { big_t, counts: [[0; NUM_CLASSES]; NUM_CLASSES] }
    }

    pub fn from_predictions(preds: &[CasePredictions], split: &Split, cases: &[usize], big_t: u32) -> Self {
        let t = FIRST_T + big_t;
        let mut table = Self::new(big_t);
        for &c in cases {
            if let Some(p) = preds[c].class_at(t) {
                table.counts[split.label(c, t).index()][p.index()] += 1;
            }
        }
        table
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, actual: usize) -> usize {
        self.counts[actual].iter().sum()
    }

    pub fn col_sum(&self, predicted: usize) -> usize {
        self.counts.iter().map(|r| r[predicted]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum();
        diag as f64 / self.total().max(1) as f64
    }

    /// `None` when the class never occurs.
    pub fn recall(&self, k: usize) -> Option<f64> {
        let n = self.row_sum(k);
        (n > 0).then(|| self.counts[k][k] as f64 / n as f64)
    }

    pub fn precision(&self, k: usize) -> Option<f64> {
        let n = self.col_sum(k);
        (n > 0).then(|| self.counts[k][k] as f64 / n as f64)
    }

    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = StabilityClass::ALL.iter().map(|c| c.name()).collect();
        let mut s = format!("actual\\predicted,{},total,recall\n", names.join(","));
        for (k, name) in names.iter().enumerate() {
            let row: Vec<String> = self.counts[k].iter().map(|v| v.to_string()).collect();
            let recall = self.recall(k).map(|r| r.to_string()).unwrap_or_default();
            s.push_str(&format!("{name},{},{},{recall}\n", row.join(","), self.row_sum(k)));
        }
        let cols: Vec<String> = (0..NUM_CLASSES).map(|k| self.col_sum(k).to_string()).collect();
        s.push_str(&format!("total,{},{},{}\n", cols.join(","), self.total(), self.accuracy()));
        let prec: Vec<String> =
            (0..NUM_CLASSES).map(|k| self.precision(k).map(|p| p.to_string()).unwrap_or_default()).collect();
        s.push_str(&format!("precision,{},,\n", prec.join(",")));
        s
    }
}

/// `T` followed by one accuracy column per curve.
pub fn curves_csv(curves: &[&EvalCurve]) -> String {
    let mut s = String::from("T");
    for c in curves {
        s.push(',');
        s.push_str(&c.label);
    }
    s.push('\n');
    for tt in 0..=CURVE_T_MAX as usize {
        s.push_str(&tt.to_string());
        for c in curves {
            s.push(',');
            if c.counts[tt] > 0 {
                s.push_str(&c.accuracy[tt].to_string());
            }
        }
        s.push('\n');
    }
    s
}
