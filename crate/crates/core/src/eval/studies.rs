//! Sequence-length ablation and the training-regime generalization study.
//!
//! Both take already trained checkpoints; training is the caller's job so
//! the command line can reuse checkpoints between studies.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    accuracy_over_time, majority_baseline, predict_split, rolling_predict, CasePredictions, EvalCurve, EvalError,
    CURVE_T_MAX, FIRST_T,
};
use crate::exec::Exec;
use crate::nn::Checkpoint;
use crate::rng::{substream, Domain};
use crate::scenario::{CaseKind, Split};
use crate::trainer::TrainConfig;

/// Summary means cover `T` from the latest possible second contingency
/// to the end of the curve.
pub const SUMMARY_T_MIN: u32 = 36;
pub const SUMMARY_T_MAX: u32 = CURVE_T_MAX;

/// Settings shared by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub train: TrainConfig,
    /// The small-batch regime keeps `1/small_batch_den` of the N-1-1
    /// training cases.
    pub small_batch_den: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { train: TrainConfig::default(), small_batch_den: 16 }
    }
}

/// A model's test-split predictions.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub name: String,
    pub preds: Vec<CasePredictions>,
}

impl ModelRun {
    pub fn evaluate(name: &str, ck: &Checkpoint, test: &Split, exec: Exec) -> Result<Self, EvalError> {
        Ok(ModelRun { name: name.into(), preds: predict_split(ck, test, FIRST_T + CURVE_T_MAX, exec)? })
    }
}

/// When a model's output stops depending on anything recorded before
/// the second contingency, per case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetReport {
    pub model: String,
    pub seq_len: usize,
    /// N-1-1 cases long enough to measure.
    pub measured: usize,
    /// Cases whose onset lies within 1 s of `T = t2 - 60 + seq_len`.
    pub within_one: usize,
    /// Mean of `onset_T - (t2 - 60 + seq_len)`.
    pub mean_offset: f64,
    /// `(case, t2, onset T)`
    pub per_case: Vec<(usize, u32, u32)>,
}

/// First `t >= t2` from which the rolling prediction is unchanged when
/// every snapshot before `t2` is perturbed. `None` for cases without a
/// second contingency or that end too early to tell.
pub fn information_onset(ck: &Checkpoint, split: &Split, case: usize) -> Result<Option<u32>, EvalError> {
    let meta = &split.cases[case];
    let Some(t2) = meta.second_time() else { return Ok(None) };
    let seq = ck.header.spec.seq_len as u32;
    let t_hi = t2 + seq + 1;
    if meta.t_end < t_hi || t2 < FIRST_T {
        return Ok(None);
    }
    let base = split.subset(&[case]);
    let mut moved = base.clone();
    let cells = (t2 as usize - 1) * split.dim;
    moved.features[..cells].iter_mut().for_each(|v| *v += 1.0);
    let a = rolling_predict(ck, &base, 0, t_hi)?;
    let b = rolling_predict(ck, &moved, 0, t_hi)?;
    let mut onset = t_hi + 1;
    for t in (t2..=t_hi).rev() {
        if a.probs_at(t) != b.probs_at(t) {
            break;
        }
        onset = t;
    }
    Ok((onset <= t_hi).then_some(onset))
}

pub fn onset_report(model: &str, ck: &Checkpoint, split: &Split, exec: Exec) -> Result<OnsetReport, EvalError> {
    let seq = ck.header.spec.seq_len;
    let onsets = exec.map_indexed(split.len(), |c| information_onset(ck, split, c));
    let mut per_case = Vec::new();
    for (c, o) in onsets.into_iter().enumerate() {
        if let Some(t) = o? {
            let t2 = split.cases[c].second_time().expect("onset implies a second contingency");
            per_case.push((c, t2, t - FIRST_T));
        }
    }
    let offset = |&(_, t2, big_t): &(usize, u32, u32)| big_t as f64 - (t2 as f64 - FIRST_T as f64 + seq as f64);
    let within_one = per_case.iter().filter(|p| offset(p).abs() <= 1.0).count();
    let mean_offset =
        if per_case.is_empty() { f64::NAN } else { per_case.iter().map(offset).sum::<f64>() / per_case.len() as f64 };
    Ok(OnsetReport { model: model.into(), seq_len: seq, measured: per_case.len(), within_one, mean_offset, per_case })
}

/// Accuracy against `t - t2` on N-1-1 cases, for offsets `lo..=hi`.
pub fn aligned_accuracy(
    preds: &[CasePredictions],
    split: &Split,
    cases: &[usize],
    lo: i32,
    hi: i32,
) -> Vec<(i32, f64, usize)> {
    (lo..=hi)
        .map(|d| {
            let mut n = 0;
            let mut hit = 0;
            for &c in cases {
                let Some(t2) = split.cases[c].second_time() else { continue };
                let t = t2 as i32 + d;
                if t < FIRST_T as i32 {
                    continue;
                }
                if let Some(p) = preds[c].class_at(t as u32) {
                    n += 1;
                    hit += usize::from(p == split.label(c, t as u32));
                }
            }
            (d, if n == 0 { f64::NAN } else { hit as f64 / n as f64 }, n)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub curves_n1: Vec<EvalCurve>,
    pub curves_n11: Vec<EvalCurve>,
    pub baseline_n1: EvalCurve,
    pub baseline_n11: EvalCurve,
    /// Mean accuracy over `T` in `[0, 5]`, before any contingency.
    pub pre_contingency: Vec<(String, f64)>,
    pub onsets: Vec<OnsetReport>,
    /// Per model, accuracy against `t - t2`.
    pub aligned: Vec<(String, Vec<(i32, f64, usize)>)>,
}

impl AblationResult {
    pub fn mean_n11(&self, model: &str) -> Option<f64> {
        self.curves_n11.iter().find(|c| c.label == model).map(|c| c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX))
    }

    pub fn mean_n1(&self, model: &str) -> Option<f64> {
        self.curves_n1.iter().find(|c| c.label == model).map(|c| c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX))
    }
}

/// Evaluates named checkpoints on the test split. Onsets are measured for
/// every LSTM.
pub fn run_ablation(models: &[(String, Checkpoint)], test: &Split, exec: Exec) -> Result<AblationResult, EvalError> {
    let n1 = test.indices_of(CaseKind::N1);
    let n11 = test.indices_of(CaseKind::N11);
    let all: Vec<usize> = (0..test.len()).collect();
    let mut out = AblationResult {
        curves_n1: Vec::new(),
        curves_n11: Vec::new(),
        baseline_n1: majority_baseline(test, &n1),
        baseline_n11: majority_baseline(test, &n11),
        pre_contingency: Vec::new(),
        onsets: Vec::new(),
        aligned: Vec::new(),
    };
    for (name, ck) in models {
        let run = ModelRun::evaluate(name, ck, test, exec)?;
        out.curves_n1.push(accuracy_over_time(name, &run.preds, test, &n1));
        out.curves_n11.push(accuracy_over_time(name, &run.preds, test, &n11));
        out.pre_contingency.push((name.clone(), accuracy_over_time(name, &run.preds, test, &all).mean_over(0, 5)));
        out.aligned.push((name.clone(), aligned_accuracy(&run.preds, test, &n11, -20, 70)));
        if ck.header.spec.arch == crate::nn::Arch::Lstm {
            out.onsets.push(onset_report(name, ck, test, exec)?);
        }
    }
    Ok(out)
}

pub fn ablation_summary(r: &AblationResult) -> serde_json::Value {
    let means = |curves: &[EvalCurve]| -> serde_json::Map<String, serde_json::Value> {
        curves.iter().map(|c| (c.label.clone(), json!(c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX)))).collect()
    };
    let onsets: Vec<_> = r
        .onsets
        .iter()
        .map(|o| {
            json!({
                "model": o.model,
                "seq_len": o.seq_len,
                "measured_cases": o.measured,
                "within_one_second": o.within_one,
                "mean_offset_s": o.mean_offset,
            })
        })
        .collect();
    let lstm_vs_ffnn = match (r.mean_n11("lstm-60"), r.mean_n11("ffnn")) {
        (Some(a), Some(b)) => json!(a >= b),
        _ => serde_json::Value::Null,
    };
    json!({
        "summary_range_T": [SUMMARY_T_MIN, SUMMARY_T_MAX],
        "mean_accuracy_n1_1": means(&r.curves_n11),
        "mean_accuracy_n1": means(&r.curves_n1),
        "majority_baseline_n1_1": r.baseline_n11.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX),
        "majority_baseline_n1": r.baseline_n1.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX),
        "pre_contingency_accuracy": r.pre_contingency.iter().map(|(m, a)| (m.clone(), json!(a))).collect::<serde_json::Map<_, _>>(),
        "dip_onsets": onsets,
        "lstm60_at_least_ffnn": lstm_vs_ffnn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Full,
    SmallBatch,
    N1Only,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Full, Regime::SmallBatch, Regime::N1Only];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::SmallBatch => "small-batch",
            Regime::N1Only => "n1-only",
        }
    }
}

/// The cases a regime trains on: everything, all N-1 plus a random
/// `1/den` of the N-1-1 cases, or N-1 only.
pub fn regime_split(split: &Split, regime: Regime, seed: u64, den: usize) -> Split {
    let n1 = split.indices_of(CaseKind::N1);
    match regime {
        Regime::Full => split.clone(),
        Regime::N1Only => split.subset(&n1),
        Regime::SmallBatch => {
            let mut n11 = split.indices_of(CaseKind::N11);
            let keep = (n11.len() as f64 / den.max(1) as f64).round() as usize;
            n11.shuffle(&mut substream(seed, Domain::Generalization, split.name as u64));
            n11.truncate(keep);
            let mut idx = n1;
            idx.extend(n11);
            idx.sort_unstable();
            split.subset(&idx)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizationResult {
    pub curves_n11: Vec<EvalCurve>,
    pub curves_n1: Vec<EvalCurve>,
}

impl GeneralizationResult {
    pub fn mean_n11(&self, regime: Regime) -> Option<f64> {
        self.curves_n11.iter().find(|c| c.label == regime.name()).map(|c| c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX))
    }

    pub fn mean_n1(&self, regime: Regime) -> Option<f64> {
        self.curves_n1.iter().find(|c| c.label == regime.name()).map(|c| c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX))
    }

    /// `full >= small-batch >= n1-only` on mean N-1-1 accuracy.
    pub fn ordering_holds(&self) -> Option<bool> {
        let f = self.mean_n11(Regime::Full)?;
        let s = self.mean_n11(Regime::SmallBatch)?;
        let n = self.mean_n11(Regime::N1Only)?;
        Some(f >= s && s >= n)
    }
}

pub fn run_generalization(
    models: &[(Regime, Checkpoint)],
    test: &Split,
    exec: Exec,
) -> Result<GeneralizationResult, EvalError> {
    let n1 = test.indices_of(CaseKind::N1);
    let n11 = test.indices_of(CaseKind::N11);
    let mut out = GeneralizationResult { curves_n11: Vec::new(), curves_n1: Vec::new() };
    for (regime, ck) in models {
        let run = ModelRun::evaluate(regime.name(), ck, test, exec)?;
        out.curves_n11.push(accuracy_over_time(regime.name(), &run.preds, test, &n11));
        out.curves_n1.push(accuracy_over_time(regime.name(), &run.preds, test, &n1));
    }
    Ok(out)
}

pub fn generalization_summary(r: &GeneralizationResult) -> serde_json::Value {
    let n11: serde_json::Map<_, _> =
        r.curves_n11.iter().map(|c| (c.label.clone(), json!(c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX)))).collect();
    let n1: serde_json::Map<_, _> =
        r.curves_n1.iter().map(|c| (c.label.clone(), json!(c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX)))).collect();
    json!({
        "summary_range_T": [SUMMARY_T_MIN, SUMMARY_T_MAX],
        "mean_accuracy_n1_1": n11,
        "mean_accuracy_n1": n1,
        "ordering_full_small_n1only": r.ordering_holds(),
    })
}
