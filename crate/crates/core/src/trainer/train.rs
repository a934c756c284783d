//! The training loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::windows::{assemble, fit_normalization, split_windows, Window};
use super::{StopMetric, TrainConfig, TrainError};
use crate::exec::Exec;
use crate::nn::{
    argmax, cross_entropy_index, sample_dropout_masks, sha256_hex, AdamState, Arch, Checkpoint, NetSpec, Network,
    Normalization,
};
use crate::rng::{substream, Domain};
use crate::scenario::Split;

/// Validation windows are scored in slices of this many to bound memory.
const EVAL_SLICE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
    pub best_epoch: usize,
    pub train_windows: usize,
    pub skipped_cases: usize,
}

/// Patience-based early stopping on a higher-is-better score.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::NEG_INFINITY, best_epoch: 0, stale: 0 }
    }

    /// Records an epoch's score. Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, score: f64) -> (bool, bool) {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Hash of everything that determines a training run.
pub fn config_hash(spec: &NetSpec, cfg: &TrainConfig, seed: u64) -> String {
    let text = serde_json::json!({ "spec": spec, "train": cfg, "seed": seed }).to_string();
    sha256_hex(text.as_bytes())
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
    for r in history {
        s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.val_acc));
    }
    s
}

/// Mean loss and accuracy of `net` over `windows`.
fn score(
    net: &Network,
    split: &Split,
    windows: &[Window],
    norm: &Normalization,
    exec: Exec,
) -> Result<(f64, f64), TrainError> {
    let seq = net.spec().seq_len;
    let c = net.spec().classes;
    let mut loss = 0.0;
    let mut hits = 0usize;
    for slice in windows.chunks(EVAL_SLICE) {
        let (x, y) = assemble(split, slice, seq, norm);
        let p = net.predict(&x, slice.len(), exec)?;
        for (b, &t) in y.iter().enumerate() {
            let row = &p[b * c..(b + 1) * c];
            loss += cross_entropy_index(row, t);
            hits += usize::from(argmax(row) == t);
        }
    }
    let n = windows.len().max(1) as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Trains `spec` on `train_split`, early-stopping on `val_split`.
/// `on_epoch` sees every epoch record as it is produced.
pub fn train(
    train_split: &Split,
    val_split: &Split,
    spec: &NetSpec,
    cfg: &TrainConfig,
    seed: u64,
    exec: Exec,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate(spec.seq_len)?;
    if train_split.dim != spec.input_dim {
        return Err(TrainError::DimensionMismatch { data: train_split.dim, net: spec.input_dim });
    }
    let (windows, skipped) = split_windows(train_split, cfg, exec);
    if windows.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (val_all, _) = split_windows(val_split, cfg, exec);
    let val: Vec<Window> = val_all.into_iter().step_by(cfg.val_stride).collect();

    let norm = fit_normalization(train_split);
    let mut net = Network::init(spec.clone(), seed)?;
    let mut adam = AdamState::new(net.params().len());
    let hash = config_hash(spec, cfg, seed);
    let dropout = spec.arch == Arch::Lstm && (cfg.dropout > 0.0 || cfg.recurrent_dropout > 0.0);

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = (net.clone(), 0.0);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut stop = StopReason::MaxEpochs;
    let mut step = 0u64;

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(seed, Domain::Shuffle, epoch as u64));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch, ids) in order.chunks(cfg.batch_size).enumerate() {
            let picked: Vec<Window> = ids.iter().map(|&i| windows[i]).collect();
            let (x, y) = assemble(train_split, &picked, spec.seq_len, &norm);
            let masks = if dropout {
                let mut rng = substream(seed, Domain::Dropout, step);
                Some(
                    (0..picked.len())
                        .map(|_| sample_dropout_masks(&mut rng, cfg.dropout, cfg.recurrent_dropout, spec))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                None
            };
            let mut stats = net.batch_stats(&x, &y, masks.as_deref(), exec)?;
            if !stats.loss_sum.is_finite() || stats.grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::DivergedLoss { epoch, batch });
            }
            let inv = 1.0 / picked.len() as f64;
            stats.grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(net.params_mut(), &stats.grad, &cfg.adam)?;
            loss_sum += stats.loss_sum;
            correct += stats.correct;
            step += 1;
        }
        let (val_loss, val_acc) = score(&net, val_split, &val, &norm, exec)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / windows.len() as f64,
            train_acc: correct as f64 / windows.len() as f64,
            val_loss,
            val_acc,
        };
        on_epoch(&rec);
        history.push(rec);
        let metric = match cfg.stop_metric {
            StopMetric::ValAccuracy => val_acc,
            StopMetric::ValLoss => -val_loss,
        };
        let (improved, done) = stopper.observe(epoch, metric);
        if improved {
            best = (net.clone(), val_acc);
        }
        if done {
            stop = StopReason::Patience;
            break;
        }
    }

    let mut checkpoint = Checkpoint::new(best.0, norm, seed, hash);
    checkpoint.header.epoch = stopper.best_epoch();
    checkpoint.header.val_acc = best.1;
    Ok(TrainOutcome {
        checkpoint,
        history,
        stop,
        best_epoch: stopper.best_epoch(),
        train_windows: windows.len(),
        skipped_cases: skipped,
    })
}
