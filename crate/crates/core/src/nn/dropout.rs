//! Per-sequence (variational) dropout masks.
//!
//! One input mask and one recurrent mask per layer are drawn for each
//! training sequence and reused at every step. Kept entries are scaled by
//! `1/(1-rate)` so evaluation needs no rescaling.

use rand::Rng as _;

use super::spec::{Arch, NetSpec};
use super::NnError;
use crate::rng::Rng;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    /// Per layer, length = layer input width.
    pub input: Vec<Vec<f64>>,
    /// Per layer, length = hidden width.
    pub recurrent: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn is_empty(&self) -> bool {
        self.input.is_empty() && self.recurrent.is_empty()
    }

    pub(crate) fn check(&self, spec: &NetSpec) -> Result<(), NnError> {
        if self.is_empty() && spec.arch == Arch::Ffnn {
            return Ok(());
        }
        let ok = self.input.len() == spec.layers
            && self.recurrent.len() == spec.layers
            && self.input.iter().enumerate().all(|(l, m)| m.len() == spec.layer_input(l))
            && self.recurrent.iter().all(|m| m.len() == spec.hidden);
        if ok {
            Ok(())
        } else {
            Err(NnError::ShapeMismatch("dropout mask shapes".into()))
        }
    }
}

/// Inverted-dropout keep mask of `len` entries.
pub fn bernoulli_mask(rng: &mut Rng, len: usize, rate: f64) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..len).map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 }).collect()
}

pub fn sample_dropout_masks(
    rng: &mut Rng,
    rate_in: f64,
    rate_rec: f64,
    spec: &NetSpec,
) -> Result<DropoutMasks, NnError> {
    for r in [rate_in, rate_rec] {
        if !(0.0..1.0).contains(&r) {
            return Err(NnError::InvalidSpec(format!("dropout rate {r} outside [0, 1)")));
        }
    }
    if spec.arch == Arch::Ffnn {
        return Ok(DropoutMasks::default());
    }
    let mut masks = DropoutMasks::default();
    for l in 0..spec.layers {
        masks.input.push(bernoulli_mask(rng, spec.layer_input(l), rate_in));
        masks.recurrent.push(bernoulli_mask(rng, spec.hidden, rate_rec));
    }
    Ok(masks)
}
