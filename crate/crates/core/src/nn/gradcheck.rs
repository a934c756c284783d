//! Central finite-difference check of the analytic gradients.

use rand::Rng as _;

use super::dropout::sample_dropout_masks;
use super::spec::NetSpec;
use super::{Network, NnError};
use crate::rng::{substream, Domain};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error. Below this magnitude the
/// finite difference itself is dominated by rounding (about 1e-11 here).
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Worst relative error over every parameter of `trials` random nets of
/// shape `spec`, each fed a batch of two random sequences. Odd trials
/// also apply dropout masks.
pub fn gradient_check(spec: &NetSpec, trials: usize, seed: u64) -> Result<f64, NnError> {
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = substream(seed, Domain::Init, 1000 + trial as u64);
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let mut net = Network::new(spec.clone(), params)?;
        let batch = 2;
        let x: Vec<f64> = (0..batch * spec.sample_len()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..spec.classes)).collect();
        let masks = if trial % 2 == 1 {
            let m =
                (0..batch).map(|_| sample_dropout_masks(&mut rng, 0.3, 0.3, spec)).collect::<Result<Vec<_>, _>>()?;
            Some(m)
        } else {
            None
        };
        let loss = |net: &Network| -> Result<f64, NnError> {
            let f = net.forward(&x, batch, masks.as_deref(), true)?;
            Ok(net.backward(&f, &targets)?.loss_sum)
        };
        let fwd = net.forward(&x, batch, masks.as_deref(), true)?;
        let analytic = net.backward(&fwd, &targets)?.grad;
        for k in 0..analytic.len() {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + FD_STEP;
            let up = loss(&net)?;
            net.params_mut()[k] = orig - FD_STEP;
            let down = loss(&net)?;
            net.params_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[k], numeric));
        }
    }
    Ok(worst)
}
