//! Softmax output and categorical cross-entropy.

/// Added inside the log so a zero probability gives a large finite loss.
pub const LOG_EPS: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `-Σ y_k ln(p_k + ε)` for a (possibly soft) target `y`.
pub fn cross_entropy(p: &[f64], y: &[f64]) -> f64 {
    -p.iter().zip(y).map(|(&pk, &yk)| if yk == 0.0 { 0.0 } else { yk * (pk + LOG_EPS).ln() }).sum::<f64>()
}

/// Cross-entropy against a class index.
pub fn cross_entropy_index(p: &[f64], target: usize) -> f64 {
    -(p[target] + LOG_EPS).ln()
}

/// Gradient of `cross_entropy_index(softmax(z), target)` with respect to
/// `z`, written into `p` in place. Exact including the ε term.
pub fn logit_grad_in_place(p: &mut [f64], target: usize) {
    let w = p[target] / (p[target] + LOG_EPS);
    for (k, v) in p.iter_mut().enumerate() {
        *v = w * (*v - if k == target { 1.0 } else { 0.0 });
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}
