//! Single LSTM block, written out gate by gate.
//!
//! This is the readable reference for one time step. The batched network
//! in [`super::net`] computes the same thing with matrix products and is
//! tested against it.

use super::linalg::sigmoid;
use super::NnError;

/// One gate's weights: `w` is `n × m`, `u` is `n × n`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub n: usize,
    pub m: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(n: usize, m: usize) -> Self {
        GateParams { n, m, w: vec![0.0; n * m], u: vec![0.0; n * n], b: vec![0.0; n] }
    }

    fn check(&self) -> Result<(), NnError> {
        if self.w.len() != self.n * self.m || self.u.len() != self.n * self.n || self.b.len() != self.n {
            return Err(NnError::ShapeMismatch("gate parameter sizes".into()));
        }
        Ok(())
    }

    /// `W x + U h + b`
    fn pre(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let wx: f64 = self.w[j * self.m..(j + 1) * self.m].iter().zip(x).map(|(a, b)| a * b).sum();
                let uh: f64 = self.u[j * self.n..(j + 1) * self.n].iter().zip(h).map(|(a, b)| a * b).sum();
                wx + uh + self.b[j]
            })
            .collect()
    }
}

/// The four gates of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub forget: GateParams,
    pub input: GateParams,
    pub candidate: GateParams,
    pub output: GateParams,
}

impl LayerParams {
    pub fn zeros(n: usize, m: usize) -> Self {
        let g = GateParams::zeros(n, m);
        LayerParams { forget: g.clone(), input: g.clone(), candidate: g.clone(), output: g }
    }
}

/// Everything the backward pass of one step needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
}

/// One LSTM step: returns `(h, c, cache)`.
pub fn lstm_block_forward(
    p: &LayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, BlockCache), NnError> {
    let (n, m) = (p.forget.n, p.forget.m);
    for g in [&p.forget, &p.input, &p.candidate, &p.output] {
        g.check()?;
        if g.n != n || g.m != m {
            return Err(NnError::ShapeMismatch("gates disagree on shape".into()));
        }
    }
    if x.len() != m || h_prev.len() != n || c_prev.len() != n {
        return Err(NnError::ShapeMismatch(format!(
            "x {} (want {m}), h {} / c {} (want {n})",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let f: Vec<f64> = p.forget.pre(x, h_prev).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = p.input.pre(x, h_prev).into_iter().map(sigmoid).collect();
    let c_tilde: Vec<f64> = p.candidate.pre(x, h_prev).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = p.output.pre(x, h_prev).into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..n).map(|j| f[j] * c_prev[j] + i[j] * c_tilde[j]).collect();
    let h: Vec<f64> = (0..n).map(|j| o[j] * c[j].tanh()).collect();
    let cache =
        BlockCache { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), f, i, c_tilde, o, c: c.clone() };
    Ok((h, c, cache))
}
