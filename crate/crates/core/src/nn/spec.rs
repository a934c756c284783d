//! Network shapes, the flat parameter layout, and initialization.
//!
//! Parameters live in one `Vec<f64>` in this fixed order:
//!
//! LSTM, for each layer `l` (input width `m_l`, `n` cells):
//!   `W_l` (`4n × m_l`), `U_l` (`4n × n`), `b_l` (`4n`),
//! with the gate blocks of every matrix stacked as forget, input,
//! candidate, output; then the head `W` (`classes × n`) and `b` (`classes`).
//!
//! Feedforward, for each hidden layer: `W_l` (`n × m_l`), `b_l` (`n`),
//! then the head.
//!
//! All matrices are row-major. Checkpoint blobs store this vector verbatim.

use std::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::rng::{substream, Domain};
use crate::scenario::NUM_CLASSES;

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_SEQ_LEN: usize = 60;
pub const FORGET_BIAS: f64 = 1.0;
pub const INIT_SCHEME: &str = "uniform(+-sqrt(6/(fan_in+fan_out))), biases 0, forget bias 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Lstm,
    Ffnn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub arch: Arch,
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
    /// Window length. Always 1 for the feedforward net.
    pub seq_len: usize,
}

impl NetSpec {
    pub fn lstm(input_dim: usize, seq_len: usize) -> Self {
        NetSpec {
            arch: Arch::Lstm,
            input_dim,
            hidden: DEFAULT_HIDDEN,
            layers: DEFAULT_LAYERS,
            classes: NUM_CLASSES,
            seq_len,
        }
    }

    pub fn ffnn(input_dim: usize) -> Self {
        NetSpec {
            arch: Arch::Ffnn,
            input_dim,
            hidden: DEFAULT_HIDDEN,
            layers: DEFAULT_LAYERS,
            classes: NUM_CLASSES,
            seq_len: 1,
        }
    }

    /// Parses `lstm-<len>` or `ffnn`.
    pub fn from_name(name: &str, input_dim: usize) -> Result<Self, NnError> {
        if name == "ffnn" {
            return Ok(Self::ffnn(input_dim));
        }
        name.strip_prefix("lstm-")
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&s| s > 0)
            .map(|s| Self::lstm(input_dim, s))
            .ok_or_else(|| NnError::InvalidSpec(format!("unknown model {name:?} (expected lstm-<len> or ffnn)")))
    }

    pub fn name(&self) -> String {
        match self.arch {
            Arch::Lstm => format!("lstm-{}", self.seq_len),
            Arch::Ffnn => "ffnn".into(),
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidSpec(m.into()));
        if self.input_dim == 0 || self.hidden == 0 || self.layers == 0 || self.classes < 2 {
            return bad("dimensions must be positive and classes >= 2");
        }
        if self.seq_len == 0 || (self.arch == Arch::Ffnn && self.seq_len != 1) {
            return bad("bad sequence length");
        }
        Ok(())
    }

    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }

    /// Floats per input sample: `seq_len × input_dim`.
    pub fn sample_len(&self) -> usize {
        self.seq_len * self.input_dim
    }

    pub fn layout(&self) -> Layout {
        let n = self.hidden;
        let rows = match self.arch {
            Arch::Lstm => 4 * n,
            Arch::Ffnn => n,
        };
        let mut at = 0;
        let mut take = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let layers = (0..self.layers)
            .map(|l| {
                let m = self.layer_input(l);
                let w = take(rows * m);
                let u = (self.arch == Arch::Lstm).then(|| take(rows * n));
                let b = take(rows);
                LayerSlices { input: m, w, u, b }
            })
            .collect();
        let head_w = take(self.classes * n);
        let head_b = take(self.classes);
        Layout { layers, head_w, head_b, total: at }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlices {
    pub input: usize,
    pub w: Range<usize>,
    /// Recurrent matrix; `None` for feedforward layers.
    pub u: Option<Range<usize>>,
    pub b: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerSlices>,
    pub head_w: Range<usize>,
    pub head_b: Range<usize>,
    pub total: usize,
}

fn fill_uniform(rng: &mut crate::rng::Rng, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-s..s);
    }
}

/// Draws initial parameters from the `Init` substream of `seed`.
pub fn init_params(spec: &NetSpec, seed: u64) -> Vec<f64> {
    let layout = spec.layout();
    let mut p = vec![0.0; layout.total];
    let mut rng = substream(seed, Domain::Init, 0);
    let n = spec.hidden;
    for ls in &layout.layers {
        // Each gate block is its own n × m matrix for fan purposes.
        fill_uniform(&mut rng, &mut p[ls.w.clone()], ls.input, n);
        if let Some(u) = &ls.u {
            fill_uniform(&mut rng, &mut p[u.clone()], n, n);
            p[ls.b.start..ls.b.start + n].fill(FORGET_BIAS);
        }
    }
    fill_uniform(&mut rng, &mut p[layout.head_w.clone()], n, spec.classes);
    p
}
