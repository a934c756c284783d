//! Batched forward and backward passes for the stacked LSTM and the
//! feedforward baseline.
//!
//! Inputs are sample-major, `[batch][seq_len][input_dim]`. Internally the
//! LSTM runs time-major so each step is one matrix product per layer.

use super::cell::{GateParams, LayerParams};
use super::dropout::DropoutMasks;
use super::head::{argmax, cross_entropy_index, logit_grad_in_place, softmax_in_place};
use super::linalg::{gemm_nn, gemm_nt, gemm_tn, sigmoid};
use super::spec::{init_params, Arch, Layout, NetSpec};
use super::NnError;
use crate::exec::Exec;

/// Samples per unit of parallel work. Fixed so that the order of
/// floating-point sums does not depend on the worker count.
pub const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetSpec,
    layout: Layout,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LstmLayerCache {
    /// Masked layer input, `[S][B][m]`.
    xm: Vec<f64>,
    /// Masked previous hidden state, `[S][B][n]`; zero at step 0.
    hm: Vec<f64>,
    /// Activated gates, `[S][B][4n]` in f, i, c̃, o blocks.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    in_mask: Option<Vec<f64>>,
    rec_mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
enum Cache {
    Lstm {
        layers: Vec<LstmLayerCache>,
        h_last: Vec<f64>,
    },
    /// Activations per layer, starting with the input.
    Ffnn {
        acts: Vec<Vec<f64>>,
    },
}

/// Output of a forward pass. Holds the cache when one was requested.
#[derive(Debug, Clone)]
pub struct Forward {
    pub batch: usize,
    /// `[batch][classes]`
    pub probs: Vec<f64>,
    cache: Option<Cache>,
}

impl Forward {
    pub fn probs_of(&self, b: usize) -> &[f64] {
        let c = self.probs.len() / self.batch.max(1);
        &self.probs[b * c..(b + 1) * c]
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

/// Gradient of the summed loss over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss_sum: f64,
    pub grad: Vec<f64>,
}

/// Summed loss, gradient and hit count over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub count: usize,
    pub loss_sum: f64,
    pub correct: usize,
    pub grad: Vec<f64>,
}

impl Network {
    pub fn new(spec: NetSpec, params: Vec<f64>) -> Result<Self, NnError> {
        spec.validate()?;
        let layout = spec.layout();
        if params.len() != layout.total {
            return Err(NnError::ShapeMismatch(format!(
                "{} parameters for a net that needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Network { spec, layout, params })
    }

    pub fn zeros(spec: NetSpec) -> Result<Self, NnError> {
        let n = spec.param_count();
        Self::new(spec, vec![0.0; n])
    }

    pub fn init(spec: NetSpec, seed: u64) -> Result<Self, NnError> {
        let p = init_params(&spec, seed);
        Self::new(spec, p)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Unpacks layer `l` into per-gate form.
    pub fn lstm_layer(&self, l: usize) -> Result<LayerParams, NnError> {
        let ls = self.layout.layers.get(l).ok_or_else(|| NnError::ShapeMismatch(format!("no layer {l}")))?;
        let u = ls.u.clone().ok_or_else(|| NnError::ShapeMismatch("not an LSTM".into()))?;
        let (n, m) = (self.spec.hidden, ls.input);
        let gate = |g: usize| GateParams {
            n,
            m,
            w: self.params[ls.w.start + g * n * m..ls.w.start + (g + 1) * n * m].to_vec(),
            u: self.params[u.start + g * n * n..u.start + (g + 1) * n * n].to_vec(),
            b: self.params[ls.b.start + g * n..ls.b.start + (g + 1) * n].to_vec(),
        };
        Ok(LayerParams { forget: gate(0), input: gate(1), candidate: gate(2), output: gate(3) })
    }

    fn check_input(&self, x: &[f64], batch: usize) -> Result<(), NnError> {
        let per = self.spec.sample_len();
        if x.len() == per * batch {
            return Ok(());
        }
        let m = self.spec.input_dim;
        if batch > 0 && x.len() % (batch * m) == 0 {
            return Err(NnError::SequenceLengthMismatch { expected: self.spec.seq_len, got: x.len() / (batch * m) });
        }
        Err(NnError::ShapeMismatch(format!("{} input floats for {batch} samples of {per}", x.len())))
    }

    /// Forward pass over `batch` samples. `masks` (one per sample) turn on
    /// dropout; `keep_cache` retains what [`Network::backward`] needs.
    pub fn forward(
        &self,
        x: &[f64],
        batch: usize,
        masks: Option<&[DropoutMasks]>,
        keep_cache: bool,
    ) -> Result<Forward, NnError> {
        self.check_input(x, batch)?;
        if let Some(ms) = masks {
            if ms.len() != batch {
                return Err(NnError::ShapeMismatch(format!("{} masks for {batch} samples", ms.len())));
            }
            if self.spec.arch == Arch::Ffnn && ms.iter().any(|m| !m.is_empty()) {
                return Err(NnError::ShapeMismatch("feedforward nets take no dropout masks".into()));
            }
            for m in ms {
                m.check(&self.spec)?;
            }
        }
        match self.spec.arch {
            Arch::Lstm => Ok(self.lstm_forward(x, batch, masks, keep_cache)),
            Arch::Ffnn => Ok(self.ffnn_forward(x, batch, keep_cache)),
        }
    }

    /// Forward pass for a single window without dropout.
    pub fn forward_window(&self, window: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(window, 1, None, false)?.probs)
    }

    fn head(&self, h: &[f64], batch: usize) -> Vec<f64> {
        let (n, c) = (self.spec.hidden, self.spec.classes);
        let hb = &self.params[self.layout.head_b.clone()];
        let mut z: Vec<f64> = (0..batch).flat_map(|_| hb.iter().copied()).collect();
        gemm_nt(batch, n, c, h, &self.params[self.layout.head_w.clone()], 1.0, &mut z);
        for row in z.chunks_mut(c) {
            softmax_in_place(row);
        }
        z
    }

    fn lstm_forward(&self, x: &[f64], bsz: usize, masks: Option<&[DropoutMasks]>, keep: bool) -> Forward {
        let s = self.spec.seq_len;
        let n = self.spec.hidden;
        let g4 = 4 * n;
        let m0 = self.spec.input_dim;
        // Sample-major to time-major.
        let mut input = vec![0.0; s * bsz * m0];
        for b in 0..bsz {
            for t in 0..s {
                input[(t * bsz + b) * m0..(t * bsz + b + 1) * m0]
                    .copy_from_slice(&x[(b * s + t) * m0..(b * s + t + 1) * m0]);
            }
        }
        let mut caches = Vec::with_capacity(self.spec.layers);
        for (l, ls) in self.layout.layers.iter().enumerate() {
            let m = ls.input;
            let in_mask = masks.map(|ms| ms.iter().flat_map(|mk| mk.input[l].iter().copied()).collect::<Vec<_>>());
            let rec_mask = masks.map(|ms| ms.iter().flat_map(|mk| mk.recurrent[l].iter().copied()).collect::<Vec<_>>());
            let mut xm = input;
            if let Some(mask) = &in_mask {
                for row in xm.chunks_mut(bsz * m) {
                    row.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                }
            }
            let w = &self.params[ls.w.clone()];
            let u = &self.params[ls.u.clone().expect("lstm layer")];
            let bias = &self.params[ls.b.clone()];
            let mut gates: Vec<f64> = (0..s * bsz).flat_map(|_| bias.iter().copied()).collect();
            gemm_nt(s * bsz, m, g4, &xm, w, 1.0, &mut gates);
            let mut hm = vec![0.0; s * bsz * n];
            let mut c = vec![0.0; s * bsz * n];
            let mut tanh_c = vec![0.0; s * bsz * n];
            let mut h = vec![0.0; s * bsz * n];
            let step = bsz * n;
            for t in 0..s {
                if t > 0 {
                    let hm_t = &mut hm[t * step..(t + 1) * step];
                    hm_t.copy_from_slice(&h[(t - 1) * step..t * step]);
                    if let Some(mask) = &rec_mask {
                        hm_t.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                    }
                    gemm_nt(bsz, n, g4, hm_t, u, 1.0, &mut gates[t * bsz * g4..(t + 1) * bsz * g4]);
                }
                for b in 0..bsz {
                    let z = &mut gates[(t * bsz + b) * g4..(t * bsz + b + 1) * g4];
                    let at = (t * bsz + b) * n;
                    for j in 0..n {
                        let f = sigmoid(z[j]);
                        let i = sigmoid(z[n + j]);
                        let g = z[2 * n + j].tanh();
                        let o = sigmoid(z[3 * n + j]);
                        z[j] = f;
                        z[n + j] = i;
                        z[2 * n + j] = g;
                        z[3 * n + j] = o;
                        let c_prev = if t > 0 { c[at - step + j] } else { 0.0 };
                        let cv = f * c_prev + i * g;
                        let tc = cv.tanh();
                        c[at + j] = cv;
                        tanh_c[at + j] = tc;
                        h[at + j] = o * tc;
                    }
                }
            }
            caches.push(LstmLayerCache { xm, hm, gates, c, tanh_c, in_mask, rec_mask });
            input = h;
        }
        let h_last = input[(s - 1) * bsz * n..].to_vec();
        let probs = self.head(&h_last, bsz);
        Forward { batch: bsz, probs, cache: keep.then_some(Cache::Lstm { layers: caches, h_last }) }
    }

    fn ffnn_forward(&self, x: &[f64], bsz: usize, keep: bool) -> Forward {
        let n = self.spec.hidden;
        let mut acts = vec![x.to_vec()];
        for ls in &self.layout.layers {
            let bias = &self.params[ls.b.clone()];
            let mut z: Vec<f64> = (0..bsz).flat_map(|_| bias.iter().copied()).collect();
            gemm_nt(bsz, ls.input, n, acts.last().unwrap(), &self.params[ls.w.clone()], 1.0, &mut z);
            z.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(z);
        }
        let probs = self.head(acts.last().unwrap(), bsz);
        Forward { batch: bsz, probs, cache: keep.then_some(Cache::Ffnn { acts }) }
    }

    /// Exact gradient of the summed cross-entropy over the batch.
    pub fn backward(&self, fwd: &Forward, targets: &[usize]) -> Result<Gradients, NnError> {
        let cache = fwd.cache.as_ref().ok_or(NnError::MissingCache)?;
        let (bsz, c, n) = (fwd.batch, self.spec.classes, self.spec.hidden);
        if targets.len() != bsz || targets.iter().any(|&y| y >= c) {
            return Err(NnError::ShapeMismatch("targets do not match the batch".into()));
        }
        let mut grad = vec![0.0; self.layout.total];
        let mut dlogits = fwd.probs.clone();
        let mut loss_sum = 0.0;
        for (b, &y) in targets.iter().enumerate() {
            loss_sum += cross_entropy_index(&fwd.probs[b * c..(b + 1) * c], y);
            logit_grad_in_place(&mut dlogits[b * c..(b + 1) * c], y);
        }
        let top = match cache {
            Cache::Lstm { h_last, .. } => h_last,
            Cache::Ffnn { acts } => acts.last().unwrap(),
        };
        gemm_tn(c, bsz, n, &dlogits, top, 0.0, &mut grad[self.layout.head_w.clone()]);
        let hb = self.layout.head_b.clone();
        for row in dlogits.chunks(c) {
            grad[hb.clone()].iter_mut().zip(row).for_each(|(g, d)| *g += d);
        }
        let mut dtop = vec![0.0; bsz * n];
        gemm_nn(bsz, c, n, &dlogits, &self.params[self.layout.head_w.clone()], 0.0, &mut dtop);
        match cache {
            Cache::Lstm { layers, .. } => self.lstm_backward(layers, bsz, dtop, &mut grad),
            Cache::Ffnn { acts } => self.ffnn_backward(acts, bsz, dtop, &mut grad),
        }
        Ok(Gradients { loss_sum, grad })
    }

    fn lstm_backward(&self, caches: &[LstmLayerCache], bsz: usize, dtop: Vec<f64>, grad: &mut [f64]) {
        let s = self.spec.seq_len;
        let n = self.spec.hidden;
        let g4 = 4 * n;
        let step = bsz * n;
        // Gradient flowing into this layer's hidden output at every step.
        let mut dh_out = vec![0.0; s * step];
        dh_out[(s - 1) * step..].copy_from_slice(&dtop);
        for (l, (ls, lc)) in self.layout.layers.iter().zip(caches).enumerate().rev() {
            let m = ls.input;
            let u = &self.params[ls.u.clone().expect("lstm layer")];
            let mut dz = vec![0.0; s * bsz * g4];
            let mut dh_next = vec![0.0; step];
            let mut dc_next = vec![0.0; step];
            let mut du = vec![0.0; g4 * n];
            for t in (0..s).rev() {
                for b in 0..bsz {
                    let at = (t * bsz + b) * n;
                    let gz = (t * bsz + b) * g4;
                    for j in 0..n {
                        let f = lc.gates[gz + j];
                        let i = lc.gates[gz + n + j];
                        let g = lc.gates[gz + 2 * n + j];
                        let o = lc.gates[gz + 3 * n + j];
                        let tc = lc.tanh_c[at + j];
                        let c_prev = if t > 0 { lc.c[at - step + j] } else { 0.0 };
                        let dh = dh_out[at + j] + dh_next[b * n + j];
                        let dc = dc_next[b * n + j] + dh * o * (1.0 - tc * tc);
                        dz[gz + j] = dc * c_prev * f * (1.0 - f);
                        dz[gz + n + j] = dc * g * i * (1.0 - i);
                        dz[gz + 2 * n + j] = dc * i * (1.0 - g * g);
                        dz[gz + 3 * n + j] = dh * tc * o * (1.0 - o);
                        dc_next[b * n + j] = dc * f;
                    }
                }
                if t > 0 {
                    let dz_t = &dz[t * bsz * g4..(t + 1) * bsz * g4];
                    gemm_tn(g4, bsz, n, dz_t, &lc.hm[t * step..(t + 1) * step], 1.0, &mut du);
                    gemm_nn(bsz, g4, n, dz_t, u, 0.0, &mut dh_next);
                    if let Some(mask) = &lc.rec_mask {
                        dh_next.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                    }
                }
            }
            grad[ls.u.clone().unwrap()].iter_mut().zip(&du).for_each(|(g, d)| *g += d);
            gemm_tn(g4, s * bsz, m, &dz, &lc.xm, 1.0, &mut grad[ls.w.clone()]);
            let gb = ls.b.clone();
            for row in dz.chunks(g4) {
                grad[gb.clone()].iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            if l > 0 {
                let mut dx = vec![0.0; s * bsz * m];
                gemm_nn(s * bsz, g4, m, &dz, &self.params[ls.w.clone()], 0.0, &mut dx);
                if let Some(mask) = &lc.in_mask {
                    for row in dx.chunks_mut(bsz * m) {
                        row.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
                    }
                }
                dh_out = dx;
            }
        }
    }

    fn ffnn_backward(&self, acts: &[Vec<f64>], bsz: usize, dtop: Vec<f64>, grad: &mut [f64]) {
        let n = self.spec.hidden;
        let mut da = dtop;
        for (l, ls) in self.layout.layers.iter().enumerate().rev() {
            let a = &acts[l + 1];
            let dz: Vec<f64> = da.iter().zip(a).map(|(d, a)| d * (1.0 - a * a)).collect();
            gemm_tn(n, bsz, ls.input, &dz, &acts[l], 1.0, &mut grad[ls.w.clone()]);
            let gb = ls.b.clone();
            for row in dz.chunks(n) {
                grad[gb.clone()].iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            if l > 0 {
                let mut dx = vec![0.0; bsz * ls.input];
                gemm_nn(bsz, n, ls.input, &dz, &self.params[ls.w.clone()], 0.0, &mut dx);
                da = dx;
            }
        }
    }

    /// Summed loss and gradient over a batch, split into fixed chunks that
    /// may run in parallel and are folded back in chunk order.
    pub fn batch_stats(
        &self,
        x: &[f64],
        targets: &[usize],
        masks: Option<&[DropoutMasks]>,
        exec: Exec,
    ) -> Result<BatchStats, NnError> {
        let bsz = targets.len();
        self.check_input(x, bsz)?;
        let per = self.spec.sample_len();
        let chunks = bsz.div_ceil(CHUNK);
        let parts = exec.map_indexed(chunks, |k| {
            let lo = k * CHUNK;
            let hi = (lo + CHUNK).min(bsz);
            let fwd = self.forward(&x[lo * per..hi * per], hi - lo, masks.map(|m| &m[lo..hi]), true)?;
            let correct = (0..hi - lo).filter(|&b| argmax(fwd.probs_of(b)) == targets[lo + b]).count();
            let g = self.backward(&fwd, &targets[lo..hi])?;
            Ok::<_, NnError>((g, correct))
        });
        let mut stats = BatchStats { count: bsz, loss_sum: 0.0, correct: 0, grad: vec![0.0; self.layout.total] };
        for part in parts {
            let (g, correct) = part?;
            stats.loss_sum += g.loss_sum;
            stats.correct += correct;
            stats.grad.iter_mut().zip(&g.grad).for_each(|(a, b)| *a += b);
        }
        Ok(stats)
    }

    /// Class probabilities for many samples, chunked like
    /// [`Network::batch_stats`].
    pub fn predict(&self, x: &[f64], batch: usize, exec: Exec) -> Result<Vec<f64>, NnError> {
        self.check_input(x, batch)?;
        let per = self.spec.sample_len();
        let parts = exec.map_indexed(batch.div_ceil(CHUNK), |k| {
            let lo = k * CHUNK;
            let hi = (lo + CHUNK).min(batch);
            self.forward(&x[lo * per..hi * per], hi - lo, None, false).map(|f| f.probs)
        });
        let mut out = Vec::with_capacity(batch * self.spec.classes);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}
