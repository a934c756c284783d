//! Polar Newton–Raphson power flow with voltage-dependent loads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{BranchKind, BusKind, GridModel};
use super::{GridError, GridState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfConfig {
    /// Max per-bus |ΔP|, |ΔQ| in pu.
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration budget of the step-halving retry.
    pub damped_max_iter: usize,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 20, damped_max_iter: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowResult {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Active flow at the from-end of each branch (0 when out of service).
    pub p_from: Vec<f64>,
    pub q_from: Vec<f64>,
    /// Reactive output per generator (0 when out of service).
    pub q_gen: Vec<f64>,
    /// Largest remaining bus mismatch at the returned point.
    pub max_mismatch: f64,
    pub iterations: usize,
    pub damped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone)]
struct LoadTerm {
    p0: f64,
    q0: f64,
    alpha_p: f64,
    alpha_q: f64,
}

/// The model compiled into index form for one solve.
struct Network {
    n: usize,
    ybus: Vec<Complex64>,
    /// (from, to, yff, yft, ytf, ytt) per branch; `None` when out of service.
    branch_y: Vec<Option<(usize, usize, Complex64, Complex64, Complex64, Complex64)>>,
    kind: Vec<Kind>,
    v_set: Vec<f64>,
    p_gen: Vec<f64>,
    /// Fixed reactive injection at PQ generator buses (OXL limited).
    q_gen_fixed: Vec<f64>,
    loads: Vec<Vec<LoadTerm>>,
    /// Per generator: bus index and whether its Q floats (slack/PV).
    gens: Vec<(usize, bool, bool)>,
}

impl Network {
    fn compile(model: &GridModel, state: &GridState) -> Result<Self, GridError> {
        let n = model.buses.len();
        let mut ybus = vec![Complex64::new(0.0, 0.0); n * n];
        let mut branch_y = Vec::with_capacity(model.branches.len());
        let oltcs = model.oltc_branches();
        for (bi, br) in model.branches.iter().enumerate() {
            if !br.in_service {
                branch_y.push(None);
                continue;
            }
            let f = model.bus_index(&br.from)?;
            let t = model.bus_index(&br.to)?;
            let y = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
            let tap = match br.kind {
                BranchKind::Line => 1.0,
                BranchKind::OltcTransformer => {
                    let k = oltcs.iter().position(|&o| o == bi).expect("oltc index");
                    state.oltc[k].tap
                }
            };
            let (yff, yft, ytf, ytt) = (y * tap * tap, -y * tap, -y * tap, y);
            ybus[f * n + f] += yff;
            ybus[f * n + t] += yft;
            ybus[t * n + f] += ytf;
            ybus[t * n + t] += ytt;
            branch_y.push(Some((f, t, yff, yft, ytf, ytt)));
        }
        for (i, b) in model.buses.iter().enumerate() {
            ybus[i * n + i] += Complex64::new(0.0, b.shunt_b);
        }

        let mut kind: Vec<Kind> = vec![Kind::Pq; n];
        let mut v_set = vec![0.0; n];
        let mut p_gen = vec![0.0; n];
        let mut q_gen_fixed = vec![0.0; n];
        let mut gens = Vec::with_capacity(model.generators.len());
        for (gi, g) in model.generators.iter().enumerate() {
            let i = model.bus_index(&g.bus)?;
            let is_slack = model.buses[i].kind == BusKind::Slack;
            if is_slack {
                kind[i] = Kind::Slack;
                v_set[i] = g.v_set;
                p_gen[i] = g.p;
                gens.push((i, true, true));
                continue;
            }
            if !g.in_service {
                gens.push((i, false, false));
                continue;
            }
            p_gen[i] = g.p;
            if state.oxl[gi].tripped {
                q_gen_fixed[i] = g.q_max;
                gens.push((i, true, false));
            } else {
                kind[i] = Kind::Pv;
                v_set[i] = g.v_set;
                gens.push((i, true, true));
            }
        }
        let mut loads = vec![Vec::new(); n];
        for l in &model.loads {
            let i = model.bus_index(&l.bus)?;
            loads[i].push(LoadTerm { p0: l.p0, q0: l.q0, alpha_p: l.alpha_p, alpha_q: l.alpha_q });
        }
        Ok(Self { n, ybus, branch_y, kind, v_set, p_gen, q_gen_fixed, loads, gens })
    }

    fn voltages(&self, vm: &[f64], va: &[f64]) -> Vec<Complex64> {
        vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
    }

    fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|k| self.ybus[i * n + k] * v[k]).sum()).collect()
    }

    /// Specified net injection at bus i for magnitude `vm`.
    fn specified(&self, i: usize, vm: f64) -> (f64, f64) {
        let (mut p, mut q) = (self.p_gen[i], self.q_gen_fixed[i]);
        for l in &self.loads[i] {
            p -= l.p0 * vm.powf(l.alpha_p);
            q -= l.q0 * vm.powf(l.alpha_q);
        }
        (p, q)
    }

    /// Calculated minus specified injections per bus.
    fn mismatch(&self, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let v = self.voltages(vm, va);
        let cur = self.currents(&v);
        let mut dp = vec![0.0; self.n];
        let mut dq = vec![0.0; self.n];
        for i in 0..self.n {
            let s = v[i] * cur[i].conj();
            let (ps, qs) = self.specified(i, vm[i]);
            dp[i] = s.re - ps;
            dq[i] = s.im - qs;
        }
        (dp, dq)
    }

    fn index_sets(&self) -> (Vec<usize>, Vec<usize>) {
        let pvpq: Vec<usize> = (0..self.n).filter(|&i| self.kind[i] != Kind::Slack).collect();
        let pq: Vec<usize> = (0..self.n).filter(|&i| self.kind[i] == Kind::Pq).collect();
        (pvpq, pq)
    }

    fn residual(&self, dp: &[f64], dq: &[f64], pvpq: &[usize], pq: &[usize]) -> DVector<f64> {
        let mut f = DVector::zeros(pvpq.len() + pq.len());
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = dp[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[pvpq.len() + r] = dq[i];
        }
        f
    }

    fn jacobian(&self, vm: &[f64], va: &[f64], pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
        let n = self.n;
        let v = self.voltages(vm, va);
        let cur = self.currents(&v);
        let j = Complex64::new(0.0, 1.0);
        // dS_i/dθ_k and dS_i/d|V_k|, dense.
        let mut ds_da = vec![Complex64::new(0.0, 0.0); n * n];
        let mut ds_dm = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let y = self.ybus[i * n + k];
                let unit_k = v[k] / vm[k];
                if i == k {
                    ds_da[i * n + k] = j * v[i] * (cur[i] - y * v[i]).conj();
                    ds_dm[i * n + k] = v[i] * (y * unit_k).conj() + cur[i].conj() * unit_k;
                } else {
                    ds_da[i * n + k] = -j * v[i] * (y * v[k]).conj();
                    ds_dm[i * n + k] = v[i] * (y * unit_k).conj();
                }
            }
            // Voltage-dependent loads move the specified side.
            for l in &self.loads[i] {
                ds_dm[i * n + i] += Complex64::new(
                    l.alpha_p * l.p0 * vm[i].powf(l.alpha_p - 1.0),
                    l.alpha_q * l.q0 * vm[i].powf(l.alpha_q - 1.0),
                );
            }
        }
        let (np, nq) = (pvpq.len(), pq.len());
        let mut jac = DMatrix::zeros(np + nq, np + nq);
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(r, c)] = ds_da[i * n + k].re;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(r, np + c)] = ds_dm[i * n + k].re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pvpq.iter().enumerate() {
                jac[(np + r, c)] = ds_da[i * n + k].im;
            }
            for (c, &k) in pq.iter().enumerate() {
                jac[(np + r, np + c)] = ds_dm[i * n + k].im;
            }
        }
        jac
    }

    fn apply_step(&self, vm: &mut [f64], va: &mut [f64], dx: &DVector<f64>, scale: f64, pvpq: &[usize], pq: &[usize]) {
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] -= scale * dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] -= scale * dx[pvpq.len() + r];
        }
    }

    /// Newton iterations from `(vm, va)`. Returns the iteration count on
    /// success.
    fn newton(&self, vm: &mut [f64], va: &mut [f64], cfg: &PfConfig, damped: bool) -> Option<usize> {
        let (pvpq, pq) = self.index_sets();
        let budget = if damped { cfg.damped_max_iter } else { cfg.max_iter };
        for iter in 1..=budget {
            let (dp, dq) = self.mismatch(vm, va);
            let f = self.residual(&dp, &dq, &pvpq, &pq);
            let norm = f.amax();
            if !norm.is_finite() {
                return None;
            }
            if norm <= cfg.tol {
                return Some(iter);
            }
            let jac = self.jacobian(vm, va, &pvpq, &pq);
            let dx = jac.lu().solve(&f)?;
            if !dx.iter().all(|d| d.is_finite()) {
                return None;
            }
            if !damped {
                self.apply_step(vm, va, &dx, 1.0, &pvpq, &pq);
            } else {
                let mut scale = 1.0;
                loop {
                    let mut tvm = vm.to_vec();
                    let mut tva = va.to_vec();
                    self.apply_step(&mut tvm, &mut tva, &dx, scale, &pvpq, &pq);
                    let ok = tvm.iter().all(|&m| m > 0.0);
                    let trial = if ok {
                        let (tp, tq) = self.mismatch(&tvm, &tva);
                        self.residual(&tp, &tq, &pvpq, &pq).amax()
                    } else {
                        f64::INFINITY
                    };
                    if trial < norm || scale < 1e-3 {
                        vm.copy_from_slice(&tvm);
                        va.copy_from_slice(&tva);
                        break;
                    }
                    scale *= 0.5;
                }
            }
            if vm.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
                return None;
            }
        }
        None
    }

    fn result(&self, vm: Vec<f64>, va: Vec<f64>, iterations: usize, damped: bool) -> PowerFlowResult {
        let v = self.voltages(&vm, &va);
        let cur = self.currents(&v);
        let mut p_from = Vec::with_capacity(self.branch_y.len());
        let mut q_from = Vec::with_capacity(self.branch_y.len());
        for by in &self.branch_y {
            match *by {
                Some((f, t, yff, yft, _, _)) => {
                    let s = v[f] * (yff * v[f] + yft * v[t]).conj();
                    p_from.push(s.re);
                    q_from.push(s.im);
                }
                None => {
                    p_from.push(0.0);
                    q_from.push(0.0);
                }
            }
        }
        let q_gen = self
            .gens
            .iter()
            .map(|&(i, in_service, floating)| {
                if !in_service {
                    0.0
                } else if floating {
                    let s = v[i] * cur[i].conj();
                    let q_load: f64 = self.loads[i].iter().map(|l| l.q0 * vm[i].powf(l.alpha_q)).sum();
                    s.im + q_load
                } else {
                    self.q_gen_fixed[i]
                }
            })
            .collect();
        let (pvpq, pq) = self.index_sets();
        let (dp, dq) = self.mismatch(&vm, &va);
        let max_mismatch = self.residual(&dp, &dq, &pvpq, &pq).amax();
        PowerFlowResult { v: vm, theta: va, p_from, q_from, q_gen, max_mismatch, iterations, damped }
    }
}

/// Solves the network equations starting from the voltages in `state`
/// (warm start). Regulated buses are pinned to their setpoints first.
pub fn solve_power_flow(model: &GridModel, state: &GridState, cfg: &PfConfig) -> Result<PowerFlowResult, GridError> {
    let net = Network::compile(model, state)?;
    let mut vm0 = state.v.clone();
    let va0 = state.theta.clone();
    for i in 0..net.n {
        if net.kind[i] != Kind::Pq {
            vm0[i] = net.v_set[i];
        }
    }
    let (mut vm, mut va) = (vm0.clone(), va0.clone());
    if let Some(iters) = net.newton(&mut vm, &mut va, cfg, false) {
        return Ok(net.result(vm, va, iters, false));
    }
    let (mut vm, mut va) = (vm0, va0);
    if let Some(iters) = net.newton(&mut vm, &mut va, cfg, true) {
        return Ok(net.result(vm, va, cfg.max_iter + iters, true));
    }
    Err(GridError::NonConvergence { iterations: cfg.max_iter + cfg.damped_max_iter })
}

/// Per-bus `(ΔP, ΔQ)` of `(v, θ)` against the model, with the slack's P/Q and
/// regulated buses' Q left free (reported as zero).
pub fn bus_mismatch(model: &GridModel, state: &GridState) -> Result<Vec<(f64, f64)>, GridError> {
    let net = Network::compile(model, state)?;
    let (dp, dq) = net.mismatch(&state.v, &state.theta);
    Ok((0..net.n)
        .map(|i| match net.kind[i] {
            Kind::Slack => (0.0, 0.0),
            Kind::Pv => (dp[i], 0.0),
            Kind::Pq => (dp[i], dq[i]),
        })
        .collect())
}
