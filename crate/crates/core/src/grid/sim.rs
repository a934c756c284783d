use serde::{Deserialize, Serialize};

use super::{
    apply_contingency, solve_power_flow, step_oltc, step_oxl, ContingencySchedule, GridError, GridModel, GridState,
    OltcConfig, OxlConfig, PfConfig, PowerFlowResult,
};
use crate::scenario::OperatingCondition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds simulated when no collapse occurs.
    pub horizon: u32,
    pub pf: PfConfig,
    pub oltc: OltcConfig,
    pub oxl: OxlConfig,
    /// Any monitored bus below this magnitude ends the case as a collapse.
    pub collapse_voltage: f64,
    /// Rounds of tap/limit adjustment allowed while initializing.
    pub init_rounds: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 560,
            pf: PfConfig::default(),
            oltc: OltcConfig::default(),
            oxl: OxlConfig::default(),
            collapse_voltage: 0.7,
            init_rounds: 100,
        }
    }
}

/// Per-second feature snapshots of one simulated case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Row-major `[t][feature]` for t = 1..=t_end.
    pub features: Vec<f64>,
    pub dim: usize,
    /// Last second with a recorded snapshot.
    pub t_end: u32,
    pub collapsed: bool,
    pub collapse_time: Option<u32>,
    pub schedule: ContingencySchedule,
}

impl Trajectory {
    /// Snapshot at second `t` (1-based).
    pub fn snapshot(&self, t: u32) -> &[f64] {
        assert!(t >= 1 && t <= self.t_end, "t={t} outside 1..={}", self.t_end);
        let start = (t as usize - 1) * self.dim;
        &self.features[start..start + self.dim]
    }

    pub fn len(&self) -> usize {
        self.t_end as usize
    }

    pub fn is_empty(&self) -> bool {
        self.t_end == 0
    }
}

fn push_snapshot(out: &mut Vec<f64>, pf: &PowerFlowResult) {
    out.extend_from_slice(&pf.v);
    out.extend_from_slice(&pf.theta);
    out.extend_from_slice(&pf.p_from);
    out.extend_from_slice(&pf.q_from);
}

/// Solves the t = 0 operating point: flat start, then tap changers step
/// toward their deadbands and generators above `q_max` are held at the
/// limit until nothing moves.
pub fn initialize(model: &GridModel, cfg: &SimConfig) -> Result<(GridState, PowerFlowResult), GridError> {
    let pf_cfg = cfg.pf;
    let oltcs = model.oltc_branches();
    let to_bus: Vec<usize> = oltcs.iter().map(|&b| model.bus_index(&model.branches[b].to)).collect::<Result<_, _>>()?;
    let mut state = GridState::flat(model);
    for _ in 0..cfg.init_rounds {
        let pf = solve_power_flow(model, &state, &pf_cfg).map_err(|e| GridError::InfeasibleStart(e.to_string()))?;
        state = state.with_solution(&pf);
        let mut changed = false;
        for (g, gen) in model.generators.iter().enumerate() {
            if gen.oxl && gen.in_service && !state.oxl[g].tripped && pf.q_gen[g] > gen.q_max {
                state.oxl[g].tripped = true;
                changed = true;
            }
        }
        for (k, &bus) in to_bus.iter().enumerate() {
            let v = pf.v[bus];
            let o = &mut state.oltc[k];
            let dir = if v < cfg.oltc.deadband_low {
                1
            } else if v > cfg.oltc.deadband_high {
                -1
            } else {
                0
            };
            let target = cfg.oltc.clamp_pos(o.pos + dir);
            if target != o.pos {
                *o = super::OltcState::at_position(target, &cfg.oltc);
                changed = true;
            }
        }
        if !changed {
            return Ok((state, pf));
        }
    }
    Err(GridError::InfeasibleStart("initial taps did not settle".into()))
}

/// Runs one case for up to `cfg.horizon` seconds.
///
/// Each second: scheduled contingencies are applied, tap changers and
/// limiters advance on the previous second's solution, the network is
/// re-solved from a warm start, and the snapshot is recorded. Divergence or
/// a monitored voltage below `cfg.collapse_voltage` ends the case early.
pub fn simulate_case(
    base: &GridModel,
    oc: &OperatingCondition,
    schedule: &ContingencySchedule,
    cfg: &SimConfig,
) -> Result<Trajectory, GridError> {
    let mut model = oc.apply(base)?;
    let (mut state, mut last) = initialize(&model, cfg)?;
    let pf_cfg = cfg.pf;
    let dim = model.feature_dim();
    let monitored: Vec<usize> = model.monitored_buses().into_iter().map(|(_, i)| i).collect();
    let to_bus: Vec<usize> =
        model.oltc_branches().iter().map(|&b| model.bus_index(&model.branches[b].to)).collect::<Result<_, _>>()?;

    let mut features = Vec::with_capacity(dim * cfg.horizon as usize);
    let mut t_end = 0;
    let mut collapse_time = None;
    for t in 1..=cfg.horizon {
        state.t = t;
        for ev in schedule.events.iter().filter(|e| e.time == t) {
            model = apply_contingency(&model, &ev.contingency)?;
        }
        for (k, &bus) in to_bus.iter().enumerate() {
            state.oltc[k] = step_oltc(state.oltc[k], last.v[bus], 1, &cfg.oltc).0;
        }
        for (g, gen) in model.generators.iter().enumerate() {
            if gen.oxl && gen.in_service {
                state.oxl[g] = step_oxl(state.oxl[g], last.q_gen[g], gen.q_max, 1, &cfg.oxl);
            }
        }
        match solve_power_flow(&model, &state, &pf_cfg) {
            Ok(pf) => {
                push_snapshot(&mut features, &pf);
                t_end = t;
                state = state.with_solution(&pf);
                let low = monitored.iter().any(|&i| pf.v[i] < cfg.collapse_voltage);
                last = pf;
                if low {
                    collapse_time = Some(t);
                    break;
                }
            }
            Err(GridError::NonConvergence { .. }) => {
                collapse_time = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        features,
        dim,
        t_end,
        collapsed: collapse_time.is_some(),
        collapse_time,
        schedule: schedule.clone(),
    })
}
