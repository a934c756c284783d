use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::grid::{GridError, GridModel};
use crate::rng::Rng;

/// Load scale factors and generator dispatch for one sampled case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    /// One factor per load, in model order.
    pub load_factors: Vec<f64>,
    /// Active dispatch per generator in pu; the slack entry is ignored.
    pub gen_p: Vec<f64>,
}

impl OperatingCondition {
    /// The model's own loading: all factors 1, dispatch as in the file.
    pub fn base(model: &GridModel) -> Self {
        Self { load_factors: vec![1.0; model.loads.len()], gen_p: model.generators.iter().map(|g| g.p).collect() }
    }

    pub fn uniform(model: &GridModel, factor: f64) -> Self {
        Self { load_factors: vec![factor; model.loads.len()], ..Self::base(model) }
    }

    /// Scales loads (constant power factor) and sets dispatch.
    pub fn apply(&self, base: &GridModel) -> Result<GridModel, GridError> {
        if self.load_factors.len() != base.loads.len() || self.gen_p.len() != base.generators.len() {
            return Err(GridError::InvalidModel("operating condition does not match the grid".into()));
        }
        let mut m = base.clone();
        for (l, &f) in m.loads.iter_mut().zip(&self.load_factors) {
            l.p0 *= f;
            l.q0 *= f;
        }
        for (g, &p) in m.generators.iter_mut().zip(&self.gen_p) {
            g.p = p;
        }
        Ok(m)
    }
}

/// Uniform load factor spread: factors lie in `[1 - spread, 1 + spread]`.
pub const DEFAULT_LOAD_SPREAD: f64 = 0.2;

/// Builds an operating condition from explicit uniform draws in [0, 1):
/// one per load (`load_u`) and one per generator (`gen_u`, slack ignored).
///
/// The total load change is shared among non-slack generators with random
/// weights `u · p_max`; whatever a generator cannot take within
/// `[0, p_max]` is left to the slack.
pub fn operating_condition_from_draws(
    base: &GridModel,
    load_u: &[f64],
    gen_u: &[f64],
    spread: f64,
) -> OperatingCondition {
    let load_factors: Vec<f64> = load_u.iter().map(|&u| 1.0 + spread * (2.0 * u - 1.0)).collect();
    let delta: f64 = base.loads.iter().zip(&load_factors).map(|(l, &f)| (f - 1.0) * l.p0).sum();

    let slack_bus = &base.buses[base.slack_index()].id;
    let movable: Vec<usize> = base
        .generators
        .iter()
        .enumerate()
        .filter(|(_, g)| &g.bus != slack_bus && g.in_service)
        .map(|(i, _)| i)
        .collect();
    let weights: Vec<f64> = movable.iter().map(|&g| gen_u[g] * base.generators[g].p_max).collect();
    let total_w: f64 = weights.iter().sum();

    let mut gen_p: Vec<f64> = base.generators.iter().map(|g| g.p).collect();
    if total_w > 0.0 {
        for (&g, &w) in movable.iter().zip(&weights) {
            let gen = &base.generators[g];
            gen_p[g] = (gen.p + delta * w / total_w).clamp(0.0, gen.p_max);
        }
    }
    OperatingCondition { load_factors, gen_p }
}

/// Draws one operating condition around the base case.
pub fn sample_operating_condition(base: &GridModel, rng: &mut Rng, spread: f64) -> OperatingCondition {
    let load_u: Vec<f64> = (0..base.loads.len()).map(|_| rng.random::<f64>()).collect();
    let gen_u: Vec<f64> = (0..base.generators.len()).map(|_| rng.random::<f64>()).collect();
    operating_condition_from_draws(base, &load_u, &gen_u, spread)
}

/// True iff the t = 0 operating point of `oc` can be solved.
pub fn check_feasibility(model: &GridModel, oc: &OperatingCondition, sim: &crate::grid::SimConfig) -> bool {
    match oc.apply(model) {
        Ok(m) => crate::grid::initialize(&m, sim).is_ok(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BusKind;
    use crate::rng::{substream, Domain};

    fn non_slack_total(model: &GridModel, gen_p: &[f64]) -> f64 {
        model
            .generators
            .iter()
            .zip(gen_p)
            .filter(|(g, _)| model.buses[model.bus_index(&g.bus).unwrap()].kind != BusKind::Slack)
            .map(|(_, &p)| p)
            .sum()
    }

    #[test]
    fn midpoint_draws_reproduce_the_base_case() {
        let m = GridModel::builtin();
        let oc = operating_condition_from_draws(
            &m,
            &vec![0.5; m.loads.len()],
            &vec![0.5; m.generators.len()],
            DEFAULT_LOAD_SPREAD,
        );
        assert_eq!(oc, OperatingCondition::base(&m));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = GridModel::builtin();
        let a = sample_operating_condition(&m, &mut substream(3, Domain::OperatingCondition, 9), 0.2);
        let b = sample_operating_condition(&m, &mut substream(3, Domain::OperatingCondition, 9), 0.2);
        assert_eq!(a, b);
        assert!(a.load_factors.iter().all(|f| (0.8..=1.2).contains(f)));
    }

    #[test]
    fn load_factor_mean_converges_to_one() {
        let m = GridModel::builtin();
        let mut rng = substream(11, Domain::OperatingCondition, 0);
        let n = 10_000;
        let mut sums = vec![0.0; m.loads.len()];
        for _ in 0..n {
            let oc = sample_operating_condition(&m, &mut rng, 0.2);
            for (s, f) in sums.iter_mut().zip(&oc.load_factors) {
                *s += f;
            }
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn dispatch_tracks_load_change_until_capacity() {
        let m = GridModel::builtin();
        let mut rng = substream(5, Domain::OperatingCondition, 0);
        let base_total = non_slack_total(&m, &OperatingCondition::base(&m).gen_p);
        for _ in 0..200 {
            let oc = sample_operating_condition(&m, &mut rng, 0.2);
            let delta: f64 = m.loads.iter().zip(&oc.load_factors).map(|(l, f)| (f - 1.0) * l.p0).sum();
            let moved = non_slack_total(&m, &oc.gen_p) - base_total;
            let clipped = oc.gen_p.iter().zip(&m.generators).any(|(&p, g)| p == 0.0 || p == g.p_max);
            if !clipped {
                assert!((moved - delta).abs() < 1e-9, "moved {moved} delta {delta}");
            }
            assert!(oc.gen_p.iter().all(|&p| p >= 0.0));
        }
    }
}
