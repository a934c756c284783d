use proptest::prelude::*;
use voltpred::grid::*;
use voltpred::rng::{substream, Domain};
use voltpred::scenario::{check_feasibility, sample_operating_condition, OperatingCondition};

fn two_bus(p: f64) -> GridModel {
    let json = format!(
        r#"{{
        "name": "two-bus", "version": "test",
        "buses": [
            {{"id": "S", "region": "North", "kind": "slack"}},
            {{"id": "L", "region": "C1", "kind": "pq"}}
        ],
        "branches": [{{"id": "S-L", "from": "S", "to": "L", "x": 0.5, "r": 0.0, "kind": "line"}}],
        "generators": [{{"bus": "S", "p": 0.0, "v_set": 1.0, "q_min": -99, "q_max": 99, "p_max": 99}}],
        "loads": [{{"bus": "L", "p0": {p}, "q0": 0.0, "alpha_p": 0.0, "alpha_q": 0.0}}],
        "monitored": ["L"]
    }}"#
    );
    GridModel::from_json(&json).unwrap()
}

/// Largest P for which `V^4 - V^2 E^2 + X^2 P^2 = 0` has a real root,
/// found by bisection on the discriminant alone.
fn quartic_limit(e: f64, x: f64) -> f64 {
    let solvable = |p: f64| e.powi(4) - 4.0 * x * x * p * p >= 0.0;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solvable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn solve(model: &GridModel) -> Result<PowerFlowResult, GridError> {
    solve_power_flow(model, &GridState::flat(model), &PfConfig::default())
}

#[test]
fn zero_load_is_a_flat_fixed_point() {
    let mut m = two_bus(0.0);
    m.buses.push(Bus { id: "G".into(), region: Region::C2, kind: BusKind::Pv, shunt_b: 0.0 });
    m.branches.push(Branch {
        id: "L-G".into(),
        from: "L".into(),
        to: "G".into(),
        x: 0.2,
        r: 0.0,
        in_service: true,
        kind: BranchKind::Line,
    });
    m.generators.push(Generator { bus: "G".into(), v_set: 1.0, ..m.generators[0].clone() });
    let pf = solve(&m).unwrap();
    assert!(pf.v.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    assert!(pf.theta.iter().all(|&a| a.abs() < 1e-12));
    assert!(pf.p_from.iter().chain(&pf.q_from).all(|&f| f.abs() < 1e-12));
}

#[test]
fn two_bus_loadability_matches_the_quartic() {
    let limit = quartic_limit(1.0, 0.5);
    assert!((limit - 1.0).abs() < 1e-9);
    let pf = solve(&two_bus(0.99)).unwrap();
    // The converged voltage is the high root of the quartic.
    let v_hi = ((1.0 + (1.0f64 - 4.0 * 0.25 * 0.99 * 0.99).sqrt()) / 2.0).sqrt();
    assert!((pf.v[1] - v_hi).abs() < 1e-8);
    assert!(matches!(solve(&two_bus(1.01)), Err(GridError::NonConvergence { .. })));

    let (mut lo, mut hi) = (0.5, 1.5);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if solve(&two_bus(mid)).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - limit).abs() / limit <= 0.01, "numerical limit {lo}");
}

#[test]
fn resolving_a_solution_takes_one_iteration() {
    let m = GridModel::builtin();
    let (state, pf) = initialize(&m, &SimConfig::default()).unwrap();
    let again = solve_power_flow(&m, &state, &PfConfig::default()).unwrap();
    assert_eq!(again.iterations, 1);
    assert_eq!(again.v, pf.v);
    assert_eq!(again.theta, pf.theta);
}

#[test]
fn converged_steps_balance_power() {
    let base = GridModel::builtin();
    let cfg = SimConfig::default();
    for i in 0..20 {
        let oc = sample_operating_condition(&base, &mut substream(3, Domain::OperatingCondition, i), 0.2);
        let model = oc.apply(&base).unwrap();
        let Ok((state, pf)) = initialize(&model, &cfg) else { continue };
        assert!(pf.max_mismatch <= 1e-8);
        for (dp, dq) in bus_mismatch(&model, &state).unwrap() {
            assert!(dp.abs() <= 1e-8 && dq.abs() <= 1e-8);
        }
        // Also after a contingency.
        let tripped = apply_contingency(&model, &Contingency::Branch("B4-B6a".into())).unwrap();
        if let Ok(pf) = solve_power_flow(&tripped, &state, &cfg.pf) {
            let s = state.with_solution(&pf);
            assert!(bus_mismatch(&tripped, &s).unwrap().iter().all(|(p, q)| p.abs() <= 1e-8 && q.abs() <= 1e-8));
        }
    }
}

#[test]
fn generator_trip_turns_its_bus_into_a_dead_pq_bus() {
    let m = GridModel::builtin();
    let (state, pf) = initialize(&m, &SimConfig::default()).unwrap();
    let g = m.generator_index("B8").unwrap();
    let b8 = m.bus_index("B8").unwrap();
    assert!((pf.v[b8] - m.generators[g].v_set).abs() < 1e-9);
    let tripped = apply_contingency(&m, &Contingency::Generator("B8".into())).unwrap();
    let after = solve_power_flow(&tripped, &state, &PfConfig::default()).unwrap();
    assert_eq!(after.q_gen[g], 0.0);
    assert!((after.v[b8] - m.generators[g].v_set).abs() > 1e-3);
    assert!(matches!(
        apply_contingency(&tripped, &Contingency::Generator("B8".into())),
        Err(GridError::AlreadyTripped(_))
    ));
}

#[test]
fn no_contingency_runs_hold_their_equilibrium() {
    let base = GridModel::builtin();
    let cfg = SimConfig::default();
    let mut checked = 0;
    for i in 0..6 {
        let oc = sample_operating_condition(&base, &mut substream(11, Domain::OperatingCondition, i), 0.2);
        if !check_feasibility(&base, &oc, &cfg) {
            continue;
        }
        let traj = simulate_case(&base, &oc, &ContingencySchedule::none(), &cfg).unwrap();
        assert_eq!(traj.t_end, 560);
        assert!(!traj.collapsed);
        let first = traj.snapshot(1).to_vec();
        for t in 2..=560 {
            let s = traj.snapshot(t);
            assert!(s.iter().zip(&first).all(|(a, b)| (a - b).abs() <= 1e-9), "drift at t={t}");
        }
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn n1_and_n11_share_their_prefix() {
    let base = GridModel::builtin();
    let cfg = SimConfig::default();
    let oc = OperatingCondition::base(&base);
    let first = Contingency::Branch("B4-B6a".into());
    let n1 = simulate_case(&base, &oc, &ContingencySchedule::single(66, first.clone()), &cfg).unwrap();
    let sched = ContingencySchedule::double(66, first, 85, Contingency::Branch("B3-B5a".into()));
    let n11 = simulate_case(&base, &oc, &sched, &cfg).unwrap();
    for t in 1..85 {
        assert_eq!(n1.snapshot(t), n11.snapshot(t), "t={t}");
    }
    assert_ne!(n1.snapshot(85), n11.snapshot(85));
}

#[test]
fn heavy_load_with_generator_loss_collapses() {
    let base = GridModel::builtin();
    let cfg = SimConfig::default();
    let oc = OperatingCondition::uniform(&base, 1.2);
    let traj =
        simulate_case(&base, &oc, &ContingencySchedule::single(66, Contingency::Generator("B8".into())), &cfg).unwrap();
    assert!(traj.collapsed);
    assert!(traj.t_end < 560);
    assert_eq!(traj.collapse_time, Some(66));
    assert_eq!(traj.features.len(), traj.t_end as usize * traj.dim);
}

#[test]
fn overload_is_infeasible() {
    let base = GridModel::builtin();
    let cfg = SimConfig::default();
    assert!(check_feasibility(&base, &OperatingCondition::base(&base), &cfg));
    let oc = OperatingCondition::uniform(&base, 10.0);
    assert!(!check_feasibility(&base, &oc, &cfg));
    let model = oc.apply(&base).unwrap();
    assert!(matches!(initialize(&model, &cfg), Err(GridError::InfeasibleStart(_))));
}

#[test]
fn shipped_grid_is_valid() {
    let m = GridModel::builtin();
    m.validate().unwrap();
    assert_eq!(m.buses.len(), 12);
    assert_eq!(m.feature_dim(), 52);
    assert_eq!(m.feature_names().len(), 52);
    assert!(m.is_connected());
    assert_eq!(GridModel::from_json(&m.to_json()).unwrap(), m);
}

proptest! {
    #[test]
    fn taps_move_one_step_toward_the_deadband(pos in -15i32..=15, timer in 0u32..30, moved: bool, v in 0.8f64..1.2) {
        let cfg = OltcConfig::default();
        let s = OltcState { timer, moved, ..OltcState::at_position(pos, &cfg) };
        let (next, _) = step_oltc(s, v, 1, &cfg);
        prop_assert!((next.pos - s.pos).abs() <= 1);
        prop_assert!(next.tap >= cfg.tap_min - 1e-12 && next.tap <= cfg.tap_max + 1e-12);
        if v < cfg.deadband_low {
            prop_assert!(next.pos >= s.pos);
        } else if v > cfg.deadband_high {
            prop_assert!(next.pos <= s.pos);
        } else {
            prop_assert_eq!(next.pos, s.pos);
        }
    }
}
