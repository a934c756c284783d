//! Prints the base operating point and the end state of each major
//! contingency at a few uniform load levels.
//!
//! `cargo run --example probe_grid -- [grid.json]`

use voltpred::grid::{initialize, simulate_case, ContingencySchedule, GridModel, SimConfig};
use voltpred::scenario::{GenConfig, OperatingCondition};

fn main() {
    let model = match std::env::args().nth(1) {
        Some(p) => GridModel::load(std::path::Path::new(&p)).expect("grid file"),
        None => GridModel::builtin(),
    };
    let sim = SimConfig::default();
    let n = model.buses.len();
    let nb = model.branches.len();
    for level in [0.8, 1.0, 1.2] {
        let oc = OperatingCondition::uniform(&model, level);
        let m = oc.apply(&model).unwrap();
        match initialize(&m, &sim) {
            Ok((st, pf)) => {
                let taps: Vec<f64> = st.oltc.iter().map(|o| o.tap).collect();
                println!("load {level}: vm {:.3?}", pf.v);
                println!(
                    "          taps {taps:.2?} qgen {:.2?} oxl {:?}",
                    pf.q_gen,
                    st.oxl.iter().map(|o| o.tripped).collect::<Vec<_>>()
                );
            }
            Err(e) => {
                println!("load {level}: infeasible: {e}");
                continue;
            }
        }
        for c in GenConfig::default().major_set {
            let s = ContingencySchedule::single(66, c.clone());
            let tr = simulate_case(&model, &oc, &s, &sim).unwrap();
            let last = tr.snapshot(tr.t_end);
            let at = |t: u32| tr.snapshot(t.min(tr.t_end))[4..7].to_vec();
            println!(
                "   {c:12} t_end {:3} v567@66 {:.3?} @120 {:.3?} end {:.3?} p_from {:.2?}",
                tr.t_end,
                at(66),
                at(120),
                &last[4..7],
                &last[2 * n..2 * n + nb]
            );
        }
    }
}
