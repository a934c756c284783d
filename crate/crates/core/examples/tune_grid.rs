//! Grid tuning aid: end-state class mix for sampled cases.
//!
//! `cargo run --release --example tune_grid -- [grid.json] [pairs]`

use std::collections::BTreeMap;

use voltpred::grid::GridModel;
use voltpred::scenario::{generate_split, GenConfig, SplitCounts, SplitName};
use voltpred::Exec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let model = match args.get(1) {
        Some(p) => GridModel::load(std::path::Path::new(p)).expect("grid file"),
        None => GridModel::builtin(),
    };
    let pairs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let cfg = GenConfig { train: SplitCounts { n1: pairs, n11: pairs }, ..GenConfig::default() };
    let t0 = std::time::Instant::now();
    let split = generate_split(&model, &cfg, 1, SplitName::Train, Exec::default()).expect("generation");
    println!("generated {} cases in {:.1?}", split.len(), t0.elapsed());
    let h = split.histogram_at(180);
    let n = split.len() as f64;
    println!("t=180 histogram: {:?}  fractions: {:?}", h, h.map(|c| (c as f64 / n * 1000.0).round() / 10.0));
    let mut by_first: BTreeMap<String, [usize; 5]> = BTreeMap::new();
    let mut collapses = 0;
    let mut attempts = 0;
    for c in &split.cases {
        let key = format!("{:?} {}", c.kind, c.schedule.first().unwrap().contingency);
        by_first.entry(key).or_default()[c.end_class.index()] += 1;
        collapses += c.collapsed as usize;
        attempts += c.attempts;
    }
    for (k, v) in by_first {
        println!("{k:30} {v:?}");
    }
    println!("collapsed: {collapses}, mean attempts {:.2}", attempts as f64 / n);
}
