//! Sequential vs parallel execution of the three data-parallel loops:
//! case generation, batch gradients and rolling evaluation.
//!
//! Without the `parallel` feature both variants run sequentially.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use voltpred::eval::ModelRun;
use voltpred::grid::GridModel;
use voltpred::nn::{Checkpoint, NetSpec, Network};
use voltpred::scenario::{generate_dataset, Dataset, GenConfig, SplitCounts};
use voltpred::trainer::{train, TrainConfig};
use voltpred::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel { workers: 0 })];

fn small_config() -> GenConfig {
    GenConfig {
        train: SplitCounts { n1: 8, n11: 16 },
        val: SplitCounts { n1: 2, n11: 4 },
        test: SplitCounts { n1: 4, n11: 4 },
        ..GenConfig::default()
    }
}

fn generation(c: &mut Criterion) {
    let model = GridModel::builtin();
    let cfg = small_config();
    let mut g = c.benchmark_group("generate_dataset");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| generate_dataset(&model, &cfg, black_box(1), exec).unwrap()));
    }
    g.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let spec = NetSpec::lstm(52, 60);
    let net = Network::init(spec.clone(), 1).unwrap();
    let bsz = 128;
    let x: Vec<f64> = (0..bsz * spec.sample_len()).map(|i| (i as f64 * 0.013).sin()).collect();
    let targets: Vec<usize> = (0..bsz).map(|i| i % 5).collect();
    let mut g = c.benchmark_group("batch_stats_lstm60_b128");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| net.batch_stats(black_box(&x), &targets, None, exec).unwrap()));
    }
    g.finish();
}

fn fitted(ds: &Dataset) -> Checkpoint {
    let cfg = TrainConfig { max_epochs: 1, windows_per_case: 2, ..TrainConfig::default() };
    let spec = NetSpec { hidden: 16, ..NetSpec::lstm(ds.train.dim, 30) };
    train(&ds.train, &ds.val, &spec, &cfg, 1, Exec::default(), |_| {}).unwrap().checkpoint
}

fn rolling_eval(c: &mut Criterion) {
    let ds = generate_dataset(&GridModel::builtin(), &small_config(), 1, Exec::default()).unwrap();
    let ck = fitted(&ds);
    let mut g = c.benchmark_group("rolling_eval");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| ModelRun::evaluate("m", &ck, &ds.test, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, generation, batch_gradient, rolling_eval);
criterion_main!(benches);
