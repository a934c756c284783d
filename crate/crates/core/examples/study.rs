//! Runs the ablation and generalization studies end to end at a chosen
//! scale and prints the summary numbers.
//!
//! `cargo run --release --example study -- <train_n1> <seed> [key=value ...]`
//! with keys lr, batch, windows, epochs, patience, dropout, rdropout, hidden, test.

use std::time::Instant;

use voltpred::eval::*;
use voltpred::grid::GridModel;
use voltpred::nn::NetSpec;
use voltpred::scenario::{generate_dataset, GenConfig, SplitCounts};
use voltpred::trainer::{train, TrainConfig};
use voltpred::Exec;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n1: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = TrainConfig::default();
    let mut hidden = 32;
    let mut test_n = n1 / 4;
    let mut models = "lstm-60,lstm-30,ffnn,small-batch,n1-only".to_string();
    for kv in args.iter().skip(2) {
        let (k, v) = kv.split_once('=').expect("key=value");
        match k {
            "lr" => cfg.adam.lr = v.parse().unwrap(),
            "batch" => cfg.batch_size = v.parse().unwrap(),
            "windows" => cfg.windows_per_case = v.parse().unwrap(),
            "epochs" => cfg.max_epochs = v.parse().unwrap(),
            "patience" => cfg.patience = v.parse().unwrap(),
            "dropout" => cfg.dropout = v.parse().unwrap(),
            "rdropout" => cfg.recurrent_dropout = v.parse().unwrap(),
            "hidden" => hidden = v.parse().unwrap(),
            "test" => test_n = v.parse().unwrap(),
            "models" => models = v.to_string(),
            _ => panic!("unknown key {k}"),
        }
    }
    let gen = GenConfig {
        train: SplitCounts { n1, n11: 2 * n1 },
        val: SplitCounts { n1: n1 / 8, n11: n1 / 4 },
        test: SplitCounts { n1: test_n, n11: test_n },
        ..GenConfig::default()
    };
    let exec = Exec::default();
    let t0 = Instant::now();
    let ds = generate_dataset(&GridModel::builtin(), &gen, seed, exec).unwrap();
    println!("dataset in {:.1}s", t0.elapsed().as_secs_f64());

    let mut ablation = Vec::new();
    let mut regimes = Vec::new();
    for name in models.split(',') {
        let (spec_name, regime) = match name {
            "small-batch" => ("lstm-60", Some(Regime::SmallBatch)),
            "n1-only" => ("lstm-60", Some(Regime::N1Only)),
            m => (m, None),
        };
        let spec = NetSpec { hidden, ..NetSpec::from_name(spec_name, ds.train.dim).unwrap() };
        let (tr, va) = match regime {
            Some(r) => (regime_split(&ds.train, r, seed, 16), regime_split(&ds.val, r, seed, 16)),
            None => (ds.train.clone(), ds.val.clone()),
        };
        let t = Instant::now();
        let out = train(&tr, &va, &spec, &cfg, seed, exec, |r| {
            eprintln!(
                "  {name} epoch {} loss {:.4} acc {:.3} val {:.4} {:.3}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            )
        })
        .unwrap();
        println!(
            "{name}: {} windows, best epoch {} of {}, val acc {:.3}, {:.1}s",
            out.train_windows,
            out.best_epoch,
            out.history.len(),
            out.checkpoint.header.val_acc,
            t.elapsed().as_secs_f64()
        );
        match regime {
            Some(r) => regimes.push((r, out.checkpoint)),
            None => {
                if name == "lstm-60" {
                    regimes.push((Regime::Full, out.checkpoint.clone()));
                }
                ablation.push((name.to_string(), out.checkpoint));
            }
        }
    }
    let t = Instant::now();
    let ab = run_ablation(&ablation, &ds.test, exec).unwrap();
    println!("{}", serde_json::to_string_pretty(&ablation_summary(&ab)).unwrap());
    if let Ok(dir) = std::env::var("STUDY_OUT") {
        let mut n11: Vec<&EvalCurve> = ab.curves_n11.iter().collect();
        n11.push(&ab.baseline_n11);
        std::fs::write(format!("{dir}/curves_n11.csv"), curves_csv(&n11)).unwrap();
        let mut aligned = String::from("model,offset,accuracy,count\n");
        for (m, rows) in &ab.aligned {
            for (o, a, n) in rows {
                aligned.push_str(&format!("{m},{o},{a:.3},{n}\n"));
            }
        }
        std::fs::write(format!("{dir}/aligned.csv"), aligned).unwrap();
    }
    regimes.sort_by_key(|(r, _)| Regime::ALL.iter().position(|x| x == r));
    let ge = run_generalization(&regimes, &ds.test, exec).unwrap();
    println!("{}", serde_json::to_string_pretty(&generalization_summary(&ge)).unwrap());
    println!("eval in {:.1}s, total {:.1}s", t.elapsed().as_secs_f64(), t0.elapsed().as_secs_f64());
}
