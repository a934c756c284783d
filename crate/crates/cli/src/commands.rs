use std::path::{Path, PathBuf};

use serde_json::json;
use voltpred::eval::*;
use voltpred::grid::GridModel;
use voltpred::nn::{Checkpoint, NetSpec, NnError};
use voltpred::scenario::{
    generate_dataset, CaseKind, Dataset, GenConfig, ScenarioError, Split, SplitCounts, StabilityClass, NUM_CLASSES,
};
use voltpred::trainer::{history_csv, train as fit, StopMetric, TrainConfig, TrainError};
use voltpred::Exec;

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn make_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value") + "\n"
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.join("header.json").is_file() {
        return Err(CliError::Missing(format!("no dataset at {}", dir.display())));
    }
    Dataset::load(dir).map_err(|e| match e {
        ScenarioError::Io(m) => CliError::Missing(m),
        e => CliError::Config(e.to_string()),
    })
}

fn load_checkpoint(dir: &Path, input_dim: usize) -> Result<Checkpoint> {
    if !dir.is_dir() {
        return Err(CliError::Missing(format!("no checkpoint at {}", dir.display())));
    }
    Checkpoint::load_for(dir, input_dim).map_err(|e| match e {
        NnError::Io(e) => CliError::Missing(format!("{}: {e}", dir.display())),
        e => CliError::Config(format!("{}: {e}", dir.display())),
    })
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::InvalidConfig(_) | TrainError::DimensionMismatch { .. } => CliError::Config(e.to_string()),
        e => CliError::Run(e.to_string()),
    }
}

pub fn gen(a: &GenArgs, seed: u64, exec: Exec) -> Result<()> {
    let model = match &a.grid {
        Some(p) => GridModel::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => GridModel::builtin(),
    };
    let mut cfg: GenConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GenConfig::default(),
    };
    if let Some(n) = a.train_pairs {
        cfg.train = SplitCounts { n1: n, n11: 2 * n };
    }
    if let Some(n) = a.val_pairs {
        cfg.val = SplitCounts { n1: n, n11: 2 * n };
    }
    if let Some(n) = a.test_pairs {
        cfg.test = SplitCounts { n1: n, n11: n };
    }
    set(&mut cfg.first_time, a.first_time);
    set(&mut cfg.delta_min, a.delta_min);
    set(&mut cfg.delta_max, a.delta_max);
    set(&mut cfg.load_spread, a.load_spread);
    set(&mut cfg.max_attempts, a.max_attempts);
    set(&mut cfg.sim.horizon, a.horizon);
    cfg.case_csv |= a.case_csv;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    model.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let ds = generate_dataset(&model, &cfg, seed, exec).map_err(|e| match e {
        ScenarioError::InvalidConfig(m) => CliError::Config(m),
        e => CliError::Generation(e.to_string()),
    })?;
    ds.write(&a.out).map_err(|e| CliError::Run(e.to_string()))?;

    println!("wrote {}", a.out.display());
    let names: Vec<&str> = StabilityClass::ALL.iter().map(|c| c.name()).collect();
    println!("{:<6} {:>6} {:>6}  t=180: {}", "split", "n1", "n11", names.join(" "));
    for s in [&ds.train, &ds.val, &ds.test] {
        let t = 180.min(s.horizon);
        let h = s.histogram_at(t);
        let total = s.len().max(1) as f64;
        let pct: Vec<String> = h.iter().map(|&n| format!("{:.1}%", 100.0 * n as f64 / total)).collect();
        println!(
            "{:<6} {:>6} {:>6}  {}",
            s.name.as_str(),
            s.indices_of(CaseKind::N1).len(),
            s.indices_of(CaseKind::N11).len(),
            pct.join(" ")
        );
    }
    Ok(())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn train_config(f: &TrainFlags) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &f.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    set(&mut cfg.adam.lr, f.lr);
    set(&mut cfg.adam.beta1, f.beta1);
    set(&mut cfg.adam.beta2, f.beta2);
    set(&mut cfg.adam.eps, f.adam_eps);
    set(&mut cfg.batch_size, f.batch_size);
    set(&mut cfg.max_epochs, f.max_epochs);
    set(&mut cfg.patience, f.patience);
    set(&mut cfg.t_min, f.t_min);
    set(&mut cfg.t_max, f.t_max);
    set(&mut cfg.windows_per_case, f.windows_per_case);
    set(&mut cfg.dropout, f.dropout);
    set(&mut cfg.recurrent_dropout, f.recurrent_dropout);
    set(&mut cfg.val_stride, f.val_stride);
    if let Some(m) = f.stop_metric {
        cfg.stop_metric = match m {
            StopMetricArg::ValAccuracy => StopMetric::ValAccuracy,
            StopMetricArg::ValLoss => StopMetric::ValLoss,
        };
    }
    if f.small_batch_den == 0 {
        return Err(CliError::Config("small-batch denominator must be positive".into()));
    }
    Ok(cfg)
}

fn net_spec(model: &str, dim: usize, f: &TrainFlags) -> Result<NetSpec> {
    let mut spec = NetSpec::from_name(model, dim).map_err(|e| CliError::Config(e.to_string()))?;
    set(&mut spec.hidden, f.hidden);
    set(&mut spec.layers, f.layers);
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

fn regime_of(r: RegimeArg) -> Regime {
    match r {
        RegimeArg::Full => Regime::Full,
        RegimeArg::SmallBatch => Regime::SmallBatch,
        RegimeArg::N1Only => Regime::N1Only,
    }
}

/// Trains one model and writes `checkpoint/`, `history.csv` and
/// `train.json` under `out`.
fn train_run(
    ds: &Dataset,
    model: &str,
    regime: Regime,
    flags: &TrainFlags,
    seed: u64,
    exec: Exec,
    out: &Path,
) -> Result<Checkpoint> {
    let cfg = train_config(flags)?;
    let spec = net_spec(model, ds.feature_dim(), flags)?;
    cfg.validate(spec.seq_len).map_err(train_error)?;
    make_dir(out)?;
    let den = flags.small_batch_den;
    let tr = regime_split(&ds.train, regime, seed, den);
    let va = regime_split(&ds.val, regime, seed, den);
    let label = if regime == Regime::Full { model.to_string() } else { format!("{model} ({})", regime.name()) };
    let outcome = fit(&tr, &va, &spec, &cfg, seed, exec, |r| {
        println!(
            "{label} epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        )
    })
    .map_err(train_error)?;
    outcome.checkpoint.save(&out.join("checkpoint")).map_err(|e| CliError::Run(e.to_string()))?;
    write(&out.join("history.csv"), history_csv(&outcome.history))?;
    let summary = json!({
        "model": spec.name(),
        "regime": regime.name(),
        "seed": seed,
        "train_cases": tr.len(),
        "train_windows": outcome.train_windows,
        "skipped_cases": outcome.skipped_cases,
        "epochs": outcome.history.len(),
        "best_epoch": outcome.best_epoch,
        "stop": outcome.stop,
        "val_acc": outcome.checkpoint.header.val_acc,
        "config": cfg,
    });
    write(&out.join("train.json"), pretty(&summary))?;
    println!(
        "{label}: best epoch {} of {}, val acc {:.4}",
        outcome.best_epoch,
        outcome.history.len(),
        outcome.checkpoint.header.val_acc
    );
    Ok(outcome.checkpoint)
}

pub fn train(a: &TrainArgs, seed: u64, exec: Exec) -> Result<()> {
    // Surface flag errors before touching the dataset.
    train_config(&a.train)?;
    let ds = load_dataset(&a.data)?;
    train_run(&ds, &a.model, regime_of(a.regime), &a.train, seed, exec, &a.out)?;
    Ok(())
}

/// First contingency and the span of second-contingency times on the
/// `T` axis.
fn event_marks(test: &Split) -> (Option<u32>, Option<(u32, u32)>) {
    let t1 = test.cases.iter().filter_map(|c| c.first_time()).min();
    let t2: Vec<u32> = test.cases.iter().filter_map(|c| c.second_time()).collect();
    let span = match (t2.iter().min(), t2.iter().max()) {
        (Some(&lo), Some(&hi)) => Some((lo.saturating_sub(FIRST_T), hi.saturating_sub(FIRST_T))),
        _ => None,
    };
    (t1.map(|t| t.saturating_sub(FIRST_T)), span)
}

fn relabel(mut c: EvalCurve, label: &str) -> EvalCurve {
    c.label = label.into();
    c
}

fn means(curves: &[&EvalCurve]) -> serde_json::Map<String, serde_json::Value> {
    curves.iter().map(|c| (c.label.clone(), json!(c.mean_over(SUMMARY_T_MIN, SUMMARY_T_MAX)))).collect()
}

fn prepare_out(out: &Path) -> Result<()> {
    make_dir(out)
}

pub fn eval(a: &EvalArgs, exec: Exec) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let ck = load_checkpoint(&a.checkpoint, ds.feature_dim())?;
    if a.at > CURVE_T_MAX {
        return Err(CliError::Config(format!("--at must be at most {CURVE_T_MAX}")));
    }
    prepare_out(&a.out)?;
    let test = &ds.test;
    let name = ck.header.spec.name();
    let run = ModelRun::evaluate(&name, &ck, test, exec).map_err(|e| CliError::Run(e.to_string()))?;
    let all: Vec<usize> = (0..test.len()).collect();
    let n1 = test.indices_of(CaseKind::N1);
    let n11 = test.indices_of(CaseKind::N11);
    let curves = [
        accuracy_over_time("all", &run.preds, test, &all),
        accuracy_over_time("n1", &run.preds, test, &n1),
        accuracy_over_time("n1_1", &run.preds, test, &n11),
        relabel(majority_baseline(test, &n1), "majority_n1"),
        relabel(majority_baseline(test, &n11), "majority_n1_1"),
    ];
    let refs: Vec<&EvalCurve> = curves.iter().collect();
    write(&a.out.join("curves.csv"), curves_csv(&refs))?;

    let table = ConfusionTable::from_predictions(&run.preds, test, &all, a.at);
    write(&a.out.join(format!("confusion_T{}.csv", a.at)), table.to_csv())?;
    let per_kind = |cases: &[usize]| {
        let t = ConfusionTable::from_predictions(&run.preds, test, cases, a.at);
        json!({ "accuracy": t.accuracy(), "cases": t.total() })
    };
    let recall: serde_json::Map<_, _> =
        (0..NUM_CLASSES).map(|k| (StabilityClass::ALL[k].name().to_string(), json!(table.recall(k)))).collect();
    let summary = json!({
        "model": name,
        "test_cases": test.len(),
        "summary_range_T": [SUMMARY_T_MIN, SUMMARY_T_MAX],
        "mean_accuracy": means(&refs),
        "pre_contingency_accuracy": curves[0].mean_over(0, 5),
        "confusion": {
            "T": a.at,
            "accuracy": table.accuracy(),
            "recall": recall,
            "n1": per_kind(&n1),
            "n1_1": per_kind(&n11),
        },
    });
    write(&a.out.join("summary.json"), pretty(&summary))?;
    let (event, span) = event_marks(test);
    write(&a.out.join("accuracy.svg"), svg_chart(&format!("{name}: accuracy over time"), &refs[..3], event, span))?;
    println!("{}", pretty(&summary["mean_accuracy"]).trim_end());
    println!("confusion at T={}: accuracy {:.4}", a.at, table.accuracy());
    Ok(())
}

/// Given checkpoints are loaded; missing ones are trained into
/// `out/models/<name>` with `--auto-train`, and are an error otherwise.
fn obtain(
    ds: &Dataset,
    given: Option<&PathBuf>,
    model: &str,
    regime: Regime,
    a: (&TrainFlags, bool),
    seed: u64,
    exec: Exec,
    out: &Path,
) -> Result<Checkpoint> {
    let name = if regime == Regime::Full { model.to_string() } else { regime.name().to_string() };
    match given {
        Some(dir) => load_checkpoint(dir, ds.feature_dim()),
        None if a.1 => train_run(ds, model, regime, a.0, seed, exec, &out.join("models").join(&name)),
        None => Err(CliError::Missing(format!("no checkpoint for {name}; pass it or use --auto-train"))),
    }
}

fn check_given(paths: &[(&str, Option<&PathBuf>)], auto: bool) -> Result<()> {
    for (name, p) in paths {
        match p {
            Some(dir) if !dir.is_dir() => {
                return Err(CliError::Missing(format!("{name}: no checkpoint at {}", dir.display())))
            }
            None if !auto => {
                return Err(CliError::Missing(format!("no checkpoint for {name}; pass it or use --auto-train")))
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn ablate(a: &AblateArgs, seed: u64, exec: Exec) -> Result<()> {
    train_config(&a.train)?;
    check_given(
        &[("lstm-60", a.lstm60.as_ref()), ("lstm-30", a.lstm30.as_ref()), ("ffnn", a.ffnn.as_ref())],
        a.auto_train,
    )?;
    let ds = load_dataset(&a.data)?;
    prepare_out(&a.out)?;
    let flags = (&a.train, a.auto_train);
    let mut models = Vec::new();
    for (name, given) in [("lstm-60", &a.lstm60), ("lstm-30", &a.lstm30), ("ffnn", &a.ffnn)] {
        models.push((name.to_string(), obtain(&ds, given.as_ref(), name, Regime::Full, flags, seed, exec, &a.out)?));
    }
    let r = run_ablation(&models, &ds.test, exec).map_err(|e| CliError::Run(e.to_string()))?;

    let mut n11: Vec<&EvalCurve> = r.curves_n11.iter().collect();
    n11.push(&r.baseline_n11);
    write(&a.out.join("curves.csv"), curves_csv(&n11))?;
    let mut n1: Vec<&EvalCurve> = r.curves_n1.iter().collect();
    n1.push(&r.baseline_n1);
    write(&a.out.join("curves_n1.csv"), curves_csv(&n1))?;
    let mut aligned = String::from("model,t_minus_t2,accuracy,cases\n");
    for (m, rows) in &r.aligned {
        for (off, acc, n) in rows {
            aligned.push_str(&format!("{m},{off},{acc},{n}\n"));
        }
    }
    write(&a.out.join("aligned.csv"), aligned)?;
    let summary = ablation_summary(&r);
    write(&a.out.join("summary.json"), pretty(&summary))?;
    let (event, span) = event_marks(&ds.test);
    write(&a.out.join("ablation.svg"), svg_chart("Sequence length: N-1-1 test cases", &n11, event, span))?;
    write(&a.out.join("ablation_n1.svg"), svg_chart("Sequence length: N-1 test cases", &n1, event, None))?;
    println!("{}", pretty(&summary).trim_end());
    Ok(())
}

pub fn generalize(a: &GeneralizeArgs, seed: u64, exec: Exec) -> Result<()> {
    train_config(&a.train)?;
    check_given(
        &[("full", a.full.as_ref()), ("small-batch", a.small_batch.as_ref()), ("n1-only", a.n1_only.as_ref())],
        a.auto_train,
    )?;
    let ds = load_dataset(&a.data)?;
    prepare_out(&a.out)?;
    let flags = (&a.train, a.auto_train);
    let mut models = Vec::new();
    for (regime, given) in [(Regime::Full, &a.full), (Regime::SmallBatch, &a.small_batch), (Regime::N1Only, &a.n1_only)]
    {
        models.push((regime, obtain(&ds, given.as_ref(), "lstm-60", regime, flags, seed, exec, &a.out)?));
    }
    let r = run_generalization(&models, &ds.test, exec).map_err(|e| CliError::Run(e.to_string()))?;
    let n11_cases = ds.test.indices_of(CaseKind::N11);
    let n1_cases = ds.test.indices_of(CaseKind::N1);
    let base11 = majority_baseline(&ds.test, &n11_cases);
    let base1 = majority_baseline(&ds.test, &n1_cases);
    let mut n11: Vec<&EvalCurve> = r.curves_n11.iter().collect();
    n11.push(&base11);
    write(&a.out.join("curves.csv"), curves_csv(&n11))?;
    let mut n1: Vec<&EvalCurve> = r.curves_n1.iter().collect();
    n1.push(&base1);
    write(&a.out.join("curves_n1.csv"), curves_csv(&n1))?;
    let summary = generalization_summary(&r);
    write(&a.out.join("summary.json"), pretty(&summary))?;
    let (event, span) = event_marks(&ds.test);
    write(&a.out.join("generalization.svg"), svg_chart("Training regime: N-1-1 test cases", &n11, event, span))?;
    println!("{}", pretty(&summary).trim_end());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    if !a.case.is_file() {
        return Err(CliError::Missing(format!("no case file at {}", a.case.display())));
    }
    let text = std::fs::read_to_string(&a.case).map_err(|e| CliError::Missing(format!("{}: {e}", a.case.display())))?;
    let rows = text.lines().filter(|l| !l.trim().is_empty()).count().saturating_sub(1) as u32;
    let split = Split::from_case_csv(&text, rows.max(1)).map_err(|e| CliError::Config(e.to_string()))?;
    let ck = load_checkpoint(&a.checkpoint, split.dim)?;
    let preds = rolling_predict(&ck, &split, 0, u32::MAX).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = String::new();
    for t in FIRST_T..=preds.t_last {
        let p = preds.probs_at(t).expect("prediction in range");
        let probs: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
        let label = preds.class_at(t).expect("prediction in range").name();
        out.push_str(&format!("{t},{},{label}\n", probs.join(",")));
    }
    print!("{out}");
    Ok(())
}
