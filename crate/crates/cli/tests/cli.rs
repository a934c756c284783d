use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voltpred::grid::{simulate_case, ContingencySchedule, GridModel, SimConfig};
use voltpred::scenario::OperatingCondition;

fn voltpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voltpred")).args(args).output().expect("run voltpred")
}

fn ok(args: &[&str]) -> String {
    let out = voltpred(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    voltpred(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir`, relative path and bytes, sorted.
fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn gen(dir: &Path, seed: &str, workers: &str) {
    ok(&[
        "gen",
        "--seed",
        seed,
        "--workers",
        workers,
        "--train-pairs",
        "12",
        "--val-pairs",
        "3",
        "--test-pairs",
        "4",
        "--case-csv",
        "--out",
        s(dir),
    ]);
}

const QUICK: &[&str] = &["--max-epochs", "2", "--batch-size", "32", "--windows-per-case", "4", "--hidden", "8"];

#[test]
fn gen_is_reproducible_and_worker_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "4", "1");
    gen(&b, "4", "8");
    let ta = tree(&a);
    assert!(ta.iter().any(|(p, _)| p.ends_with("header.json")));
    assert_eq!(ta, tree(&b));
    // Rerunning into the same directory rewrites identical bytes.
    gen(&a, "4", "2");
    assert_eq!(ta, tree(&a));
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&["gen", "--seed", "1", "--out", s(&out), "--grid", "/no/such/grid.json"]), 2);
    assert_eq!(code(&["gen", "--out", s(&out)]), 2, "seed is mandatory");
    assert_eq!(code(&["gen", "--seed", "1", "--out", s(&out), "--bogus"]), 2);
    assert_eq!(
        code(&["gen", "--seed", "1", "--out", s(&out), "--train-pairs", "1", "--delta-min", "40", "--delta-max", "30"]),
        2
    );
    let missing = tmp.path().join("nothing");
    assert_eq!(code(&["eval", "--seed", "1", "--data", s(&missing), "--checkpoint", s(&missing), "--out", s(&out)]), 4);
    assert_eq!(code(&["ablate", "--seed", "1", "--data", s(&missing), "--out", s(&out)]), 4);
    assert_eq!(code(&["predict", "--seed", "1", "--checkpoint", s(&missing), "--case", s(&missing)]), 4);
    let help = ok(&["train", "--help"]);
    for flag in
        ["--lr", "--batch-size", "--max-epochs", "--patience", "--windows-per-case", "--dropout", "--stop-metric"]
    {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

/// The shipped grid with every load scaled far past its limit.
fn heavy_grid(dir: &Path) -> PathBuf {
    let mut grid = GridModel::builtin();
    for l in &mut grid.loads {
        l.p0 *= 10.0;
        l.q0 *= 10.0;
    }
    let path = dir.join("heavy.json");
    std::fs::write(&path, grid.to_json()).unwrap();
    path
}

#[test]
fn infeasible_grid_fails_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let grid = heavy_grid(tmp.path());
    let c = code(&[
        "gen",
        "--seed",
        "1",
        "--out",
        s(&out),
        "--grid",
        s(&grid),
        "--train-pairs",
        "1",
        "--val-pairs",
        "0",
        "--test-pairs",
        "0",
        "--max-attempts",
        "3",
    ]);
    assert_eq!(c, 3);
}

#[test]
fn train_eval_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "5", "0");
    let mut runs = Vec::new();
    for workers in ["1", "8"] {
        let run = tmp.path().join(format!("ffnn-{workers}"));
        let eval = tmp.path().join(format!("eval-{workers}"));
        let mut args = vec!["train", "--seed", "5", "--workers", workers, "--data", s(&data), "--model", "ffnn"];
        args.extend(["--out", s(&run), "--max-epochs", "60", "--batch-size", "32", "--lr", "3e-3"]);
        let progress = ok(&args);
        assert!(progress.lines().any(|l| l.starts_with("ffnn epoch")));
        let ck = run.join("checkpoint");
        ok(&[
            "eval",
            "--seed",
            "5",
            "--workers",
            workers,
            "--data",
            s(&data),
            "--checkpoint",
            s(&ck),
            "--out",
            s(&eval),
        ]);
        runs.push((run, eval));
    }
    assert_eq!(tree(&runs[0].0), tree(&runs[1].0));
    assert_eq!(tree(&runs[0].1), tree(&runs[1].1));

    let (run, eval) = &runs[0];
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_acc\n"));
    for f in ["curves.csv", "summary.json", "accuracy.svg"] {
        assert!(eval.join(f).is_file(), "{f}");
    }

    // Confusion rows add up to the test cases running at T = 50.
    let table = std::fs::read_to_string(eval.join("confusion_T50.csv")).unwrap();
    let total_row = table.lines().find(|l| l.starts_with("total,")).unwrap();
    let total: usize = total_row.split(',').nth(6).unwrap().parse().unwrap();
    let row_sum: usize =
        table.lines().skip(1).take(5).map(|l| l.split(',').nth(6).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(row_sum, total);
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("header.json")).unwrap()).unwrap();
    let test_cases = header["splits"][2]["n1"].as_u64().unwrap() + header["splits"][2]["n11"].as_u64().unwrap();
    assert!(total as u64 <= test_cases && total > 0);

    // Replaying a case gives one line per complete window.
    let ck = run.join("checkpoint");
    let case = data.join("cases").join("test_00000.csv");
    let rows = std::fs::read_to_string(&case).unwrap().lines().count() - 1;
    let stream = ok(&["predict", "--seed", "5", "--checkpoint", s(&ck), "--case", s(&case)]);
    assert_eq!(stream.lines().count(), rows - 59);
    assert_eq!(stream, ok(&["predict", "--seed", "5", "--checkpoint", s(&ck), "--case", s(&case)]));
    let first: Vec<&str> = stream.lines().next().unwrap().split(',').collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[0], "60");
    let p: f64 = first[1..6].iter().map(|x| x.parse::<f64>().unwrap()).sum();
    assert!((p - 1.0).abs() < 1e-5);

    // A quiet system with no contingency reads as stable throughout.
    let fixture = stable_fixture(tmp.path());
    let stream = ok(&["predict", "--seed", "5", "--checkpoint", s(&ck), "--case", s(&fixture)]);
    assert_eq!(stream.lines().count(), 560 - 59);
    assert!(stream.lines().all(|l| l.ends_with(",stable")), "{}", &stream[..200]);

    // A malformed case file is a format error.
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "t,a\n1,x\n").unwrap();
    assert_eq!(code(&["predict", "--seed", "5", "--checkpoint", s(&ck), "--case", s(&bad)]), 2);
}

fn stable_fixture(dir: &Path) -> PathBuf {
    let model = GridModel::builtin();
    let traj =
        simulate_case(&model, &OperatingCondition::base(&model), &ContingencySchedule::none(), &SimConfig::default())
            .unwrap();
    let mut text = format!("t,{},label\n", model.feature_names().join(","));
    for t in 1..=traj.t_end {
        let row: Vec<String> = traj.snapshot(t).iter().map(|&x| (x as f32).to_string()).collect();
        text.push_str(&format!("{t},{},stable\n", row.join(",")));
    }
    let path = dir.join("quiet.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn studies_emit_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "6", "0");
    let ab = tmp.path().join("ablate");
    let mut args = vec!["ablate", "--seed", "6", "--data", s(&data), "--out", s(&ab), "--auto-train"];
    args.extend_from_slice(QUICK);
    ok(&args);
    let curves = std::fs::read_to_string(ab.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), "T,lstm-60,lstm-30,ffnn,majority");
    assert_eq!(curves.lines().count(), 122);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ab.join("summary.json")).unwrap()).unwrap();
    assert!(summary["mean_accuracy_n1_1"]["lstm-30"].is_number());
    assert!(summary["lstm60_at_least_ffnn"].is_boolean());
    for f in ["curves_n1.csv", "aligned.csv", "ablation.svg", "models/lstm-30/checkpoint/params.f64"] {
        assert!(ab.join(f).is_file(), "{f}");
    }

    // Reuse the ablation's lstm-60 as the full regime.
    let ge = tmp.path().join("general");
    let full = ab.join("models/lstm-60/checkpoint");
    let mut args = vec!["generalize", "--seed", "6", "--data", s(&data), "--out", s(&ge), "--full", s(&full)];
    args.push("--auto-train");
    args.extend_from_slice(QUICK);
    ok(&args);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ge.join("summary.json")).unwrap()).unwrap();
    assert!(summary["ordering_full_small_n1only"].is_boolean());
    assert!(!ge.join("models/full").exists());
    assert!(ge.join("models/small-batch/checkpoint").is_dir());
    assert!(ge.join("generalization.svg").is_file());
}
