mod common;

use proptest::prelude::*;
use voltpred::grid::{GridModel, Region};
use voltpred::scenario::*;
use voltpred::Exec;

use common::tiny_config;

fn dataset(seed: u64, exec: Exec) -> Dataset {
    generate_dataset(&GridModel::builtin(), &tiny_config(12, 3, 3), seed, exec).unwrap()
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn generation_is_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    dataset(5, Exec::Sequential).write(a.path()).unwrap();
    dataset(5, Exec::with_workers(8)).write(b.path()).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);

    let c = tempfile::tempdir().unwrap();
    dataset(6, Exec::Sequential).write(c.path()).unwrap();
    assert_ne!(fa, files(c.path()));
}

#[test]
fn written_datasets_load_back_unchanged() {
    let ds = dataset(7, Exec::default());
    let dir = tempfile::tempdir().unwrap();
    ds.write(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back.header, ds.header);
    for name in SplitName::ALL {
        let (x, y) = (ds.split(name), back.split(name));
        assert_eq!(x.cases, y.cases);
        assert_eq!(x.labels, y.labels);
        assert!(x.features.iter().zip(&y.features).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    // A flipped feature byte is caught.
    let feat = dir.path().join(&ds.header.splits[0].features_file);
    let mut bytes = std::fs::read(&feat).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&feat, bytes).unwrap();
    assert!(Dataset::load(dir.path()).is_err());
}

#[test]
fn every_case_is_stable_before_the_first_contingency_and_spliced_after() {
    let ds = dataset(8, Exec::default());
    let mut pairs = 0;
    for split in [&ds.train, &ds.val, &ds.test] {
        for (i, c) in split.cases.iter().enumerate() {
            let t1 = c.first_time().unwrap();
            assert_eq!(t1, 66);
            for t in 1..t1 {
                assert_eq!(split.label(i, t), StabilityClass::Stable, "case {i} t={t}");
            }
            match c.kind {
                CaseKind::N1 => {
                    assert!((t1..=split.horizon).all(|t| split.label(i, t) == c.end_class));
                }
                CaseKind::N11 => {
                    let t2 = c.second_time().unwrap();
                    assert!((76..=96).contains(&t2));
                    assert!((t2..=split.horizon).all(|t| split.label(i, t) == c.end_class));
                    if let Some(l) = c.link {
                        let n1 = &split.cases[l];
                        assert_eq!(n1.kind, CaseKind::N1);
                        assert_eq!(n1.pair, c.pair);
                        assert!((t1..t2).all(|t| split.label(i, t) == n1.end_class));
                        let shared = (t2 - 1).min(c.t_end).min(n1.t_end);
                        for t in 1..=shared {
                            assert_eq!(split.snapshot(i, t), split.snapshot(l, t));
                        }
                        pairs += 1;
                    }
                }
            }
        }
    }
    assert!(pairs > 0);
}

#[test]
fn case_csv_round_trips() {
    let ds = dataset(9, Exec::default());
    let names = GridModel::builtin().feature_names();
    for i in [0, ds.test.len() - 1] {
        let text = ds.test.case_csv(i, &names);
        let one = Split::from_case_csv(&text, ds.test.horizon).unwrap();
        let t_end = ds.test.cases[i].t_end;
        assert_eq!(one.cases[0].t_end, t_end);
        for t in 1..=t_end {
            assert_eq!(one.snapshot(0, t), ds.test.snapshot(i, t));
            assert_eq!(one.label(0, t), ds.test.label(i, t));
        }
    }
}

#[test]
fn bad_configs_are_rejected() {
    let model = GridModel::builtin();
    let mut cfg = tiny_config(1, 1, 1);
    cfg.delta_min = 40;
    cfg.delta_max = 30;
    assert!(matches!(generate_dataset(&model, &cfg, 1, Exec::Sequential), Err(ScenarioError::InvalidConfig(_))));
    let empty = tiny_config(0, 1, 1);
    assert!(matches!(generate_dataset(&model, &empty, 1, Exec::Sequential), Err(ScenarioError::InvalidConfig(_))));
}

fn expected(v: &[(Region, f64)]) -> StabilityClass {
    let vmin = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    if vmin < 0.9 {
        return StabilityClass::Emergency;
    }
    if vmin >= 1.0 {
        return StabilityClass::Stable;
    }
    let low = v.iter().find(|x| x.1 == vmin).unwrap().0;
    match low {
        Region::C1 => StabilityClass::AlertC1,
        Region::C2 => StabilityClass::AlertC2,
        _ => StabilityClass::AlertC3,
    }
}

#[test]
fn threshold_partition_on_a_grid_straddling_the_boundaries() {
    let levels = [0.85, 0.9 - 1e-12, 0.9, 0.9 + 1e-12, 0.95, 1.0 - 1e-12, 1.0, 1.0 + 1e-12, 1.05];
    for &a in &levels {
        for &b in &levels {
            for &c in &levels {
                let v = [(Region::C1, a), (Region::C2, b), (Region::C3, c)];
                assert_eq!(classify_voltages(&v), expected(&v), "{a} {b} {c}");
            }
        }
    }
}

proptest! {
    #[test]
    fn threshold_partition_holds_near_the_boundaries(
        a in prop_oneof![0.88f64..0.92, 0.98f64..1.02],
        b in prop_oneof![0.88f64..0.92, 0.98f64..1.02],
        c in prop_oneof![0.88f64..0.92, 0.98f64..1.02],
    ) {
        let v = [(Region::C1, a), (Region::C2, b), (Region::C3, c)];
        prop_assert_eq!(classify_voltages(&v), expected(&v));
    }
}
