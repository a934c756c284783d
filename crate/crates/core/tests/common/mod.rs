#![allow(dead_code)]

use voltpred::grid::GridModel;
use voltpred::scenario::{generate_dataset, Dataset, GenConfig, SplitCounts};
use voltpred::Exec;

pub fn tiny_config(train: usize, val: usize, test: usize) -> GenConfig {
    GenConfig {
        train: SplitCounts { n1: train, n11: train },
        val: SplitCounts { n1: val, n11: val },
        test: SplitCounts { n1: test, n11: test },
        ..GenConfig::default()
    }
}

pub fn tiny_dataset(train: usize, val: usize, test: usize, seed: u64) -> Dataset {
    let model = GridModel::builtin();
    generate_dataset(&model, &tiny_config(train, val, test), seed, Exec::default()).expect("generation")
}
