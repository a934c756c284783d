//! Operating-condition sampling, contingency schedules, paired N-1 / N-1-1
//! simulation, labeling, and the on-disk dataset.

mod dataset;
mod labels;
mod oc;

use thiserror::Error;

pub use dataset::{
    generate_dataset, generate_split, sample_schedule, CaseMeta, Dataset, DatasetHeader, GenConfig, Split, SplitCounts,
    SplitHeader, SplitName, DATASET_FORMAT,
};
pub use labels::{
    classify_end_state, classify_voltages, label_pair, CaseKind, LabeledCase, StabilityClass, EMERGENCY_BELOW,
    NUM_CLASSES, STABLE_AT_OR_ABOVE,
};
pub use oc::{
    check_feasibility, operating_condition_from_draws, sample_operating_condition, OperatingCondition,
    DEFAULT_LOAD_SPREAD,
};

use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("pair mismatch: {0}")]
    PairMismatch(String),
    #[error("case {case}: no feasible operating condition after {attempts} attempts")]
    RetryBudgetExhausted { case: usize, attempts: usize },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("dataset io: {0}")]
    Io(String),
    #[error("dataset format: {0}")]
    Format(String),
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}
