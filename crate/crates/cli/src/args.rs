use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "voltpred", version, about = "Voltage instability prediction with LSTM networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn common(&self) -> &Common {
        match &self.command {
            Command::Gen(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Ablate(a) => &a.common,
            Command::Generalize(a) => &a.common,
            Command::Predict(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Root seed. Every random draw derives from it.
    #[arg(long)]
    pub seed: u64,
    /// Worker threads for the data-parallel loops (0 lets the runtime
    /// decide). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the operating conditions and write a labeled dataset.
    Gen(GenArgs),
    /// Train one model on a dataset.
    Train(TrainArgs),
    /// Accuracy curves and the confusion table of one checkpoint.
    Eval(EvalArgs),
    /// Sequence-length ablation: lstm-60, lstm-30 and ffnn.
    Ablate(AblateArgs),
    /// Training-regime study: full, small-batch and N-1 only.
    Generalize(GeneralizeArgs),
    /// Replay one case file and print the prediction for every second.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid file; the shipped 12-bus grid when omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Generation config (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training operating conditions: N N-1 cases and 2N N-1-1 cases.
    #[arg(long)]
    pub train_pairs: Option<usize>,
    /// Validation operating conditions: N N-1 cases and 2N N-1-1 cases.
    #[arg(long)]
    pub val_pairs: Option<usize>,
    /// Test operating conditions: N N-1 and N N-1-1 cases.
    #[arg(long)]
    pub test_pairs: Option<usize>,
    #[arg(long)]
    pub first_time: Option<u32>,
    #[arg(long)]
    pub delta_min: Option<u32>,
    #[arg(long)]
    pub delta_max: Option<u32>,
    #[arg(long)]
    pub load_spread: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Simulated seconds per case.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Also write one CSV per case under `cases/`.
    #[arg(long)]
    pub case_csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopMetricArg {
    ValAccuracy,
    ValLoss,
}

/// Training hyperparameters. Each flag overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Training config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub t_min: Option<u32>,
    #[arg(long)]
    pub t_max: Option<u32>,
    #[arg(long)]
    pub windows_per_case: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub recurrent_dropout: Option<f64>,
    #[arg(long, value_enum)]
    pub stop_metric: Option<StopMetricArg>,
    #[arg(long)]
    pub val_stride: Option<usize>,
    /// Cells per layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Stacked layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// The small-batch regime keeps 1/N of the N-1-1 training cases.
    #[arg(long, default_value_t = 16)]
    pub small_batch_den: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Full,
    SmallBatch,
    N1Only,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// lstm-60, lstm-30, ffnn, or lstm-N for any window length N.
    #[arg(long, default_value = "lstm-60")]
    pub model: String,
    /// Which training cases to use.
    #[arg(long, value_enum, default_value_t = RegimeArg::Full)]
    pub regime: RegimeArg,
    /// Run directory: `checkpoint/`, `history.csv`, `train.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `T` of the confusion table.
    #[arg(long, default_value_t = 50)]
    pub at: u32,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lstm60: Option<PathBuf>,
    #[arg(long)]
    pub lstm30: Option<PathBuf>,
    #[arg(long)]
    pub ffnn: Option<PathBuf>,
    /// Train any model whose checkpoint is not given.
    #[arg(long)]
    pub auto_train: bool,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub full: Option<PathBuf>,
    #[arg(long)]
    pub small_batch: Option<PathBuf>,
    #[arg(long)]
    pub n1_only: Option<PathBuf>,
    /// Train any regime whose checkpoint is not given.
    #[arg(long)]
    pub auto_train: bool,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Case file in the dataset's per-case CSV layout.
    #[arg(long)]
    pub case: PathBuf,
}
