//! Stacked LSTM and feedforward classifiers, trained from scratch.
//!
//! The forward pass per layer and step is
//!
//! ```text
//! f  = σ(W_f x + U_f h' + b_f)      i = σ(W_i x + U_i h' + b_i)
//! c̃  = tanh(W_c x + U_c h' + b_c)   o = σ(W_o x + U_o h' + b_o)
//! c  = f ⊙ c' + i ⊙ c̃               h = o ⊙ tanh(c)
//! ```
//!
//! with zero initial state. Deeper layers read the hidden state of the
//! layer below, and a softmax head reads only the top layer's final `h`.

mod adam;
mod cell;
mod checkpoint;
mod dropout;
mod gradcheck;
mod head;
pub mod linalg;
mod net;
mod norm;
mod spec;

pub use adam::{AdamConfig, AdamState};
pub use cell::{lstm_block_forward, BlockCache, GateParams, LayerParams};
pub use checkpoint::{sha256_hex, Checkpoint, CheckpointHeader, CHECKPOINT_FORMAT, HEADER_FILE, PARAMS_FILE};
pub use dropout::{bernoulli_mask, sample_dropout_masks, DropoutMasks};
pub use gradcheck::{gradient_check, relative_error, FD_STEP};
pub use head::{argmax, cross_entropy, cross_entropy_index, softmax, LOG_EPS};
pub use net::{BatchStats, Forward, Gradients, Network, CHUNK};
pub use norm::Normalization;
pub use spec::{
    init_params, Arch, LayerSlices, Layout, NetSpec, DEFAULT_HIDDEN, DEFAULT_LAYERS, DEFAULT_SEQ_LEN, INIT_SCHEME,
};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence length {got}, network expects {expected}")]
    SequenceLengthMismatch { expected: usize, got: usize },
    #[error("backward called without a forward cache")]
    MissingCache,
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint input width {got}, data has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
