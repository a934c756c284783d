//! Long-term voltage instability prediction.
//!
//! - [`grid`]: quasi-steady-state simulation of a twelve-bus test grid
//!   with tap changers and overexcitation limiters.
//! - [`scenario`]: operating-condition sampling, N-1 / N-1-1 contingency
//!   schedules, five-class labeling and the dataset format.
//! - [`nn`]: stacked LSTM and feedforward classifiers with exact gradients,
//!   dropout and Adam.
//! - [`trainer`]: windowing, mini-batch training with early stopping.
//! - [`eval`]: rolling-window prediction, accuracy curves, confusion tables
//!   and the comparative studies.

pub mod eval;
pub mod exec;
pub mod grid;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod trainer;

pub use exec::Exec;
