//! Quasi-steady-state simulation of the test grid: power flow, discrete
//! controllers, contingencies, and 1 s time stepping.

mod contingency;
mod devices;
mod model;
mod powerflow;
mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contingency::{apply_contingency, Contingency, ContingencySchedule, ScheduledContingency};
pub use devices::{step_oltc, step_oxl, OltcConfig, OltcState, OxlConfig, OxlState};
pub use model::{Branch, BranchKind, Bus, BusKind, Generator, GridModel, Load, Region, BUILTIN_GRID};
pub use powerflow::{bus_mismatch, solve_power_flow, PfConfig, PowerFlowResult};
pub use sim::{initialize, simulate_case, SimConfig, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid file format: {0}")]
    Format(String),
    #[error("grid file io: {0}")]
    Io(String),
    #[error("invalid grid model: {0}")]
    InvalidModel(String),
    #[error("unknown element: {0}")]
    UnknownElement(String),
    #[error("element already out of service: {0}")]
    AlreadyTripped(String),
    #[error("removing {0} would island part of the network")]
    IslandingDetected(String),
    #[error("power flow did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("initial power flow infeasible: {0}")]
    InfeasibleStart(String),
}

/// Mutable electrical and controller state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// One per OLTC branch, in branch order.
    pub oltc: Vec<OltcState>,
    /// One per generator, in generator order.
    pub oxl: Vec<OxlState>,
    pub t: u32,
}

impl GridState {
    /// Flat start: 1.0 pu and zero angle everywhere, nominal taps.
    pub fn flat(model: &GridModel) -> Self {
        Self {
            v: vec![1.0; model.buses.len()],
            theta: vec![0.0; model.buses.len()],
            oltc: vec![OltcState::nominal(); model.oltc_branches().len()],
            oxl: vec![OxlState::default(); model.generators.len()],
            t: 0,
        }
    }

    pub fn with_solution(&self, pf: &PowerFlowResult) -> Self {
        Self { v: pf.v.clone(), theta: pf.theta.clone(), ..self.clone() }
    }
}
