//! Five-class end-state labeling and the N-1 / N-1-1 label splice.

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::grid::{GridModel, Region, Trajectory};

pub const NUM_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum StabilityClass {
    Stable = 0,
    AlertC1 = 1,
    AlertC2 = 2,
    AlertC3 = 3,
    Emergency = 4,
}

impl StabilityClass {
    pub const ALL: [StabilityClass; NUM_CLASSES] = [
        StabilityClass::Stable,
        StabilityClass::AlertC1,
        StabilityClass::AlertC2,
        StabilityClass::AlertC3,
        StabilityClass::Emergency,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StabilityClass::Stable => "stable",
            StabilityClass::AlertC1 => "alert-c1",
            StabilityClass::AlertC2 => "alert-c2",
            StabilityClass::AlertC3 => "alert-c3",
            StabilityClass::Emergency => "emergency",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == s)
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut y = [0.0; NUM_CLASSES];
        y[self.index()] = 1.0;
        y
    }

    fn alert(region: Region) -> Self {
        match region {
            Region::C1 => StabilityClass::AlertC1,
            Region::C2 => StabilityClass::AlertC2,
            Region::C3 => StabilityClass::AlertC3,
            Region::North => unreachable!("north buses are never monitored"),
        }
    }
}

pub const EMERGENCY_BELOW: f64 = 0.9;
pub const STABLE_AT_OR_ABOVE: f64 = 1.0;

/// Classifies monitored end-state voltages. Any bus below 0.9 pu is an
/// emergency, all at or above 1.0 pu is stable, and otherwise the alert
/// goes to the region of the lowest bus (first in order on ties).
pub fn classify_voltages(monitored: &[(Region, f64)]) -> StabilityClass {
    let (region, vmin) = monitored
        .iter()
        .copied()
        .fold(None, |acc: Option<(Region, f64)>, (r, v)| match acc {
            Some((_, best)) if best <= v => acc,
            _ => Some((r, v)),
        })
        .expect("at least one monitored bus");
    if vmin < EMERGENCY_BELOW {
        StabilityClass::Emergency
    } else if vmin >= STABLE_AT_OR_ABOVE {
        StabilityClass::Stable
    } else {
        StabilityClass::alert(region)
    }
}

/// End-state class of a finished case. Collapsed runs are emergencies.
pub fn classify_end_state(traj: &Trajectory, model: &GridModel) -> StabilityClass {
    if traj.collapsed || traj.t_end == 0 {
        return StabilityClass::Emergency;
    }
    let last = traj.snapshot(traj.t_end);
    let volts: Vec<(Region, f64)> = model.monitored_buses().into_iter().map(|(r, i)| (r, last[i])).collect();
    classify_voltages(&volts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    #[serde(rename = "N-1")]
    N1,
    #[serde(rename = "N-1-1")]
    N11,
}

/// A simulated case with its per-second targets `y^1..y^horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCase {
    pub trajectory: Trajectory,
    /// `labels[t - 1]` is the target at second t. Always `horizon` long;
    /// seconds after a collapse carry the end-state class.
    pub labels: Vec<StabilityClass>,
    pub kind: CaseKind,
    pub end_class: StabilityClass,
}

impl LabeledCase {
    pub fn label(&self, t: u32) -> StabilityClass {
        self.labels[t as usize - 1]
    }
}

/// Labels a paired N-1 / N-1-1 run.
///
/// Both sequences are stable before the first contingency. The N-1 case
/// then carries its own end state. The N-1-1 case carries the N-1 end state
/// between the two contingencies and its own end state from `t2` on.
pub fn label_pair(
    n1: Trajectory,
    n11: Trajectory,
    t2: u32,
    model: &GridModel,
    horizon: u32,
) -> Result<(LabeledCase, LabeledCase), ScenarioError> {
    let t1 = n1
        .schedule
        .first()
        .map(|e| e.time)
        .ok_or_else(|| ScenarioError::PairMismatch("N-1 case has no contingency".into()))?;
    if n11.schedule.first() != n1.schedule.first() {
        return Err(ScenarioError::PairMismatch("first contingencies differ".into()));
    }
    if t2 <= t1 {
        return Err(ScenarioError::PairMismatch(format!("t2={t2} not after t1={t1}")));
    }
    let shared = (t2 - 1).min(n1.t_end).min(n11.t_end);
    let span = shared as usize * n1.dim;
    if n1.dim != n11.dim || n1.features[..span] != n11.features[..span] {
        return Err(ScenarioError::PairMismatch("pre-contingency snapshots differ".into()));
    }

    let end1 = classify_end_state(&n1, model);
    let end11 = classify_end_state(&n11, model);
    let labels1 = (1..=horizon).map(|t| if t < t1 { StabilityClass::Stable } else { end1 }).collect();
    let labels11 = (1..=horizon)
        .map(|t| {
            if t < t1 {
                StabilityClass::Stable
            } else if t < t2 {
                end1
            } else {
                end11
            }
        })
        .collect();
    Ok((
        LabeledCase { trajectory: n1, labels: labels1, kind: CaseKind::N1, end_class: end1 },
        LabeledCase { trajectory: n11, labels: labels11, kind: CaseKind::N11, end_class: end11 },
    ))
}
