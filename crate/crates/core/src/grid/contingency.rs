use serde::{Deserialize, Serialize};

use super::{GridError, GridModel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "lowercase")]
pub enum Contingency {
    /// Trip a branch by id.
    Branch(String),
    /// Trip the generator at a bus.
    Generator(String),
}

impl std::fmt::Display for Contingency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Contingency::Branch(id) => write!(f, "line:{id}"),
            Contingency::Generator(bus) => write!(f, "gen:{bus}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledContingency {
    /// Simulation second at which the element is removed.
    pub time: u32,
    pub contingency: Contingency,
}

/// Contingencies applied during one simulated case, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencySchedule {
    pub events: Vec<ScheduledContingency>,
}

impl ContingencySchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(time: u32, c: Contingency) -> Self {
        Self { events: vec![ScheduledContingency { time, contingency: c }] }
    }

    pub fn double(t1: u32, first: Contingency, t2: u32, second: Contingency) -> Self {
        Self {
            events: vec![
                ScheduledContingency { time: t1, contingency: first },
                ScheduledContingency { time: t2, contingency: second },
            ],
        }
    }

    pub fn first(&self) -> Option<&ScheduledContingency> {
        self.events.first()
    }

    pub fn second(&self) -> Option<&ScheduledContingency> {
        self.events.get(1)
    }

    /// The schedule truncated to its first event.
    pub fn first_only(&self) -> Self {
        Self { events: self.events.iter().take(1).cloned().collect() }
    }
}

/// Returns a copy of `model` with the contingency applied.
pub fn apply_contingency(model: &GridModel, c: &Contingency) -> Result<GridModel, GridError> {
    let mut next = model.clone();
    match c {
        Contingency::Branch(id) => {
            let i = model.branch_index(id)?;
            if !model.branches[i].in_service {
                return Err(GridError::AlreadyTripped(id.clone()));
            }
            next.branches[i].in_service = false;
            if !next.is_connected() {
                return Err(GridError::IslandingDetected(id.clone()));
            }
        }
        Contingency::Generator(bus) => {
            let g = model.generator_index(bus)?;
            let b = model.bus_index(bus)?;
            if model.buses[b].kind == super::BusKind::Slack {
                return Err(GridError::UnknownElement(format!("slack generator {bus} cannot be tripped")));
            }
            if !model.generators[g].in_service {
                return Err(GridError::AlreadyTripped(c.to_string()));
            }
            next.generators[g].in_service = false;
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tripping_a_corridor_circuit_removes_one_branch() {
        let m = GridModel::builtin();
        let before = m.branches.iter().filter(|b| b.in_service).count();
        let next = apply_contingency(&m, &Contingency::Branch("B3-B5a".into())).unwrap();
        assert_eq!(next.branches.iter().filter(|b| b.in_service).count(), before - 1);
        // Input untouched.
        assert!(m.branches.iter().all(|b| b.in_service));
        let again = apply_contingency(&next, &Contingency::Branch("B3-B5a".into()));
        assert!(matches!(again, Err(GridError::AlreadyTripped(_))));
    }

    #[test]
    fn radial_branch_trip_is_islanding() {
        let m = GridModel::builtin();
        let r = apply_contingency(&m, &Contingency::Branch("T5-9".into()));
        assert!(matches!(r, Err(GridError::IslandingDetected(_))));
    }

    #[test]
    fn unknown_element_is_rejected() {
        let m = GridModel::builtin();
        assert!(matches!(
            apply_contingency(&m, &Contingency::Branch("B1-B12".into())),
            Err(GridError::UnknownElement(_))
        ));
        assert!(matches!(
            apply_contingency(&m, &Contingency::Generator("B5".into())),
            Err(GridError::UnknownElement(_))
        ));
    }
}
