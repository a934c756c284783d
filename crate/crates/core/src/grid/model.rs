//! Static network description and the JSON grid file.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    North,
    C1,
    C2,
    C3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub region: Region,
    pub kind: BusKind,
    /// Shunt susceptance in pu (capacitive positive).
    #[serde(default)]
    pub shunt_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    Line,
    OltcTransformer,
}

/// A series branch. For OLTC transformers the `from` side is the
/// transmission bus and the ideal ratio sits there, so that at no load
/// `V_to ≈ tap · V_from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from: String,
    pub to: String,
    pub x: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default = "yes")]
    pub in_service: bool,
    pub kind: BranchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: String,
    /// Active power setpoint, pu.
    pub p: f64,
    pub v_set: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Rated active capacity, pu. Drives the dispatch weights.
    pub p_max: f64,
    #[serde(default)]
    pub oxl: bool,
    #[serde(default = "yes")]
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: String,
    pub p0: f64,
    pub q0: f64,
    pub alpha_p: f64,
    pub alpha_q: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub name: String,
    pub version: String,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    /// Transmission buses whose end-state voltages decide the class.
    pub monitored: Vec<String>,
}

impl GridModel {
    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let model: GridModel = serde_json::from_str(text).map_err(|e| GridError::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The twelve-bus test grid shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_GRID).expect("builtin grid is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid model serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn bus_index(&self, id: &str) -> Result<usize, GridError> {
        self.buses.iter().position(|b| b.id == id).ok_or_else(|| GridError::UnknownElement(id.to_string()))
    }

    pub fn branch_index(&self, id: &str) -> Result<usize, GridError> {
        self.branches.iter().position(|b| b.id == id).ok_or_else(|| GridError::UnknownElement(id.to_string()))
    }

    pub fn generator_index(&self, bus: &str) -> Result<usize, GridError> {
        self.generators
            .iter()
            .position(|g| g.bus == bus)
            .ok_or_else(|| GridError::UnknownElement(format!("generator at {bus}")))
    }

    pub fn slack_index(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Slack).expect("validated model has a slack bus")
    }

    /// Indices of OLTC branches in branch order.
    pub fn oltc_branches(&self) -> Vec<usize> {
        self.branches
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BranchKind::OltcTransformer)
            .map(|(i, _)| i)
            .collect()
    }

    /// `(region, bus index)` for each monitored bus.
    pub fn monitored_buses(&self) -> Vec<(Region, usize)> {
        self.monitored
            .iter()
            .map(|id| {
                let i = self.bus_index(id).expect("validated monitored bus");
                (self.buses[i].region, i)
            })
            .collect()
    }

    /// Feature count: |V| and angle per bus, P and Q at the from-end of
    /// every branch.
    pub fn feature_dim(&self) -> usize {
        2 * self.buses.len() + 2 * self.branches.len()
    }

    /// Feature names in snapshot order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_dim());
        names.extend(self.buses.iter().map(|b| format!("vm:{}", b.id)));
        names.extend(self.buses.iter().map(|b| format!("va:{}", b.id)));
        names.extend(self.branches.iter().map(|b| format!("p:{}", b.id)));
        names.extend(self.branches.iter().map(|b| format!("q:{}", b.id)));
        names
    }

    /// True when every bus is reachable from the slack over in-service
    /// branches.
    pub fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let index: HashMap<&str, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.in_service) {
            let (f, t) = (index[br.from.as_str()], index[br.to.as_str()]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.slack_index()]);
        seen[self.slack_index()] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let invalid = |msg: String| Err(GridError::InvalidModel(msg));
        let slack_count = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack_count != 1 {
            return invalid(format!("expected exactly one slack bus, found {slack_count}"));
        }
        let mut ids = std::collections::HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id.as_str()) {
                return invalid(format!("duplicate bus id {}", b.id));
            }
        }
        let mut branch_ids = std::collections::HashSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id.as_str()) {
                return invalid(format!("duplicate branch id {}", br.id));
            }
            self.bus_index(&br.from)?;
            self.bus_index(&br.to)?;
            if !(br.x > 0.0) || !(br.r >= 0.0) {
                return invalid(format!("branch {} needs x > 0 and r >= 0", br.id));
            }
        }
        let mut gen_buses = std::collections::HashSet::new();
        for g in &self.generators {
            let i = self.bus_index(&g.bus)?;
            if !gen_buses.insert(i) {
                return invalid(format!("more than one generator at {}", g.bus));
            }
            if self.buses[i].kind == BusKind::Pq {
                return invalid(format!("generator at PQ bus {}", g.bus));
            }
            if !(g.q_max >= g.q_min) || !(g.v_set > 0.0) || !(g.p_max >= 0.0) {
                return invalid(format!("generator at {} has inconsistent limits", g.bus));
            }
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.kind != BusKind::Pq && !gen_buses.contains(&i) {
                return invalid(format!("{:?} bus {} has no generator", b.kind, b.id));
            }
        }
        for l in &self.loads {
            self.bus_index(&l.bus)?;
        }
        for br in self.branches.iter().filter(|b| b.kind == BranchKind::OltcTransformer) {
            let to = self.bus_index(&br.to)?;
            let loads_here = self.loads.iter().filter(|l| l.bus == br.to).count();
            if loads_here != 1 || self.buses[to].kind != BusKind::Pq {
                return invalid(format!("OLTC {} must feed exactly one load bus", br.id));
            }
            let feeders =
                self.branches.iter().filter(|o| o.kind == BranchKind::OltcTransformer && o.to == br.to).count();
            if feeders != 1 {
                return invalid(format!("load bus {} has {feeders} OLTC feeders", br.to));
            }
        }
        if self.monitored.is_empty() {
            return invalid("no monitored buses".into());
        }
        for m in &self.monitored {
            let i = self.bus_index(m)?;
            if self.buses[i].region == Region::North {
                return invalid(format!("monitored bus {m} is not in an alert region"));
            }
        }
        if !self.is_connected() {
            return invalid("network is not connected".into());
        }
        Ok(())
    }
}

pub const BUILTIN_GRID: &str = include_str!("../../data/grid12.json");
