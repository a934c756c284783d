//! Dataset generation and the on-disk format.
//!
//! A dataset directory holds `header.json` plus, per split, three files:
//! `<split>.features.f32` (little-endian f32, row-major
//! `[case][time][feature]`, NaN after a collapse), `<split>.labels.u8`
//! (`[case][time]` class indices) and `<split>.cases.json` (per-case
//! metadata). Optional per-case CSVs go under `cases/`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::labels::{classify_end_state, label_pair, CaseKind, LabeledCase, StabilityClass, NUM_CLASSES};
use super::oc::{check_feasibility, sample_operating_condition, DEFAULT_LOAD_SPREAD};
use super::ScenarioError;
use crate::exec::Exec;
use crate::grid::{
    apply_contingency, simulate_case, BranchKind, Contingency, ContingencySchedule, GridModel, SimConfig,
};
use crate::rng::{derive_seed, substream, Domain, Rng};

pub const DATASET_FORMAT: &str = "voltpred-dataset/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub n1: usize,
    pub n11: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub train: SplitCounts,
    pub val: SplitCounts,
    pub test: SplitCounts,
    /// Second of the first contingency.
    pub first_time: u32,
    /// Delay range of the second contingency, inclusive, in seconds.
    pub delta_min: u32,
    pub delta_max: u32,
    pub load_spread: f64,
    /// Candidates for the first contingency.
    pub major_set: Vec<Contingency>,
    /// Feasibility attempts per case before generation fails.
    pub max_attempts: usize,
    pub sim: SimConfig,
    /// Also write one CSV per case under `cases/`.
    pub case_csv: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            train: SplitCounts { n1: 2000, n11: 4000 },
            val: SplitCounts { n1: 250, n11: 500 },
            test: SplitCounts { n1: 500, n11: 500 },
            first_time: 66,
            delta_min: 10,
            delta_max: 30,
            load_spread: DEFAULT_LOAD_SPREAD,
            major_set: vec![
                Contingency::Branch("B3-B5a".into()),
                Contingency::Branch("B3-B5b".into()),
                Contingency::Branch("B4-B6a".into()),
                Contingency::Branch("B4-B6b".into()),
                Contingency::Generator("B8".into()),
            ],
            max_attempts: 100,
            sim: SimConfig::default(),
            case_csv: false,
        }
    }
}

impl GenConfig {
    pub fn counts(&self, split: SplitName) -> SplitCounts {
        match split {
            SplitName::Train => self.train,
            SplitName::Val => self.val,
            SplitName::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.into()));
        if self.train.n1 + self.train.n11 == 0 {
            return bad("training split is empty");
        }
        if self.delta_min == 0 || self.delta_min > self.delta_max {
            return bad("delta range must satisfy 0 < min <= max");
        }
        if self.first_time + self.delta_max > self.sim.horizon {
            return bad("second contingency falls after the horizon");
        }
        if self.major_set.is_empty() {
            return bad("major contingency set is empty");
        }
        if !(0.0..1.0).contains(&self.load_spread) {
            return bad("load spread must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    fn domain(self) -> Domain {
        match self {
            SplitName::Train => Domain::SplitTrain,
            SplitName::Val => Domain::SplitVal,
            SplitName::Test => Domain::SplitTest,
        }
    }
}

/// Draws `(first, t2, second)`: the first contingency from the major set,
/// the second among in-service lines whose loss keeps the grid connected.
pub fn sample_schedule(
    model: &GridModel,
    rng: &mut Rng,
    cfg: &GenConfig,
) -> Result<(Contingency, u32, Contingency), ScenarioError> {
    let first = cfg.major_set[rng.random_range(0..cfg.major_set.len())].clone();
    let after = apply_contingency(model, &first)?;
    let candidates: Vec<&str> = after
        .branches
        .iter()
        .filter(|b| b.in_service && b.kind == BranchKind::Line)
        .filter(|b| apply_contingency(&after, &Contingency::Branch(b.id.clone())).is_ok())
        .map(|b| b.id.as_str())
        .collect();
    if candidates.is_empty() {
        return Err(ScenarioError::InvalidConfig(format!("no admissible second contingency after {first}")));
    }
    let second = Contingency::Branch(candidates[rng.random_range(0..candidates.len())].to_string());
    let t2 = cfg.first_time + rng.random_range(cfg.delta_min..=cfg.delta_max);
    Ok((first, t2, second))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    /// Position within the split.
    pub index: usize,
    pub kind: CaseKind,
    /// Operating-condition index shared by the two runs of a pair.
    pub pair: usize,
    /// Split index of the paired case, when it was kept.
    pub link: Option<usize>,
    pub t_end: u32,
    pub collapsed: bool,
    pub collapse_time: Option<u32>,
    pub schedule: ContingencySchedule,
    pub end_class: StabilityClass,
    /// Feasibility attempts before the operating condition was accepted.
    pub attempts: usize,
    pub load_factors: Vec<f64>,
}

impl CaseMeta {
    pub fn first_time(&self) -> Option<u32> {
        self.schedule.first().map(|e| e.time)
    }

    pub fn second_time(&self) -> Option<u32> {
        self.schedule.second().map(|e| e.time)
    }
}

/// One split held in memory in its on-disk layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub name: SplitName,
    pub dim: usize,
    pub horizon: u32,
    pub cases: Vec<CaseMeta>,
    pub features: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Split {
    pub fn empty(name: SplitName, dim: usize, horizon: u32) -> Self {
        Self { name, dim, horizon, cases: Vec::new(), features: Vec::new(), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    fn push(&mut self, case: &LabeledCase, meta: CaseMeta) {
        let traj = &case.trajectory;
        assert_eq!(traj.dim, self.dim);
        let cells = self.horizon as usize * self.dim;
        let start = self.features.len();
        self.features.extend(traj.features.iter().map(|&x| x as f32));
        self.features.resize(start + cells, f32::NAN);
        self.labels.extend(case.labels.iter().map(|&c| c as u8));
        self.cases.push(meta);
    }

    /// Snapshot of `case` at second `t` (1-based, `t <= t_end`).
    pub fn snapshot(&self, case: usize, t: u32) -> &[f32] {
        debug_assert!(t >= 1 && t <= self.cases[case].t_end);
        let start = (case * self.horizon as usize + t as usize - 1) * self.dim;
        &self.features[start..start + self.dim]
    }

    pub fn label(&self, case: usize, t: u32) -> StabilityClass {
        let c = self.labels[case * self.horizon as usize + t as usize - 1];
        StabilityClass::from_index(c as usize).expect("valid label byte")
    }

    pub fn indices_of(&self, kind: CaseKind) -> Vec<usize> {
        self.cases.iter().filter(|c| c.kind == kind).map(|c| c.index).collect()
    }

    /// A new split holding the given cases in the given order. Links to
    /// cases that are not kept are dropped.
    pub fn subset(&self, indices: &[usize]) -> Split {
        let mut out = Split::empty(self.name, self.dim, self.horizon);
        let cells = self.horizon as usize * self.dim;
        let h = self.horizon as usize;
        let remap: std::collections::HashMap<usize, usize> =
            indices.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        for (new, &old) in indices.iter().enumerate() {
            let mut meta = self.cases[old].clone();
            meta.index = new;
            meta.link = meta.link.and_then(|l| remap.get(&l).copied());
            out.cases.push(meta);
            out.features.extend_from_slice(&self.features[old * cells..(old + 1) * cells]);
            out.labels.extend_from_slice(&self.labels[old * h..(old + 1) * h]);
        }
        out
    }

    /// Label counts per class at second `t`.
    pub fn histogram_at(&self, t: u32) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for i in 0..self.len() {
            h[self.label(i, t).index()] += 1;
        }
        h
    }

    /// Per-case CSV: `t`, every feature, and the class name.
    pub fn case_csv(&self, case: usize, feature_names: &[String]) -> String {
        let mut s = String::from("t");
        for n in feature_names {
            s.push(',');
            s.push_str(n);
        }
        s.push_str(",label\n");
        for t in 1..=self.cases[case].t_end {
            let _ = write!(s, "{t}");
            for x in self.snapshot(case, t) {
                let _ = write!(s, ",{x}");
            }
            let _ = writeln!(s, ",{}", self.label(case, t).name());
        }
        s
    }

    /// Parses a per-case CSV back into a one-case split. The label column is
    /// optional; missing labels read as stable.
    pub fn from_case_csv(text: &str, horizon: u32) -> Result<Split, ScenarioError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| ScenarioError::Format("empty case file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") {
            return Err(ScenarioError::Format("first column must be t".into()));
        }
        let has_label = cols.last() == Some(&"label");
        let dim = cols.len() - 1 - usize::from(has_label);
        let mut split = Split::empty(SplitName::Test, dim, horizon);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(ScenarioError::Format(format!("row {} has {} fields", row + 1, fields.len())));
            }
            let t: u32 = fields[0].parse().map_err(|_| ScenarioError::Format(format!("bad t on row {}", row + 1)))?;
            if t as usize != row + 1 {
                return Err(ScenarioError::Format(format!("rows must be consecutive from t=1, got t={t}")));
            }
            for f in &fields[1..=dim] {
                let x: f32 = f.parse().map_err(|_| ScenarioError::Format(format!("bad number {f:?}")))?;
                feats.push(x);
            }
            let class = if has_label {
                StabilityClass::from_name(fields[dim + 1])
                    .ok_or_else(|| ScenarioError::Format(format!("bad label {:?}", fields[dim + 1])))?
            } else {
                StabilityClass::Stable
            };
            labels.push(class as u8);
        }
        let t_end = labels.len() as u32;
        if t_end == 0 || t_end > horizon {
            return Err(ScenarioError::Format(format!("case has {t_end} rows, horizon is {horizon}")));
        }
        let last = *labels.last().unwrap();
        feats.resize(horizon as usize * dim, f32::NAN);
        labels.resize(horizon as usize, last);
        split.features = feats;
        split.labels = labels;
        split.cases.push(CaseMeta {
            index: 0,
            kind: CaseKind::N1,
            pair: 0,
            link: None,
            t_end,
            collapsed: t_end < horizon,
            collapse_time: None,
            schedule: ContingencySchedule::none(),
            end_class: StabilityClass::from_index(last as usize).unwrap(),
            attempts: 0,
            load_factors: Vec::new(),
        });
        Ok(split)
    }
}

struct PairOut {
    n1: Option<(LabeledCase, CaseMeta)>,
    n11: Option<(LabeledCase, CaseMeta)>,
}

fn generate_pair(
    model: &GridModel,
    cfg: &GenConfig,
    case_seed: u64,
    pair: usize,
    keep: (bool, bool),
) -> Result<PairOut, ScenarioError> {
    let mut attempts = 0;
    let oc = loop {
        if attempts == cfg.max_attempts {
            return Err(ScenarioError::RetryBudgetExhausted { case: pair, attempts });
        }
        let mut rng = substream(case_seed, Domain::OperatingCondition, attempts as u64);
        let oc = sample_operating_condition(model, &mut rng, cfg.load_spread);
        attempts += 1;
        if check_feasibility(model, &oc, &cfg.sim) {
            break oc;
        }
    };
    let mut rng = substream(case_seed, Domain::Schedule, 0);
    let (first, t2, second) = sample_schedule(model, &mut rng, cfg)?;
    let s1 = ContingencySchedule::single(cfg.first_time, first.clone());
    let s11 = ContingencySchedule::double(cfg.first_time, first, t2, second);
    let n1 = simulate_case(model, &oc, &s1, &cfg.sim)?;
    let n11 = simulate_case(model, &oc, &s11, &cfg.sim)?;
    let (a, b) = label_pair(n1, n11, t2, model, cfg.sim.horizon)?;
    let meta = |c: &LabeledCase, kind| CaseMeta {
        index: 0,
        kind,
        pair,
        link: None,
        t_end: c.trajectory.t_end,
        collapsed: c.trajectory.collapsed,
        collapse_time: c.trajectory.collapse_time,
        schedule: c.trajectory.schedule.clone(),
        end_class: classify_end_state(&c.trajectory, model),
        attempts,
        load_factors: oc.load_factors.clone(),
    };
    let m1 = meta(&a, CaseKind::N1);
    let m11 = meta(&b, CaseKind::N11);
    Ok(PairOut { n1: keep.0.then_some((a, m1)), n11: keep.1.then_some((b, m11)) })
}

/// Generates one split. Pair `i` draws its randomness from
/// `(seed, split, i)` only, so any worker count gives the same split.
pub fn generate_split(
    model: &GridModel,
    cfg: &GenConfig,
    seed: u64,
    split: SplitName,
    exec: Exec,
) -> Result<Split, ScenarioError> {
    let counts = cfg.counts(split);
    let n_pairs = counts.n1.max(counts.n11);
    let results = exec.map_indexed(n_pairs, |i| {
        let case_seed = derive_seed(seed, split.domain(), i as u64);
        generate_pair(model, cfg, case_seed, i, (i < counts.n1, i < counts.n11))
    });
    let mut out = Split::empty(split, model.feature_dim(), cfg.sim.horizon);
    let mut n11_cases = Vec::with_capacity(counts.n11);
    let mut pending: Vec<(LabeledCase, CaseMeta)> = Vec::with_capacity(counts.n1);
    for r in results {
        let pair = r?;
        if let Some(x) = pair.n1 {
            pending.push(x);
        }
        if let Some(x) = pair.n11 {
            n11_cases.push(x);
        }
    }
    let n1_count = pending.len();
    for (i, (case, mut meta)) in pending.into_iter().enumerate() {
        meta.index = i;
        meta.link = (meta.pair < counts.n11).then_some(n1_count + meta.pair);
        out.push(&case, meta);
    }
    for (j, (case, mut meta)) in n11_cases.into_iter().enumerate() {
        meta.index = n1_count + j;
        meta.link = (meta.pair < counts.n1).then_some(meta.pair);
        out.push(&case, meta);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHeader {
    pub name: SplitName,
    pub n1: usize,
    pub n11: usize,
    pub features_file: String,
    pub labels_file: String,
    pub cases_file: String,
    /// Label counts per class at t = 180 (class order as `class_names`).
    pub histogram_t180: [usize; NUM_CLASSES],
    /// End-state class counts.
    pub end_histogram: [usize; NUM_CLASSES],
    pub infeasible_retries: usize,
    /// SHA-256 of the features file.
    pub features_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub generator_version: String,
    pub grid_name: String,
    pub grid_version: String,
    pub grid_sha256: String,
    pub seed: u64,
    pub config: GenConfig,
    pub feature_dim: usize,
    pub feature_names: Vec<String>,
    /// Feature layout conventions.
    pub feature_notes: String,
    pub horizon: u32,
    pub class_names: Vec<String>,
    pub pairing: String,
    pub splits: Vec<SplitHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

impl Dataset {
    pub fn split(&self, name: SplitName) -> &Split {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.header.feature_dim
    }

    fn split_header(split: &Split) -> SplitHeader {
        let name = split.name.as_str();
        let mut end_histogram = [0; NUM_CLASSES];
        for c in &split.cases {
            end_histogram[c.end_class.index()] += 1;
        }
        let t = 180.min(split.horizon);
        SplitHeader {
            name: split.name,
            n1: split.indices_of(CaseKind::N1).len(),
            n11: split.indices_of(CaseKind::N11).len(),
            features_file: format!("{name}.features.f32"),
            labels_file: format!("{name}.labels.u8"),
            cases_file: format!("{name}.cases.json"),
            histogram_t180: if split.is_empty() { [0; NUM_CLASSES] } else { split.histogram_at(t) },
            end_histogram,
            infeasible_retries: split
                .cases
                .iter()
                .filter(|c| c.kind == CaseKind::N11 || c.link.is_none())
                .map(|c| c.attempts - 1)
                .sum(),
            features_sha256: sha256_hex(&f32_bytes(&split.features)),
        }
    }

    pub fn assemble(model: &GridModel, cfg: &GenConfig, seed: u64, train: Split, val: Split, test: Split) -> Self {
        let header = DatasetHeader {
            format: DATASET_FORMAT.into(),
            generator_version: env!("CARGO_PKG_VERSION").into(),
            grid_name: model.name.clone(),
            grid_version: model.version.clone(),
            grid_sha256: model.hash_hex(),
            seed,
            config: cfg.clone(),
            feature_dim: model.feature_dim(),
            feature_names: model.feature_names(),
            feature_notes: "vm pu and va rad per bus (angles relative to the slack), then P and Q in pu \
                            at the from-end of every branch (zero when out of service)"
                .into(),
            horizon: cfg.sim.horizon,
            class_names: StabilityClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            pairing: "each operating condition yields one N-1 and one N-1-1 run sharing the first \
                      contingency; N-1 cases precede N-1-1 cases within a split"
                .into(),
            splits: [&train, &val, &test].iter().map(|s| Self::split_header(s)).collect(),
        };
        Self { header, train, val, test }
    }

    pub fn write(&self, dir: &Path) -> Result<(), ScenarioError> {
        std::fs::create_dir_all(dir)?;
        let header = serde_json::to_string_pretty(&self.header).map_err(|e| ScenarioError::Format(e.to_string()))?;
        std::fs::write(dir.join("header.json"), header + "\n")?;
        for (split, sh) in [&self.train, &self.val, &self.test].into_iter().zip(&self.header.splits) {
            std::fs::write(dir.join(&sh.features_file), f32_bytes(&split.features))?;
            std::fs::write(dir.join(&sh.labels_file), &split.labels)?;
            let cases = serde_json::to_string_pretty(&split.cases).map_err(|e| ScenarioError::Format(e.to_string()))?;
            std::fs::write(dir.join(&sh.cases_file), cases + "\n")?;
        }
        if self.header.config.case_csv {
            let cdir = dir.join("cases");
            std::fs::create_dir_all(&cdir)?;
            for split in [&self.train, &self.val, &self.test] {
                for i in 0..split.len() {
                    let name = format!("{}_{:05}.csv", split.name.as_str(), i);
                    std::fs::write(cdir.join(name), split.case_csv(i, &self.header.feature_names))?;
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(dir.join("header.json"))
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", dir.join("header.json").display())))?;
        let header: DatasetHeader = serde_json::from_str(&text).map_err(|e| ScenarioError::Format(e.to_string()))?;
        if header.format != DATASET_FORMAT {
            return Err(ScenarioError::Format(format!("unsupported format {}", header.format)));
        }
        let mut splits = Vec::new();
        for sh in &header.splits {
            let bytes = std::fs::read(dir.join(&sh.features_file))?;
            if bytes.len() % 4 != 0 {
                return Err(ScenarioError::Format(format!("{} is not a whole number of f32", sh.features_file)));
            }
            if sha256_hex(&bytes) != sh.features_sha256 {
                return Err(ScenarioError::Format(format!("{} checksum mismatch", sh.features_file)));
            }
            let features: Vec<f32> =
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let labels = std::fs::read(dir.join(&sh.labels_file))?;
            let cases: Vec<CaseMeta> = serde_json::from_str(&std::fs::read_to_string(dir.join(&sh.cases_file))?)
                .map_err(|e| ScenarioError::Format(e.to_string()))?;
            let n = cases.len();
            let h = header.horizon as usize;
            if features.len() != n * h * header.feature_dim || labels.len() != n * h {
                return Err(ScenarioError::Format(format!("split {} has inconsistent sizes", sh.name.as_str())));
            }
            if labels.iter().any(|&l| l as usize >= NUM_CLASSES) {
                return Err(ScenarioError::Format("label byte out of range".into()));
            }
            splits.push(Split {
                name: sh.name,
                dim: header.feature_dim,
                horizon: header.horizon,
                cases,
                features,
                labels,
            });
        }
        let mut it = splits.into_iter();
        let (train, val, test) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(ScenarioError::Format("expected train, val and test splits".into())),
        };
        Ok(Self { header, train, val, test })
    }
}

/// Generates all three splits and assembles the dataset.
pub fn generate_dataset(model: &GridModel, cfg: &GenConfig, seed: u64, exec: Exec) -> Result<Dataset, ScenarioError> {
    cfg.validate()?;
    let train = generate_split(model, cfg, seed, SplitName::Train, exec)?;
    let val = generate_split(model, cfg, seed, SplitName::Val, exec)?;
    let test = generate_split(model, cfg, seed, SplitName::Test, exec)?;
    Ok(Dataset::assemble(model, cfg, seed, train, val, test))
}
