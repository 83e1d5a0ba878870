//! Run manifests, config hashing and the drift comparison between runs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use hkelab::conditions::Verdict;

use crate::config::{ConditionKind, ExperimentConfig, PsiSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Spread above which a constant is not level-stable.
pub const BAND: f64 = 3.0;
/// Monotone spread above which drift is flagged.
pub const MONOTONE_DRIFT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inapplicable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub family: String,
    pub level: Option<u32>,
    pub size: Option<usize>,
    pub renormalized: bool,
    pub vertices: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub name: String,
    pub kind: ConditionKind,
    pub status: Status,
    pub verdict: Option<Verdict>,
    /// Non-finite values are stored as `null`.
    pub constants: BTreeMap<String, Option<f64>>,
    pub error: Option<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    /// Hash with the graph level, size and renormalization left out: runs
    /// sharing it can be compared.
    pub compat_hash: String,
    pub seed: Option<u64>,
    pub graph: GraphInfo,
    pub psi_beta: Option<f64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub steps: Vec<StepEntry>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let p = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    pub fn all_passed(&self) -> bool {
        self.steps.iter().all(|s| matches!(s.status, Status::Pass | Status::Inapplicable))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// The config as canonical JSON, output directory dropped and referenced
/// files replaced by the hash of their contents.
fn canonical(cfg: &ExperimentConfig) -> Result<Value> {
    let mut v = serde_json::to_value(cfg)?;
    let obj = v.as_object_mut().expect("config serializes to an object");
    obj.remove("output");
    if let Some(f) = &cfg.graph.file {
        obj["graph"]["file"] = Value::String(sha256_hex(&std::fs::read(f)?));
    }
    if let PsiSpec::Table { file } = &cfg.psi {
        obj["psi"]["file"] = Value::String(sha256_hex(&std::fs::read(file)?));
    }
    Ok(v)
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(&canonical(cfg)?)?.as_bytes()))
}

pub fn compat_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut v = canonical(cfg)?;
    if let Some(g) = v.get_mut("graph").and_then(Value::as_object_mut) {
        for k in ["level", "size", "renormalized"] {
            g.remove(k);
        }
    }
    Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
}

/// One constant of one step across the compared runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub step: String,
    pub constant: String,
    pub values: Vec<Option<f64>>,
    /// `last / first`.
    pub ratio: Option<f64>,
    /// `|last − first| / |first|`.
    pub relative_drift: Option<f64>,
    /// `max |v| / min |v|`.
    pub band: Option<f64>,
    pub monotone: bool,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub runs: Vec<String>,
    pub compat_hash: String,
    pub rows: Vec<DriftRow>,
}

impl DriftReport {
    pub fn row(&self, step: &str, constant: &str) -> Option<&DriftRow> {
        self.rows.iter().find(|r| r.step == step && r.constant == constant)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &DriftRow> {
        self.rows.iter().filter(|r| !r.flags.is_empty())
    }
}

fn drift_row(step: &str, constant: &str, values: Vec<Option<f64>>) -> DriftRow {
    let mut row = DriftRow {
        step: step.to_string(),
        constant: constant.to_string(),
        values: values.clone(),
        ratio: None,
        relative_drift: None,
        band: None,
        monotone: false,
        flags: Vec::new(),
    };
    let Some(vals) = values.into_iter().collect::<Option<Vec<f64>>>() else {
        if row.values.iter().any(Option::is_some) {
            row.flags.push("non-finite in some runs".into());
        }
        return row;
    };
    let (first, last) = (vals[0], vals[vals.len() - 1]);
    if first == last {
        row.ratio = Some(1.0);
        row.relative_drift = Some(0.0);
    } else if first != 0.0 {
        row.ratio = Some(last / first);
        row.relative_drift = Some((last - first).abs() / first.abs());
    }
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if hi == 0.0 {
        row.band = Some(1.0);
    } else if lo > 0.0 {
        row.band = Some(hi / lo);
    }
    let up = vals.windows(2).all(|w| w[1] > w[0]);
    let down = vals.windows(2).all(|w| w[1] < w[0]);
    row.monotone = vals.len() >= 2 && (up || down);
    let band = row.band.unwrap_or(f64::INFINITY);
    if band > BAND {
        row.flags.push(format!("outside the ×{BAND} band"));
    }
    if row.monotone && band > MONOTONE_DRIFT {
        row.flags.push("monotone drift".into());
    }
    row
}

/// Per-constant drift across runs of compatible configs, in the given order.
pub fn compare(manifests: &[(String, RunManifest)]) -> Result<DriftReport> {
    if manifests.len() < 2 {
        bail!("compare needs at least two manifests");
    }
    let hash = &manifests[0].1.compat_hash;
    for (name, m) in &manifests[1..] {
        if &m.compat_hash != hash {
            bail!(
                "{name} is not comparable with {}: the configs differ beyond graph level, size and renormalization",
                manifests[0].0
            );
        }
    }
    let mut rows = Vec::new();
    for step in &manifests[0].1.steps {
        let others: Option<Vec<&StepEntry>> = manifests
            .iter()
            .map(|(_, m)| m.steps.iter().find(|s| s.name == step.name))
            .collect();
        let Some(entries) = others else { continue };
        for constant in step.constants.keys() {
            if entries.iter().any(|e| !e.constants.contains_key(constant)) {
                continue;
            }
            let values = entries.iter().map(|e| e.constants[constant]).collect();
            rows.push(drift_row(&step.name, constant, values));
        }
    }
    Ok(DriftReport {
        runs: manifests.iter().map(|(n, _)| n.clone()).collect(),
        compat_hash: hash.clone(),
        rows,
    })
}
