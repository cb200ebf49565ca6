//! Persistent run registry: an append-only JSONL index plus a
//! content-addressed object store for artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use twin_core::physio::Scenario;

use crate::error::{Result, TwinError};
use crate::formats::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    TrainGnn,
    Forecast,
    TrainGan,
    Sample,
    Crosstalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl RunStatus {
    fn rank(self) -> u8 {
        match self {
            RunStatus::Pending => 0,
            RunStatus::Running => 1,
            RunStatus::Done | RunStatus::Failed => 2,
        }
    }

    /// Only forward moves are allowed; done and failed are terminal.
    pub fn can_become(self, next: RunStatus) -> bool {
        next.rank() > self.rank()
    }

    pub fn is_terminal(self) -> bool {
        self.rank() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub sha256: String,
    pub bytes: u64,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub kind: RunKind,
    /// Everything needed to re-execute the run.
    pub config: Value,
    pub status: RunStatus,
    #[serde(default)]
    pub artifacts: BTreeMap<String, ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub fixture: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum IndexLine {
    Run { record: RunRecord },
    Scenario { entry: ScenarioEntry },
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Registry state. Every mutation is appended and flushed to the index
/// before the in-memory view changes.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    index: File,
    runs: BTreeMap<String, RunRecord>,
    scenarios: BTreeMap<String, ScenarioEntry>,
    next_run: u64,
}

pub const INDEX_FILE: &str = "index.jsonl";

impl Store {
    /// Opens (or creates) the store under `dir`, replaying the index. Any
    /// unreadable line or backwards status change refuses to start.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("objects")).map_err(|e| TwinError::io(dir, e))?;
        let path = dir.join(INDEX_FILE);
        let mut runs: BTreeMap<String, RunRecord> = BTreeMap::new();
        let mut scenarios = BTreeMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| TwinError::io(&path, e))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| TwinError::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |why: String| corrupted(&path, n + 1, &why);
                match serde_json::from_str::<IndexLine>(&line).map_err(|e| corrupt(e.to_string()))? {
                    IndexLine::Run { record } => {
                        if let Some(prev) = runs.get(&record.id) {
                            if prev.status != record.status && !prev.status.can_become(record.status) {
                                return Err(corrupt(format!(
                                    "run {} moves from {:?} back to {:?}",
                                    record.id, prev.status, record.status
                                )));
                            }
                        }
                        runs.insert(record.id.clone(), record);
                    }
                    IndexLine::Scenario { entry } => {
                        scenarios.insert(entry.id.clone(), entry);
                    }
                }
            }
        }
        let index = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| TwinError::io(&path, e))?;
        let next_run = runs.keys().filter_map(|id| id.strip_prefix("run-")?.parse::<u64>().ok()).max().map_or(1, |m| m + 1);
        Ok(Self { dir: dir.to_path_buf(), index, runs, scenarios, next_run })
    }

    fn append(&mut self, line: &IndexLine) -> Result<()> {
        let mut bytes = serde_json::to_vec(line).expect("index lines serialise");
        bytes.push(b'\n');
        let path = self.dir.join(INDEX_FILE);
        self.index.write_all(&bytes).map_err(|e| TwinError::io(&path, e))?;
        self.index.sync_data().map_err(|e| TwinError::io(&path, e))
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.values()
    }

    pub fn run(&self, id: &str) -> Option<&RunRecord> {
        self.runs.get(id)
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &ScenarioEntry> {
        self.scenarios.values()
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioEntry> {
        self.scenarios.get(id)
    }

    pub fn add_scenario(&mut self, entry: ScenarioEntry) -> Result<()> {
        self.append(&IndexLine::Scenario { entry: entry.clone() })?;
        self.scenarios.insert(entry.id.clone(), entry);
        Ok(())
    }

    /// Registers a pending run with a fresh sequential id.
    pub fn create_run(&mut self, kind: RunKind, config: Value) -> Result<RunRecord> {
        let t = now_ms();
        let record = RunRecord {
            id: format!("run-{:06}", self.next_run),
            kind,
            config,
            status: RunStatus::Pending,
            artifacts: BTreeMap::new(),
            error: None,
            created_ms: t,
            updated_ms: t,
        };
        self.append(&IndexLine::Run { record: record.clone() })?;
        self.next_run += 1;
        self.runs.insert(record.id.clone(), record.clone());
        Ok(record)
    }

    /// Moves a run forward, optionally attaching artifacts or an error.
    pub fn transition(
        &mut self,
        id: &str,
        status: RunStatus,
        artifacts: BTreeMap<String, ArtifactRef>,
        error: Option<String>,
    ) -> Result<RunRecord> {
        let current = self.runs.get(id).ok_or_else(|| TwinError::Runtime(format!("unknown run {id}")))?;
        if !current.status.can_become(status) {
            return Err(TwinError::Runtime(format!("run {id} cannot move from {:?} to {status:?}", current.status)));
        }
        if status == RunStatus::Done && artifacts.is_empty() && current.artifacts.is_empty() {
            return Err(TwinError::Runtime(format!("run {id} cannot finish without artifacts")));
        }
        let mut next = current.clone();
        next.status = status;
        next.artifacts.extend(artifacts);
        next.error = error;
        next.updated_ms = now_ms().max(current.updated_ms);
        self.append(&IndexLine::Run { record: next.clone() })?;
        self.runs.insert(id.to_string(), next.clone());
        Ok(next)
    }

    pub fn objects_dir(&self) -> PathBuf {
        self.dir.join("objects")
    }
}

fn corrupted(path: &Path, line: usize, why: &str) -> TwinError {
    TwinError::Runtime(format!(
        "run index {} is corrupted at line {line}: {why}\n\
         To recover, stop the service and either restore the file from a backup or \
         keep only the lines before {line} (for example `head -n {} {} > index.fixed && mv index.fixed {}`); \
         artifacts under objects/ are unaffected.",
        path.display(),
        line - 1,
        path.display(),
        path.display()
    ))
}

/// Write-once, content-addressed blobs under `objects/<aa>/<sha256>`.
#[derive(Debug, Clone)]
pub struct ObjectStore {
    root: PathBuf,
}

impl ObjectStore {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    fn path(&self, sha: &str) -> PathBuf {
        self.root.join(&sha[..2]).join(sha)
    }

    pub fn put(&self, bytes: &[u8], media_type: &str) -> Result<ArtifactRef> {
        let sha = sha256_hex(bytes);
        let path = self.path(&sha);
        if !path.exists() {
            let dir = path.parent().expect("object paths have a parent");
            fs::create_dir_all(dir).map_err(|e| TwinError::io(dir, e))?;
            let tmp = dir.join(format!(".{sha}.{}.tmp", std::process::id()));
            let mut f = File::create(&tmp).map_err(|e| TwinError::io(&tmp, e))?;
            f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| TwinError::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| TwinError::io(&path, e))?;
        }
        Ok(ArtifactRef { sha256: sha, bytes: bytes.len() as u64, media_type: media_type.into() })
    }

    /// Reads a blob and verifies its digest.
    pub fn get(&self, r: &ArtifactRef) -> Result<Vec<u8>> {
        let path = self.path(&r.sha256);
        let bytes = fs::read(&path).map_err(|e| TwinError::io(&path, e))?;
        if sha256_hex(&bytes) != r.sha256 {
            return Err(TwinError::Runtime(format!("object {} fails its checksum", r.sha256)));
        }
        Ok(bytes)
    }
}
