//! Run manifest: full configuration, seed, input and output digests, and a
//! diagnostics summary. Contains nothing time-dependent, so reruns with the
//! same inputs produce identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_json, write_json};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: Value,
    /// Input name → sha256 of its bytes.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name → sha256 of its bytes.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
    #[serde(default)]
    pub diagnostics: Value,
}

impl RunManifest {
    pub fn new(kind: &str, seed: u64, config: Value) -> Self {
        Self {
            kind: kind.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            diagnostics: Value::Null,
        }
    }
}

pub fn save_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    write_json(path, m)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    read_json(path)
}
