//! On-disk formats. Every format has a byte-level codec (`*_to_bytes` /
//! `*_from_bytes`) so the service can content-address artifacts, plus path
//! helpers that attach the file name to errors.

pub mod bundle;
pub mod checkpoint;
pub mod manifest;
pub mod omics;
pub mod topology;
pub mod trajectory;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use twin_core::physio::Scenario;

use crate::error::{Result, TwinError};

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory JSON serialisation");
    out.push(b'\n');
    out
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| TwinError::io(path, e))
}

/// Writes `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| TwinError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| TwinError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| TwinError::parse(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &json_bytes(value))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and validates a scenario file.
pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let s: Scenario = read_json(path)?;
    s.validate().map_err(|e| TwinError::parse(path, e))?;
    Ok(s)
}

/// Shortest round-tripping decimal form (`NaN`, `inf`, `-inf` for
/// non-finite values, all readable by `str::parse::<f64>`).
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}
