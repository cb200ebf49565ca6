//! Trajectory CSV: `time_s` followed by one column per variable.

use std::path::Path;

use twin_core::physio::Trajectory;

use super::{fmt_f64, parse_f64, read_bytes, write_bytes};
use crate::error::{Result, TwinError};

pub fn trajectory_to_bytes(t: &Trajectory) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("time_s").chain(t.names.iter().map(String::as_str)).collect();
    w.write_record(&header).expect("write to memory");
    for (i, time) in t.time.iter().enumerate() {
        let row = std::iter::once(fmt_f64(*time)).chain(t.row(i).iter().map(|&v| fmt_f64(v)));
        w.write_record(row).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn trajectory_from_bytes(bytes: &[u8]) -> Result<Trajectory, String> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0) != Some("time_s") {
        return Err("first column must be `time_s`".into());
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err("no variable columns".into());
    }
    let mut time = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != names.len() + 1 {
            return Err(format!("row {}: expected {} fields, got {}", line + 1, names.len() + 1, rec.len()));
        }
        for (j, field) in rec.iter().enumerate() {
            let v = parse_f64(field).ok_or_else(|| format!("row {}: `{field}` is not a number", line + 1))?;
            if j == 0 {
                time.push(v);
            } else {
                values.push(v);
            }
        }
    }
    Ok(Trajectory { names, time, values })
}

pub fn save_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_bytes(path, &trajectory_to_bytes(t))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    trajectory_from_bytes(&read_bytes(path)?).map_err(|e| TwinError::parse(path, e))
}
