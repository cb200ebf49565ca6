//! Topology JSON: `{"nodes": [...], "edges": [[sender, receiver], ...]}`.

use std::path::Path;

use twin_core::physio::GraphTopology;

use super::{json_bytes, read_bytes, write_bytes};
use crate::error::{Result, TwinError};

pub fn topology_to_bytes(g: &GraphTopology) -> Vec<u8> {
    json_bytes(g)
}

/// Parses and re-validates (bounds, self-loops, canonical edge order).
pub fn topology_from_bytes(bytes: &[u8]) -> Result<GraphTopology, String> {
    let raw: GraphTopology = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    GraphTopology::new(raw.nodes, raw.edges).map_err(|e| e.to_string())
}

pub fn save_topology(path: &Path, g: &GraphTopology) -> Result<()> {
    write_bytes(path, &topology_to_bytes(g))
}

pub fn load_topology(path: &Path) -> Result<GraphTopology> {
    topology_from_bytes(&read_bytes(path)?).map_err(|e| TwinError::parse(path, e))
}
