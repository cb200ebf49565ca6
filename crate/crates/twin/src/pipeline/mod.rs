//! Pipelines composed from the core: each returns in-memory results that the
//! CLI and the service write out.

pub mod gnn;
pub mod omics;
pub mod phase;

use twin_core::physio::{Scenario, Trajectory};

use crate::error::Result;

pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    Ok(scenario.run()?)
}
