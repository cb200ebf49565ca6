//! Surrogate physiology: ODE model, integrator, dependency graph and
//! training windows.

mod dataset;
mod model;
mod system;

pub use dataset::{
    make_dataset, Normalizer, Split, SplitSizes, TimeSeriesDataset, WindowRef, DEFAULT_STRIDE,
};
pub use model::*;
pub use system::{
    derive_graph, full_vector, jacobian_pattern, rates, simulate, step_ode, GraphTopology,
    OdeSystem, Rk4, SimGrid, Trajectory, VarDecl, VarKind, PROBE_STEP,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integrated state of the surrogate, indexed by the constants in this module.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysioState(pub Vec<f64>);

impl PhysioState {
    /// Unsettled resting values.
    pub fn nominal() -> Self {
        Self(PhysioModel::nominal_state())
    }

    /// Resting values after `seconds` of settling with no interventions.
    pub fn resting(seconds: f64) -> Result<Self> {
        let model = PhysioModel::new(PhysioParams::default(), Exposome::default());
        let traj = simulate(&model, &Self::nominal().0, 0.0, seconds, SimGrid {
            dt: 1e-3,
            output_interval: seconds,
        })?;
        Ok(Self(traj.final_state(N_STATES)))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        state_index(name).map(|i| self.0[i])
    }

    /// Overrides named entries; unknown names are rejected.
    pub fn with_overrides(mut self, values: &BTreeMap<String, f64>) -> Result<Self> {
        for (name, &v) in values {
            let i = state_index(name)
                .ok_or_else(|| Error::Config(format!("unknown state variable `{name}`")))?;
            self.0[i] = v;
        }
        Ok(self)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        VARIABLE_NAMES[..N_STATES]
            .iter()
            .zip(&self.0)
            .map(|(n, &v)| ((*n).into(), v))
            .collect()
    }
}

pub fn state_index(name: &str) -> Option<usize> {
    VARIABLE_NAMES[..N_STATES].iter().position(|n| *n == name)
}

pub fn variable_index(name: &str) -> Option<usize> {
    VARIABLE_NAMES.iter().position(|n| *n == name)
}

/// A what-if run: optional state overrides on the settled resting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub exposome: Exposome,
    pub horizon_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    1e-3
}

/// Seconds of intervention-free settling before a scenario starts.
pub const SETTLE_SECONDS: f64 = 60.0;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.exposome.validate().map_err(Error::Config)?;
        if !(self.horizon_s > 0.0) {
            return Err(Error::Config("horizon_s must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::Config("dt must lie in (0, 0.01]".into()));
        }
        Ok(())
    }

    pub fn initial(&self) -> Result<PhysioState> {
        let rest = PhysioState::resting(SETTLE_SECONDS)?;
        match &self.initial_state {
            Some(o) => rest.with_overrides(o),
            None => Ok(rest),
        }
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.validate()?;
        simulate_scenario(&self.initial()?, &self.exposome, self.horizon_s, self.dt)
    }
}

/// Simulates the default-parameter surrogate, sampled every 10 ms.
pub fn simulate_scenario(
    initial: &PhysioState,
    exposome: &Exposome,
    horizon_s: f64,
    dt: f64,
) -> Result<Trajectory> {
    exposome.validate().map_err(Error::Config)?;
    let model = PhysioModel::new(PhysioParams::default(), exposome.clone());
    simulate(&model, &initial.0, 0.0, horizon_s, SimGrid {
        dt,
        output_interval: 1e-2,
    })
}

/// Mixed lifestyle/treatment scenarios used to build the training corpus.
pub fn training_exposomes() -> Vec<Exposome> {
    let base = Exposome::default();
    alloc::vec![
        base.clone(),
        Exposome { ace_inhibitor_dose: 5.0, ..base.clone() },
        Exposome { infection_onset: Some(20.0), ..base.clone() },
        Exposome { exercise_level: 0.6, calorie_intake: 1600.0, ..base.clone() },
        Exposome { heparin_dose: 5000.0, infection_onset: Some(10.0), ..base.clone() },
        Exposome { ace_inhibitor_dose: 10.0, calorie_intake: 2800.0, ..base.clone() },
        Exposome { exercise_level: 0.3, infection_onset: Some(40.0), ..base },
    ]
}
