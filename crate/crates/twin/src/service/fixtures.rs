//! Built-in case-study scenarios.

use std::collections::BTreeMap;

use twin_core::physio::{Exposome, Scenario};

use super::store::ScenarioEntry;

/// Hypertensive, diabetic patient: raised arterial volume, RAS activity and
/// glucose with blunted insulin.
fn patient() -> BTreeMap<String, f64> {
    [("v_sa", 700.0), ("renin", 1.4), ("ang2", 1.5), ("glucose", 180.0), ("insulin", 6.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub const CASE_STUDY_1: &str = "case-study-1";
pub const CASE_STUDY_2: &str = "case-study-2";

pub fn fixtures() -> Vec<ScenarioEntry> {
    let lifestyle = Exposome { exercise_level: 0.3, calorie_intake: 1600.0, ..Exposome::default() };
    vec![
        ScenarioEntry {
            id: CASE_STUDY_1.into(),
            name: "Hypertensive diabetic patient".into(),
            description: "Lifestyle plan (moderate exercise, 1600 kcal/day); add Benazepril, e.g. ace_inhibitor_dose 5 mg/day, as an intervention.".into(),
            scenario: Scenario {
                initial_state: Some(patient()),
                exposome: lifestyle.clone(),
                horizon_s: 20.0,
                dt: 1e-3,
                seed: 1,
            },
            fixture: true,
        },
        ScenarioEntry {
            id: CASE_STUDY_2.into(),
            name: "Same patient with viral infection".into(),
            description: "Infection from t = 0, untreated; compare with Benazepril 5 mg/day plus heparin 5000 U/ml.".into(),
            scenario: Scenario {
                initial_state: Some(patient()),
                exposome: Exposome { infection_onset: Some(0.0), ..lifestyle },
                horizon_s: 20.0,
                dt: 1e-3,
                seed: 2,
            },
            fixture: true,
        },
    ]
}
