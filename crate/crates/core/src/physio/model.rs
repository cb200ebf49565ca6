//! Surrogate circulation + renin-angiotensin model.
//!
//! State variables are volumes for the four time-varying-elastance chambers
//! and the systemic arteries, pressures for the five pulmonary segments and
//! the systemic veins (constant compliances), and concentrations or
//! activities for everything else. A two-dimensional limit-cycle oscillator
//! paces the heart, so the model has a genuine periodic orbit and no phase
//! wrap-around in the recorded series. Chamber and arterial pressures are
//! algebraic observables.
//!
//! Blood volume is a linear function of the state and every flow leaves one
//! compartment and enters another, so it is conserved exactly by RK4 up to
//! rounding.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::system::{OdeSystem, VarDecl, VarKind};

pub const PARAMS_VERSION: &str = "surrogate-v1";

macro_rules! indices {
    ($($name:ident = $i:expr),* $(,)?) => { $(pub const $name: usize = $i;)* };
}

indices! {
    PACER_X = 0, PACER_Y = 1,
    V_RA = 2, V_RV = 3, V_LA = 4, V_LV = 5,
    P_PA_PROX = 6, P_PA_DIST = 7, P_PA_SMALL = 8, P_PCAP = 9, P_PVEIN = 10,
    V_SA = 11, P_SV = 12,
    BARO = 13,
    RENIN = 14, ANG1 = 15, ANG2 = 16, ANG17 = 17, ACE = 18, ACE2 = 19,
    GLUCOSE = 20, INSULIN = 21, VIRAL = 22, INFLAM = 23,
    P_RA = 24, P_RV = 25, P_LA = 26, P_LV = 27, P_SA = 28,
}

pub const N_STATES: usize = 24;
pub const N_VARS: usize = 29;

pub const VARIABLE_NAMES: [&str; N_VARS] = [
    "pacer_x",
    "pacer_y",
    "v_ra",
    "v_rv",
    "v_la",
    "v_lv",
    "p_pa_prox",
    "p_pa_dist",
    "p_pa_small",
    "p_pcap",
    "p_pvein",
    "v_sa",
    "p_sv",
    "baroreflex",
    "renin",
    "ang1",
    "ang2",
    "ang1_7",
    "ace",
    "ace2",
    "glucose",
    "insulin",
    "viral_load",
    "inflammation",
    "p_ra",
    "p_rv",
    "p_la",
    "p_lv",
    "p_sa",
];

/// Variables whose value must stay non-negative during integration.
pub fn is_nonnegative(i: usize) -> bool {
    i != PACER_X && i != PACER_Y
}

/// Time-invariant lifestyle and treatment inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exposome {
    /// ACE inhibitor, mg/day.
    pub ace_inhibitor_dose: f64,
    /// Heparin, U/ml.
    pub heparin_dose: f64,
    /// kcal/day.
    pub calorie_intake: f64,
    /// 0 (sedentary) to 1.
    pub exercise_level: f64,
    /// Seconds from scenario start at which viral seeding begins.
    pub infection_onset: Option<f64>,
}

impl Default for Exposome {
    fn default() -> Self {
        Self {
            ace_inhibitor_dose: 0.0,
            heparin_dose: 0.0,
            calorie_intake: 2000.0,
            exercise_level: 0.0,
            infection_onset: None,
        }
    }
}

impl Exposome {
    pub fn validate(&self) -> Result<(), alloc::string::String> {
        let mut bad = Vec::new();
        if !(self.ace_inhibitor_dose >= 0.0) {
            bad.push("ace_inhibitor_dose must be ≥ 0");
        }
        if !(self.heparin_dose >= 0.0) {
            bad.push("heparin_dose must be ≥ 0");
        }
        if !(self.calorie_intake >= 0.0) {
            bad.push("calorie_intake must be ≥ 0");
        }
        if !(0.0..=1.0).contains(&self.exercise_level) {
            bad.push("exercise_level must lie in [0, 1]");
        }
        if matches!(self.infection_onset, Some(t) if !(t >= 0.0)) {
            bad.push("infection_onset must be ≥ 0");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad.join("; "))
        }
    }
}

/// Frozen parameter set. Pressures mmHg, volumes ml, time s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysioParams {
    pub heart_rate: f64,
    pub pacer_gain: f64,
    pub atrial_lead: f64,
    /// (Emin, Emax, V0) for RA, RV, LA, LV.
    pub chambers: [[f64; 3]; 4],
    pub ventricle_sharpness: i32,
    pub atrium_sharpness: i32,
    /// Tricuspid, pulmonary, mitral, aortic.
    pub valve_resistance: [f64; 4],
    pub valve_smoothing: f64,
    pub pulmonary_compliance: [f64; 5],
    /// Segment-to-segment, the last one draining into the left atrium.
    pub pulmonary_resistance: [f64; 5],
    pub arterial_compliance: f64,
    pub arterial_unstressed: f64,
    pub venous_compliance: f64,
    pub venous_unstressed: f64,
    pub systemic_resistance: f64,
    pub venous_resistance: f64,
    pub baro_setpoint: f64,
    pub baro_slope: f64,
    pub baro_tau: f64,
    pub baro_hr_gain: f64,
    pub baro_r_gain: f64,
    pub renin_tau: f64,
    pub renin_glucose_gain: f64,
    pub renin_baro_gain: f64,
    pub renin_feedback: f64,
    pub ang1_production: f64,
    pub ace_rate: f64,
    pub ang1_decay: f64,
    pub ace2_rate: f64,
    pub ang2_decay: f64,
    pub ang17_decay: f64,
    pub ace_tau: f64,
    pub ace_ic50: f64,
    pub ace2_tau: f64,
    pub viral_seed: f64,
    pub viral_growth: f64,
    pub viral_clearance: f64,
    pub viral_ace2_binding: f64,
    pub inflammation_tau: f64,
    pub heparin_half_effect: f64,
    pub ang2_resistance_gain: f64,
    pub viscosity_gain: f64,
    pub stiffening_gain: f64,
    pub glucose_inflow: f64,
    pub glucose_clearance: f64,
    pub insulin_action: f64,
    pub insulin_secretion: f64,
    pub insulin_decay: f64,
    pub exercise_hr_gain: f64,
    pub exercise_r_gain: f64,
    pub exercise_glucose_gain: f64,
}

impl Default for PhysioParams {
    fn default() -> Self {
        Self {
            heart_rate: 70.0,
            pacer_gain: 5.0,
            atrial_lead: 0.9,
            chambers: [
                [0.12, 0.25, 5.0],
                [0.05, 0.55, 10.0],
                [0.12, 0.30, 5.0],
                [0.07, 2.50, 10.0],
            ],
            ventricle_sharpness: 6,
            atrium_sharpness: 10,
            valve_resistance: [0.006, 0.006, 0.006, 0.008],
            valve_smoothing: 0.5,
            pulmonary_compliance: [1.0, 1.5, 2.0, 4.0, 8.0],
            pulmonary_resistance: [0.015, 0.02, 0.04, 0.02, 0.01],
            arterial_compliance: 1.5,
            arterial_unstressed: 500.0,
            venous_compliance: 100.0,
            venous_unstressed: 2800.0,
            systemic_resistance: 1.05,
            venous_resistance: 0.03,
            baro_setpoint: 95.0,
            baro_slope: 10.0,
            baro_tau: 2.0,
            baro_hr_gain: 0.6,
            baro_r_gain: 0.6,
            renin_tau: 5.0,
            renin_glucose_gain: 0.3,
            renin_baro_gain: 0.8,
            renin_feedback: 0.3,
            ang1_production: 0.5,
            ace_rate: 0.4,
            ang1_decay: 0.1,
            ace2_rate: 0.2,
            ang2_decay: 0.2,
            ang17_decay: 0.2,
            ace_tau: 5.0,
            ace_ic50: 2.0,
            ace2_tau: 20.0,
            viral_seed: 0.01,
            viral_growth: 0.2,
            viral_clearance: 0.05,
            viral_ace2_binding: 0.2,
            inflammation_tau: 10.0,
            heparin_half_effect: 2500.0,
            ang2_resistance_gain: 0.25,
            viscosity_gain: 0.15,
            stiffening_gain: 1.0,
            glucose_inflow: 2.0,
            glucose_clearance: 0.01,
            insulin_action: 0.001,
            insulin_secretion: 0.005,
            insulin_decay: 0.05,
            exercise_hr_gain: 0.3,
            exercise_r_gain: 0.2,
            exercise_glucose_gain: 0.5,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// One-way valve with a smooth opening: `(Δp + sqrt(Δp² + ε²)) / 2R`.
fn valve(dp: f64, r: f64, eps: f64) -> f64 {
    (dp + libm::sqrt(dp * dp + eps * eps)) / (2.0 * r)
}

/// The surrogate physiology bound to one exposome.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysioModel {
    pub params: PhysioParams,
    pub exposome: Exposome,
}

impl PhysioModel {
    pub fn new(params: PhysioParams, exposome: Exposome) -> Self {
        Self { params, exposome }
    }

    fn activation(&self, x: f64, y: f64) -> (f64, f64) {
        let p = &self.params;
        let ventricle = libm::pow((1.0 + x) / 2.0, p.ventricle_sharpness as f64);
        let (s, c) = libm::sincos(p.atrial_lead);
        let atrium = libm::pow((1.0 + x * c - y * s) / 2.0, p.atrium_sharpness as f64);
        (atrium, ventricle)
    }

    pub fn heart_rate(&self, baro: f64) -> f64 {
        let p = &self.params;
        p.heart_rate
            * (1.0 + p.exercise_hr_gain * self.exposome.exercise_level)
            * (1.0 + p.baro_hr_gain * (0.5 - baro))
    }

    fn systemic_resistance(&self, v: &[f64]) -> f64 {
        let p = &self.params;
        p.systemic_resistance
            * (1.0 - p.exercise_r_gain * self.exposome.exercise_level)
            * (1.0 + p.baro_r_gain * (0.5 - v[BARO]))
            * (1.0 + p.ang2_resistance_gain * (v[ANG2] - 1.0))
            * (1.0 + p.viscosity_gain * v[INFLAM])
    }

    fn arterial_compliance(&self, inflammation: f64) -> f64 {
        self.params.arterial_compliance / (1.0 + self.params.stiffening_gain * inflammation)
    }

    fn heparin_effect(&self) -> f64 {
        let h = self.exposome.heparin_dose;
        h / (h + self.params.heparin_half_effect)
    }

    /// Total blood volume (ml) held in the circulation.
    pub fn blood_volume(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let pulmonary: f64 = (0..5)
            .map(|k| p.pulmonary_compliance[k] * s[P_PA_PROX + k])
            .sum();
        s[V_RA] + s[V_RV] + s[V_LA] + s[V_LV]
            + pulmonary
            + s[V_SA]
            + p.venous_compliance * s[P_SV]
            + p.venous_unstressed
    }

    /// Nominal resting state before any settling.
    pub fn nominal_state() -> Vec<f64> {
        let mut s = alloc::vec![0.0; N_STATES];
        s[PACER_X] = 1.0;
        s[V_RA] = 60.0;
        s[V_RV] = 90.0;
        s[V_LA] = 60.0;
        s[V_LV] = 120.0;
        s[P_PA_PROX] = 15.0;
        s[P_PA_DIST] = 14.0;
        s[P_PA_SMALL] = 12.0;
        s[P_PCAP] = 10.0;
        s[P_PVEIN] = 8.0;
        s[V_SA] = 640.0;
        s[P_SV] = 5.0;
        s[BARO] = 0.5;
        for i in [RENIN, ANG1, ANG2, ANG17, ACE, ACE2] {
            s[i] = 1.0;
        }
        s[GLUCOSE] = 100.0;
        s[INSULIN] = 10.0;
        s
    }
}

const fn decl(name: &'static str, kind: VarKind, deps: &'static [usize]) -> VarDecl {
    VarDecl { name, kind, deps }
}

use VarKind::{Observable as O, State as S};

static DECLS: [VarDecl; N_VARS] = [
    decl(VARIABLE_NAMES[PACER_X], S, &[PACER_Y, BARO]),
    decl(VARIABLE_NAMES[PACER_Y], S, &[PACER_X, BARO]),
    decl(VARIABLE_NAMES[V_RA], S, &[P_SV, P_RA, P_RV]),
    decl(VARIABLE_NAMES[V_RV], S, &[P_RA, P_RV, P_PA_PROX]),
    decl(VARIABLE_NAMES[V_LA], S, &[P_PVEIN, P_LA, P_LV]),
    decl(VARIABLE_NAMES[V_LV], S, &[P_LA, P_LV, P_SA]),
    decl(VARIABLE_NAMES[P_PA_PROX], S, &[P_RV, P_PA_DIST]),
    decl(VARIABLE_NAMES[P_PA_DIST], S, &[P_PA_PROX, P_PA_SMALL]),
    decl(VARIABLE_NAMES[P_PA_SMALL], S, &[P_PA_DIST, P_PCAP]),
    decl(VARIABLE_NAMES[P_PCAP], S, &[P_PA_SMALL, P_PVEIN]),
    decl(VARIABLE_NAMES[P_PVEIN], S, &[P_PCAP, P_LA]),
    decl(VARIABLE_NAMES[V_SA], S, &[P_LV, P_SA, P_SV, BARO, ANG2, INFLAM]),
    decl(VARIABLE_NAMES[P_SV], S, &[P_SA, P_RA, BARO, ANG2, INFLAM]),
    decl(VARIABLE_NAMES[BARO], S, &[P_SA]),
    decl(VARIABLE_NAMES[RENIN], S, &[BARO, ANG2, GLUCOSE]),
    decl(VARIABLE_NAMES[ANG1], S, &[RENIN, ACE]),
    decl(VARIABLE_NAMES[ANG2], S, &[ANG1, ACE, ACE2]),
    decl(VARIABLE_NAMES[ANG17], S, &[ANG2, ACE2]),
    decl(VARIABLE_NAMES[ACE], S, &[]),
    decl(VARIABLE_NAMES[ACE2], S, &[VIRAL]),
    decl(VARIABLE_NAMES[GLUCOSE], S, &[INSULIN]),
    decl(VARIABLE_NAMES[INSULIN], S, &[GLUCOSE]),
    decl(VARIABLE_NAMES[VIRAL], S, &[]),
    decl(VARIABLE_NAMES[INFLAM], S, &[VIRAL]),
    decl(VARIABLE_NAMES[P_RA], O, &[PACER_X, PACER_Y, V_RA]),
    decl(VARIABLE_NAMES[P_RV], O, &[PACER_X, V_RV]),
    decl(VARIABLE_NAMES[P_LA], O, &[PACER_X, PACER_Y, V_LA]),
    decl(VARIABLE_NAMES[P_LV], O, &[PACER_X, V_LV]),
    decl(VARIABLE_NAMES[P_SA], O, &[V_SA, INFLAM]),
];

impl OdeSystem for PhysioModel {
    fn variables(&self) -> &[VarDecl] {
        &DECLS
    }

    fn observe(&self, _t: f64, v: &mut [f64]) {
        let p = &self.params;
        let (atrium, ventricle) = self.activation(v[PACER_X], v[PACER_Y]);
        let act = [atrium, ventricle, atrium, ventricle];
        for (k, (vol, out)) in [(V_RA, P_RA), (V_RV, P_RV), (V_LA, P_LA), (V_LV, P_LV)]
            .into_iter()
            .enumerate()
        {
            let [emin, emax, v0] = p.chambers[k];
            v[out] = (emin + (emax - emin) * act[k]) * (v[vol] - v0);
        }
        v[P_SA] = (v[V_SA] - p.arterial_unstressed) / self.arterial_compliance(v[INFLAM]);
    }

    fn derivatives(&self, t: f64, v: &[f64], d: &mut [f64]) {
        let p = &self.params;
        let e = &self.exposome;
        let eps = p.valve_smoothing;
        let [r_tri, r_pulv, r_mit, r_ao] = p.valve_resistance;

        // pacemaker
        let omega = 2.0 * PI * self.heart_rate(v[BARO]) / 60.0;
        let (x, y) = (v[PACER_X], v[PACER_Y]);
        let pull = p.pacer_gain * (1.0 - x * x - y * y);
        d[PACER_X] = -omega * y + pull * x;
        d[PACER_Y] = omega * x + pull * y;

        // circulation
        let q_tri = valve(v[P_RA] - v[P_RV], r_tri, eps);
        let q_pulv = valve(v[P_RV] - v[P_PA_PROX], r_pulv, eps);
        let q_mit = valve(v[P_LA] - v[P_LV], r_mit, eps);
        let q_ao = valve(v[P_LV] - v[P_SA], r_ao, eps);
        let pr = &p.pulmonary_resistance;
        let seg = |a: usize, b: usize, r: f64| (v[a] - v[b]) / r;
        let q_pulm = [
            seg(P_PA_PROX, P_PA_DIST, pr[0]),
            seg(P_PA_DIST, P_PA_SMALL, pr[1]),
            seg(P_PA_SMALL, P_PCAP, pr[2]),
            seg(P_PCAP, P_PVEIN, pr[3]),
            seg(P_PVEIN, P_LA, pr[4]),
        ];
        let q_sys = (v[P_SA] - v[P_SV]) / self.systemic_resistance(v);
        let q_ven = (v[P_SV] - v[P_RA]) / p.venous_resistance;

        d[V_RA] = q_ven - q_tri;
        d[V_RV] = q_tri - q_pulv;
        let inflow = [q_pulv, q_pulm[0], q_pulm[1], q_pulm[2], q_pulm[3]];
        for k in 0..5 {
            d[P_PA_PROX + k] = (inflow[k] - q_pulm[k]) / p.pulmonary_compliance[k];
        }
        d[V_LA] = q_pulm[4] - q_mit;
        d[V_LV] = q_mit - q_ao;
        d[V_SA] = q_ao - q_sys;
        d[P_SV] = (q_sys - q_ven) / p.venous_compliance;

        d[BARO] = (logistic((v[P_SA] - p.baro_setpoint) / p.baro_slope) - v[BARO]) / p.baro_tau;

        // renin-angiotensin
        let drive = (1.0 + p.renin_glucose_gain * (v[GLUCOSE] / 100.0 - 1.0))
            * (1.0 + p.renin_baro_gain * (0.5 - v[BARO]))
            * (1.0 + p.renin_feedback)
            / (1.0 + p.renin_feedback * v[ANG2]);
        d[RENIN] = (drive - v[RENIN]) / p.renin_tau;
        let conv1 = p.ace_rate * v[ACE] * v[ANG1];
        let conv2 = p.ace2_rate * v[ACE2] * v[ANG2];
        d[ANG1] = p.ang1_production * v[RENIN] - conv1 - p.ang1_decay * v[ANG1];
        d[ANG2] = conv1 - conv2 - p.ang2_decay * v[ANG2];
        d[ANG17] = conv2 - p.ang17_decay * v[ANG17];
        let ace_target = 1.0 / (1.0 + e.ace_inhibitor_dose / p.ace_ic50);
        d[ACE] = (ace_target - v[ACE]) / p.ace_tau;
        d[ACE2] = (1.0 - v[ACE2]) / p.ace2_tau - p.viral_ace2_binding * v[VIRAL] * v[ACE2];

        // infection
        let seeding = match e.infection_onset {
            Some(onset) if t >= onset => p.viral_seed,
            _ => 0.0,
        };
        d[VIRAL] = seeding + p.viral_growth * v[VIRAL] * (1.0 - v[VIRAL])
            - p.viral_clearance * v[VIRAL];
        d[INFLAM] = (v[VIRAL] * (1.0 - self.heparin_effect()) - v[INFLAM]) / p.inflammation_tau;

        // metabolism
        let clearance = p.glucose_clearance
            * (1.0 + p.exercise_glucose_gain * e.exercise_level)
            + p.insulin_action * v[INSULIN];
        d[GLUCOSE] = p.glucose_inflow * e.calorie_intake / 2000.0 - clearance * v[GLUCOSE];
        d[INSULIN] = p.insulin_secretion * v[GLUCOSE] - p.insulin_decay * v[INSULIN];
    }

    fn probe_point(&self) -> Vec<f64> {
        let mut v = Self::nominal_state();
        v[PACER_X] = 0.6;
        v[PACER_Y] = 0.5;
        v[VIRAL] = 0.3;
        v[INFLAM] = 0.2;
        v.resize(N_VARS, 0.0);
        self.observe(0.0, &mut v);
        v
    }

    fn nonnegative(&self, i: usize) -> bool {
        is_nonnegative(i)
    }
}

/// Variables whose rates read an exposome input directly.
pub const EXPOSOME_DRIVEN: [usize; 8] =
    [PACER_X, PACER_Y, V_SA, P_SV, ACE, GLUCOSE, VIRAL, INFLAM];

/// Dependency graph of the default surrogate, probe-checked and verified
/// reachable from the exposome inputs.
pub fn physio_topology() -> crate::error::Result<super::system::GraphTopology> {
    let model = PhysioModel::new(PhysioParams::default(), Exposome::default());
    let g = super::system::derive_graph(&model)?;
    g.check_reachable(&EXPOSOME_DRIVEN)?;
    Ok(g)
}
