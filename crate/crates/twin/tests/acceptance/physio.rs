//! Physiological simulator: conservation, convergence under step halving,
//! ACE-inhibitor dose response and baroreflex recovery.

use twin_core::physio::{
    simulate, simulate_scenario, Exposome, PhysioModel, PhysioParams, PhysioState, SimGrid, Trajectory, ANG2, BARO,
    N_STATES, N_VARS, PACER_Y, P_SA, P_SV, VARIABLE_NAMES, V_SA,
};
use twin_core::stats::mean;

use crate::{ensure, fail, Outcome};

fn grid(dt: f64, output_interval: f64) -> SimGrid {
    SimGrid { dt, output_interval }
}

/// Downward zero crossings of the pacer, as row indices just after.
fn cycle_rows(t: &Trajectory) -> Vec<usize> {
    (1..t.len()).filter(|&i| t.row(i - 1)[PACER_Y] > 0.0 && t.row(i)[PACER_Y] <= 0.0).collect()
}

fn conservation(rest: &PhysioState) -> Result<(usize, f64), String> {
    let m = PhysioModel::new(PhysioParams::default(), Exposome { infection_onset: Some(0.0), ace_inhibitor_dose: 5.0, ..Exposome::default() });
    let t = simulate(&m, &rest.0, 0.0, 5.0, grid(1e-3, 1e-3)).map_err(fail("simulate"))?;
    let rows = cycle_rows(&t);
    ensure!(rows.len() >= 3, "only {} cardiac cycles in 5 s", rows.len());
    let mut worst = 0.0f64;
    for pair in rows.windows(2) {
        let a = m.blood_volume(&t.row(pair[0])[..N_STATES]);
        let b = m.blood_volume(&t.row(pair[1])[..N_STATES]);
        worst = worst.max(((b - a) / a).abs());
    }
    ensure!(worst <= 1e-6, "blood volume drifts {worst:e} per cycle");
    Ok((rows.len() - 1, worst))
}

fn step_halving(rest: &PhysioState) -> Result<f64, String> {
    let m = PhysioModel::new(
        PhysioParams::default(),
        Exposome { ace_inhibitor_dose: 5.0, heparin_dose: 1000.0, calorie_intake: 2500.0, exercise_level: 0.5, infection_onset: Some(0.0) },
    );
    let a = simulate(&m, &rest.0, 0.0, 10.0, grid(1e-3, 1e-2)).map_err(fail("simulate"))?;
    let b = simulate(&m, &rest.0, 0.0, 10.0, grid(5e-4, 1e-2)).map_err(fail("simulate"))?;
    ensure!(a.len() == b.len(), "output grids differ: {} vs {}", a.len(), b.len());
    let mut worst = 0.0f64;
    for j in 0..N_VARS {
        let col = a.column(j);
        let range = col.iter().copied().fold(f64::MIN, f64::max) - col.iter().copied().fold(f64::MAX, f64::min);
        let diff = (0..a.len()).map(|i| (a.row(i)[j] - b.row(i)[j]).abs()).fold(0.0, f64::max);
        if range > 0.0 {
            worst = worst.max(diff / range);
        }
        ensure!(diff <= 1e-4 * range, "{}: dt vs dt/2 gap {diff:e} over range {range:e}", VARIABLE_NAMES[j]);
    }
    Ok(worst)
}

fn dose_response(rest: &PhysioState) -> Result<String, String> {
    let mut prev = (f64::INFINITY, f64::INFINITY);
    let mut seen = Vec::new();
    for dose in [0.0, 1.0, 2.5, 5.0, 10.0] {
        let e = Exposome { ace_inhibitor_dose: dose, ..Exposome::default() };
        let t = simulate_scenario(rest, &e, 150.0, 1e-3).map_err(fail("simulate"))?;
        let n = t.len();
        let ang2 = t.row(n - 1)[ANG2];
        let map = mean(&t.column(P_SA)[n - 1000..]);
        seen.push(format!("{dose}: {ang2:.1}/{map:.1}"));
        ensure!(ang2 < prev.0 && map < prev.1, "not strictly decreasing: {}", seen.join(", "));
        prev = (ang2, map);
    }
    Ok(seen.join(", "))
}

/// Shifts volume from veins to arteries for +10 mmHg arterial pressure and
/// compares cycle-mean MAP against an unperturbed run five time constants on.
fn baroreflex(rest: &PhysioState) -> Result<(f64, f64), String> {
    let m = PhysioModel::new(PhysioParams::default(), Exposome::default());
    let p = &m.params;
    let period = 60.0 / m.heart_rate(rest.0[BARO]);
    let horizon = 5.0 * p.baro_tau;
    let cycle_map = |t: &Trajectory| {
        mean(&(0..t.len()).filter(|&i| t.time[i] > horizon - period && t.time[i] <= horizon).map(|i| t.row(i)[P_SA]).collect::<Vec<_>>())
    };
    let end = horizon + 1.0;
    let reference = simulate(&m, &rest.0, 0.0, end, grid(1e-3, 1e-3)).map_err(fail("simulate"))?;
    let mut kicked = rest.0.clone();
    let shift = 10.0 * p.arterial_compliance;
    kicked[V_SA] += shift;
    kicked[P_SV] -= shift / p.venous_compliance;
    let t = simulate(&m, &kicked, 0.0, end, grid(1e-3, 1e-3)).map_err(fail("simulate"))?;
    let jump = t.row(0)[P_SA] - reference.row(0)[P_SA];
    ensure!((jump - 10.0).abs() < 0.01, "perturbation raised arterial pressure by {jump}");
    let (base, after) = (cycle_map(&reference), cycle_map(&t));
    let rel = (after - base).abs() / base;
    ensure!(rel <= 0.05, "MAP {after:.2} vs baseline {base:.2} at {horizon} s");
    Ok((horizon, rel))
}

pub fn run() -> Outcome {
    let rest = PhysioState::resting(200.0).map_err(fail("resting state"))?;
    let (cycles, drift) = conservation(&rest)?;
    let gap = step_halving(&rest)?;
    let doses = dose_response(&rest)?;
    let (horizon, rel) = baroreflex(&rest)?;
    Ok(format!(
        "volume drift {drift:.1e} over {cycles} cycles; dt-halving gap {gap:.1e} of range; ANG-II/MAP by dose {doses}; MAP within {:.2}% of baseline at {horizon} s",
        100.0 * rel
    ))
}
