//! Cross-validation of the invariant-based solution against direct
//! propagation, branch phase differences, and adiabatic-limit studies.

use rayon::prelude::*;

use crate::direct::{evolve_direct_with, DirectOptions, EvolutionResult};
use crate::drive::DriveSpec;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::lr::{
    initial_state, integrate_aux, phase_decompose, vt_unitary, AuxOptions, Initializer, LrSolution,
    PhaseDecomposition,
};
use crate::su2::Spinor;
use crate::tolerance;

/// |⟨a|b⟩|² for unit spinors.
pub fn fidelity(a: &Spinor, b: &Spinor) -> Result<f64> {
    for s in [a, b] {
        if !s.is_finite() || (s.norm() - 1.0).abs() > tolerance::FIDELITY_NORM {
            return Err(Error::domain(format!("fidelity needs unit spinors, got norm {}", s.norm())));
        }
    }
    Ok(a.inner(b).norm_sqr())
}

/// Up-minus-down phase differences, in radians, not wrapped.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhaseDifference {
    pub geometric: f64,
    pub dynamical: f64,
    pub total: f64,
}

pub fn interferometric_phase_difference(pd: &PhaseDecomposition) -> PhaseDifference {
    PhaseDifference {
        geometric: pd.geometric_up - pd.geometric_down,
        dynamical: pd.dynamical_up - pd.dynamical_down,
        total: pd.total_up - pd.total_down,
    }
}

/// Wraps a phase into (−π, π] for display.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Removes 2π jumps between consecutive samples.
pub fn unwrap_phases(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (k, &x) in raw.iter().enumerate() {
        if k > 0 {
            let jump = x - raw[k - 1];
            offset -= std::f64::consts::TAU * (jump / std::f64::consts::TAU).round();
        }
        out.push(x + offset);
    }
    out
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub fidelity: Vec<f64>,
    pub min_fidelity: f64,
    /// Δφ_total(t) at every node.
    pub phase_difference: Vec<f64>,
    pub final_phases: PhaseDecomposition,
    pub final_difference: PhaseDifference,
    /// max_t |dn̂/dt| / ω0(t).
    pub adiabaticity: f64,
    pub f_max_abs: f64,
    /// max_k | ‖ψ_direct(t_k)‖ − 1 |.
    pub direct_norm_drift: f64,
}

/// Node-by-node comparison of the two solutions, which must share a grid.
///
/// The direct states are renormalised before the overlap is taken so that a
/// coarse propagation shows up as lost fidelity; its norm drift is reported
/// separately.
pub fn compare(lr: &LrSolution, direct: &EvolutionResult) -> Result<ComparisonReport> {
    let traj = &lr.trajectory;
    if traj.grid != direct.grid {
        return Err(Error::usage("solutions are sampled on different grids"));
    }
    let fid = (0..traj.len())
        .map(|k| {
            let d = &direct.states[k];
            if !d.is_finite() || d.norm() == 0.0 {
                return Err(Error::Integration { t: traj.grid.time(k), reason: "direct state is degenerate".into() });
            }
            fidelity(&lr.state_at_node(k).normalized(), &d.normalized())
        })
        .collect::<Result<Vec<_>>>()?;
    let min_fidelity = fid.iter().copied().fold(f64::INFINITY, f64::min);
    let phase_difference = lr
        .phases
        .iter()
        .map(|p| interferometric_phase_difference(p).total)
        .collect();
    let final_phases = *lr.phases.last().expect("non-empty trajectory");
    let adiabaticity = traj
        .drive
        .iter()
        .map(|d| if d.omega0 > 0.0 { d.axis_rate().norm() / d.omega0 } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(ComparisonReport {
        fidelity: fid,
        min_fidelity,
        phase_difference,
        final_phases,
        final_difference: interferometric_phase_difference(&final_phases),
        adiabaticity,
        f_max_abs: traj.f_max_abs(),
        direct_norm_drift: direct.max_norm_drift(),
    })
}

/// Solves one scenario both ways and compares.
pub fn run_comparison(
    spec: &DriveSpec,
    init: Initializer,
    psi0: Spinor,
    grid: &TimeGrid,
    aux: AuxOptions,
    direct: DirectOptions,
) -> Result<(LrSolution, EvolutionResult, ComparisonReport)> {
    let s0 = initial_state(init, spec, grid.start())?;
    let traj = integrate_aux(spec, s0, grid, aux)?;
    let lr = LrSolution::new(traj, psi0)?;
    let ev = evolve_direct_with(spec, psi0, grid, direct)?;
    let report = compare(&lr, &ev)?;
    Ok((lr, ev, report))
}

/// arg(a_up·conj(a_down)) relative to t0, unwrapped, where a_σ are the
/// amplitudes of Ψ(t) on the invariant's eigenstates.
pub fn relative_phase_series(lr: &LrSolution) -> Result<Vec<f64>> {
    if lr.coefficients.iter().any(|c| c.norm() < 1e-8) {
        return Err(Error::domain("relative phase needs a superposition of both branches"));
    }
    let raw: Vec<f64> = (0..lr.trajectory.len())
        .map(|k| {
            let psi = lr.state_at_node(k);
            let amps = vt_unitary(&lr.trajectory.states[k]).adjoint() * psi;
            (amps.up * amps.down.conj()).arg()
        })
        .collect();
    let unwrapped = unwrap_phases(&raw);
    Ok(unwrapped.iter().map(|x| x - unwrapped[0]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BerryRow {
    pub nu_ratio: f64,
    pub geometric_up: f64,
    /// |geometric_up − (−Ω/2)|.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerryTable {
    pub theta0: f64,
    /// −Ω/2 with Ω = 2π(1 − cosθ0).
    pub target: f64,
    pub rows: Vec<BerryRow>,
    pub monotone: bool,
    /// Slope of log(deviation) against log(ν/ω0); `None` if fewer than two
    /// rows have positive deviation.
    pub exponent: Option<f64>,
}

/// Geometric phase of an aligned-mode conical drive over one precession
/// period 2π/ν, for each ν in the strictly decreasing sequence `nus`.
pub fn berry_limit_check(
    omega0: f64,
    theta0: f64,
    nus: &[f64],
    nodes_per_larmor: usize,
    options: AuxOptions,
) -> Result<BerryTable> {
    if nus.is_empty() {
        return Err(Error::usage("ν sweep is empty"));
    }
    if nus.iter().any(|&n| !(n > 0.0 && n.is_finite())) || nus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::usage("ν sweep must be positive and strictly decreasing"));
    }
    if !(omega0 > 0.0) {
        return Err(Error::domain("ω0 must be positive"));
    }
    let target = -std::f64::consts::PI * (1.0 - theta0.cos());
    let rows = nus
        .par_iter()
        .map(|&nu| -> Result<BerryRow> {
            let spec = DriveSpec::conical(omega0, theta0, nu, 0.0)?;
            let period = std::f64::consts::TAU / nu;
            let larmor = period * omega0 / std::f64::consts::TAU;
            let nodes = ((larmor * nodes_per_larmor.max(4) as f64).ceil() as usize).max(8) + 1;
            let grid = TimeGrid::new(0.0, period, nodes)?;
            let s0 = initial_state(Initializer::Aligned, &spec, 0.0)?;
            let traj = integrate_aux(&spec, s0, &grid, options)?;
            let g = phase_decompose(&traj).geometric_up;
            Ok(BerryRow { nu_ratio: nu / omega0, geometric_up: g, deviation: (g - target).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| (r.nu_ratio, r.deviation))
        .unzip();
    let exponent = if xs.len() >= 2 { power_law_exponent(&xs, &ys).ok() } else { None };
    Ok(BerryTable { theta0, target, rows, monotone, exponent })
}

/// Least-squares slope of log y against log x.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::usage("power-law fit needs at least two (x, y) pairs"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::domain("power-law fit needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("power-law fit needs distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearResponse {
    /// Slope of the fit y = s·x through the origin.
    pub slope: f64,
    /// max_i |y_i − s·x_i| / |y_i|.
    pub max_rel_residual: f64,
}

/// Fits y = s·x, for responses measured against an x = 0 baseline.
pub fn linear_response(x: &[f64], y: &[f64]) -> Result<LinearResponse> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::usage("linear fit needs matching, non-empty data"));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::domain("linear fit needs a nonzero abscissa"));
    }
    let slope = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let max_rel_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| if *b == 0.0 { (slope * a).abs() } else { ((b - slope * a) / b).abs() })
        .fold(0.0, f64::max);
    Ok(LinearResponse { slope, max_rel_residual })
}

/// Nominal drive period 2π/ω0.
pub fn drive_period(spec: &DriveSpec) -> Result<f64> {
    let w = spec.nominal_omega0();
    if !(w > 0.0) {
        return Err(Error::domain("drive period is undefined for ω0 = 0"));
    }
    Ok(std::f64::consts::TAU / w)
}

/// Largest deviation of the invariant's eigenvalues from ±½ over a trajectory.
pub fn eigenvalue_drift(lr: &LrSolution) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in &lr.trajectory.states {
        let e = crate::su2::herm_eig2(&crate::lr::invariant_matrix(s))?;
        worst = worst.max((e.values[0] + 0.5).abs()).max((e.values[1] - 0.5).abs());
    }
    Ok(worst)
}
