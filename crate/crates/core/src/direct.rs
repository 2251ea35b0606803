//! Reference propagation of i dψ/dt = H(t)ψ with fixed-step RK4.

use crate::drive::{self, hamiltonian, DriveSpec};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::lr::{invariant_matrix, AuxTrajectory};
use crate::su2::{commutator, Mat2, Spinor, C64};
use crate::tolerance;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectOptions {
    /// RK4 substeps per output interval.
    pub substeps: usize,
    /// Reject initial states whose norm differs from one.
    pub require_unit_norm: bool,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self { substeps: tolerance::DIRECT_SUBSTEPS, require_unit_norm: true }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub grid: TimeGrid,
    pub states: Vec<Spinor>,
}

impl EvolutionResult {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(Spinor::norm).collect()
    }

    /// max_k | ‖ψ_k‖ − 1 |.
    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().fold(0.0, |a, s| a.max((s.norm() - 1.0).abs()))
    }
}

/// Propagates a unit spinor with the default options.
pub fn evolve_direct(spec: &DriveSpec, psi0: Spinor, grid: &TimeGrid) -> Result<EvolutionResult> {
    evolve_direct_with(spec, psi0, grid, DirectOptions::default())
}

pub fn evolve_direct_with(
    spec: &DriveSpec,
    psi0: Spinor,
    grid: &TimeGrid,
    options: DirectOptions,
) -> Result<EvolutionResult> {
    if options.substeps == 0 {
        return Err(Error::usage("substeps must be at least 1"));
    }
    if !psi0.is_finite() {
        return Err(Error::domain("initial spinor must be finite"));
    }
    if options.require_unit_norm && (psi0.norm() - 1.0).abs() > tolerance::UNIT_SPINOR {
        return Err(Error::domain(format!("initial spinor has norm {}, expected 1", psi0.norm())));
    }
    if let Some((a, b)) = spec.domain() {
        if grid.start() < a || grid.end() > b {
            let t = if grid.start() < a { grid.start() } else { grid.end() };
            return Err(Error::OutOfRange { t, start: a, end: b });
        }
    }

    let minus_i = C64::new(0.0, -1.0);
    let rhs = |t: f64, psi: &Spinor| -> Result<Spinor> {
        let h = hamiltonian(&drive::sample(spec, t)?);
        Ok(minus_i * (h * *psi))
    };
    let half = C64::new(0.5, 0.0);

    let mut states = Vec::with_capacity(grid.len());
    let mut psi = psi0;
    states.push(psi);
    for k in 1..grid.len() {
        let (ta, tb) = (grid.time(k - 1), grid.time(k));
        let dt = (tb - ta) / options.substeps as f64;
        for j in 0..options.substeps {
            let t = ta + j as f64 * dt;
            let hdt = C64::new(dt, 0.0);
            let k1 = rhs(t, &psi)?;
            let k2 = rhs(t + 0.5 * dt, &(psi + (half * hdt) * k1))?;
            let k3 = rhs(t + 0.5 * dt, &(psi + (half * hdt) * k2))?;
            let k4 = rhs(t + dt, &(psi + hdt * k3))?;
            let incr = k1 + C64::new(2.0, 0.0) * k2 + C64::new(2.0, 0.0) * k3 + k4;
            psi = psi + C64::new(dt / 6.0, 0.0) * incr;
        }
        if !psi.is_finite() {
            return Err(Error::Integration { t: tb, reason: "spinor became non-finite".into() });
        }
        states.push(psi);
    }
    Ok(EvolutionResult { grid: *grid, states })
}

/// max over interior nodes of ‖dI/dt − i[I, H]‖, with dI/dt from a
/// fourth-order centred difference of the sampled invariant.
pub fn invariant_residual(traj: &AuxTrajectory) -> Result<f64> {
    let n = traj.len();
    if n < 5 {
        return Err(Error::usage("invariant residual needs at least five nodes"));
    }
    let h = traj.grid.step();
    let inv: Vec<Mat2> = traj.states.iter().map(invariant_matrix).collect();
    let i = C64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for k in 2..n - 2 {
        let d_i = (1.0 / (12.0 * h)) * (inv[k - 2] - 8.0 * inv[k - 1] + 8.0 * inv[k + 1] - inv[k + 2]);
        let r = d_i - i * commutator(&inv[k], &hamiltonian(&traj.drive[k]));
        worst = worst.max(r.max_abs());
    }
    Ok(worst)
}
