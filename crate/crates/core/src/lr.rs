//! Lewis–Riesenfeld solution of i∂Ψ/∂t = H(t)Ψ for the spin-rotation
//! Hamiltonian.
//!
//! The invariant is I(t) = ½ m̂·σ̄ with m̂ = (sinλ cosγ, sinλ sinγ, cosλ).
//! The invariant equation ∂I/∂t + (1/i)[I, H] = 0 is equivalent to the
//! precession ṁ = ω̄ × m̂, which is what gets integrated: the (λ, γ) form of
//! the auxiliary equations is singular at the poles, the vector form is not.
//! (λ, γ) are extracted afterwards with γ unwrapped by continuity.
//!
//! The unitary V(t) = exp[(β/2)σ₊ − (β*/2)σ₋], β = −(λ/2)e^{−iγ}, maps σ3/2
//! onto I(t). Each eigenstate V(t)|σ⟩ of I(t) picks up the phase
//!
//! ```text
//! φ_σ(t) = −σ ∫ γ̇(1 − cosλ) dt   (geometric)
//!          −σ ∫ ω0 f dt           (dynamical),  f = m̂·n̂
//! ```
//!
//! and the solution is Ψ(t) = Σ_σ C_σ e^{iφ_σ(t)} V(t)|σ⟩.

use nalgebra::Vector3;

use crate::drive::{self, hamiltonian, DriveSample, DriveSpec};
use crate::error::{Error, Result};
use crate::grid::{cumulative_simpson, TimeGrid};
use crate::ode::{self, Tolerances};
use crate::su2::{expm_su2, pauli, Mat2, Pauli, Spinor, C64};
use crate::tolerance;

/// Orientation (λ, γ) of the invariant's axis m̂. γ is unwrapped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxState {
    pub lambda: f64,
    pub gamma: f64,
}

impl AuxState {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        Self { lambda, gamma }
    }

    /// m̂ = (sinλ cosγ, sinλ sinγ, cosλ).
    pub fn axis(&self) -> Vector3<f64> {
        let (sl, cl) = self.lambda.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        Vector3::new(sl * cg, sl * sg, cl)
    }

    /// Angles of a unit vector. `previous_gamma` selects the 2π branch of γ
    /// closest to it; on the polar axis γ keeps its previous value.
    pub fn from_axis(m: &Vector3<f64>, previous_gamma: Option<f64>) -> Self {
        let rho = m.x.hypot(m.y);
        let lambda = rho.atan2(m.z);
        let raw = if rho > 0.0 { m.y.atan2(m.x) } else { previous_gamma.unwrap_or(0.0) };
        let gamma = match previous_gamma {
            Some(prev) => {
                let two_pi = std::f64::consts::TAU;
                raw + two_pi * ((prev - raw) / two_pi).round()
            }
            None => raw,
        };
        Self { lambda, gamma }
    }
}

/// Time derivatives (λ̇, γ̇).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxRates {
    pub d_lambda: f64,
    pub d_gamma: f64,
}

/// λ̇ = ω0 sinθ sin(φ − γ), γ̇ = ω0[cosθ − sinθ cotλ cos(φ − γ)].
///
/// The angle form is undefined on the polar axis (sinλ = 0); that case is a
/// domain error here. Trajectories never need it because they are integrated
/// in the precession form.
pub fn aux_rhs(s: &AuxState, d: &DriveSample) -> Result<AuxRates> {
    let sl = s.lambda.sin();
    if sl.abs() < 1e-12 {
        return Err(Error::domain("auxiliary equations in angle form are singular at sinλ = 0"));
    }
    let (st, ct) = d.theta.sin_cos();
    let (sd, cd) = (d.phi - s.gamma).sin_cos();
    Ok(AuxRates {
        d_lambda: d.omega0 * st * sd,
        d_gamma: d.omega0 * (ct - st * s.lambda.cos() / sl * cd),
    })
}

/// ṁ = ω̄ × m̂.
pub fn precession_rhs(m: &Vector3<f64>, d: &DriveSample) -> Vector3<f64> {
    drive::omega_vector(d).cross(m)
}

/// Rate of the geometric integral, γ̇(1 − cosλ), evaluated as
/// (m̂ × ṁ)_z / (1 + m_z), which is finite at the north pole.
pub fn geometric_rate(m: &Vector3<f64>, d: &DriveSample) -> f64 {
    let dm = precession_rhs(m, d);
    (m.x * dm.y - m.y * dm.x) / (1.0 + m.z)
}

/// Choice of m̂(t0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Initializer {
    /// γ0 = φ(t0), λ0 = θ(t0) + π/2, so that f(t0) = 0.
    Orthogonal,
    /// m̂(t0) = n̂(t0).
    Aligned,
    Custom(AuxState),
}

pub fn initial_state(init: Initializer, spec: &DriveSpec, t0: f64) -> Result<AuxState> {
    let d = drive::sample(spec, t0)?;
    Ok(match init {
        Initializer::Orthogonal => AuxState::new(d.theta + std::f64::consts::FRAC_PI_2, d.phi),
        Initializer::Aligned => AuxState::new(d.theta, d.phi),
        Initializer::Custom(s) => s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for AuxOptions {
    fn default() -> Self {
        Self { rtol: tolerance::AUX_RTOL, atol: tolerance::AUX_ATOL }
    }
}

/// Solution of the auxiliary equations sampled on a grid, plus the drive and
/// phase-rate data at each node.
#[derive(Clone, Debug)]
pub struct AuxTrajectory {
    pub grid: TimeGrid,
    pub spec: DriveSpec,
    pub options: AuxOptions,
    /// m̂ at each node.
    pub axes: Vec<Vector3<f64>>,
    pub states: Vec<AuxState>,
    pub drive: Vec<DriveSample>,
    /// f = m̂·n̂.
    pub f: Vec<f64>,
    /// γ̇(1 − cosλ).
    pub geometric_rate: Vec<f64>,
    /// ω0·f.
    pub dynamical_rate: Vec<f64>,
    /// Accepted integrator steps.
    pub steps: usize,
}

impl AuxTrajectory {
    fn from_axes(
        grid: TimeGrid,
        spec: DriveSpec,
        options: AuxOptions,
        axes: Vec<Vector3<f64>>,
        initial_gamma: f64,
        steps: usize,
    ) -> Result<Self> {
        let n = axes.len();
        let mut states = Vec::with_capacity(n);
        let mut drive_samples = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        let mut geo = Vec::with_capacity(n);
        let mut dynm = Vec::with_capacity(n);
        let mut prev = Some(initial_gamma);
        for (k, m) in axes.iter().enumerate() {
            let d = drive::sample(&spec, grid.time(k))?;
            let s = AuxState::from_axis(m, prev);
            prev = Some(s.gamma);
            let fk = m.dot(&d.axis());
            states.push(s);
            f.push(fk);
            geo.push(geometric_rate(m, &d));
            dynm.push(d.omega0 * fk);
            drive_samples.push(d);
        }
        Ok(Self {
            grid,
            spec,
            options,
            axes,
            states,
            drive: drive_samples,
            f,
            geometric_rate: geo,
            dynamical_rate: dynm,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn f_max_abs(&self) -> f64 {
        self.f.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Copy with λ shifted by `delta` at every node (m̂ and rates rebuilt).
    /// Used to probe how sharply the consistency checks discriminate.
    pub fn with_lambda_offset(&self, delta: f64) -> Result<Self> {
        let axes = self
            .states
            .iter()
            .map(|s| AuxState::new(s.lambda + delta, s.gamma).axis())
            .collect();
        Self::from_axes(self.grid, self.spec.clone(), self.options, axes, self.states[0].gamma, self.steps)
    }
}

/// Integrates the auxiliary equations from `s0` at `grid.start()`.
///
/// m̂ is kept on the unit sphere after each accepted step by restoring the
/// length of its component perpendicular to ω̄(t); the component along ω̄ is
/// left untouched, so for a fixed axis m̂·n̂ is conserved to rounding.
pub fn integrate_aux(
    spec: &DriveSpec,
    s0: AuxState,
    grid: &TimeGrid,
    options: AuxOptions,
) -> Result<AuxTrajectory> {
    if let Some((start, end)) = spec.domain() {
        if grid.start() < start || grid.end() > end {
            return Err(Error::OutOfRange {
                t: if grid.start() < start { grid.start() } else { grid.end() },
                start,
                end,
            });
        }
    }
    let m0 = s0.axis();
    check_gauge(grid.start(), &m0)?;
    let rhs = |t: f64, m: &Vector3<f64>| -> Result<Vector3<f64>> {
        Ok(precession_rhs(m, &drive::sample(spec, t)?))
    };
    let project = |t: f64, m: Vector3<f64>| -> Result<Vector3<f64>> {
        let m = restore_unit_length(m, &drive::sample(spec, t)?.axis());
        check_gauge(t, &m)?;
        Ok(m)
    };
    let tol = Tolerances { rtol: options.rtol, atol: options.atol };
    let sol = ode::integrate(rhs, project, m0, grid, tol)?;
    AuxTrajectory::from_axes(*grid, spec.clone(), options, sol.states, s0.gamma, sol.steps)
}

fn restore_unit_length(m: Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
    let along = m.dot(n);
    let perp = m - along * n;
    let perp_len = perp.norm();
    let target = 1.0 - along * along;
    if along.abs() < 1.0 && perp_len > 1e-8 {
        along * n + perp * (target.sqrt() / perp_len)
    } else {
        m / m.norm()
    }
}

fn check_gauge(t: f64, m: &Vector3<f64>) -> Result<()> {
    if 1.0 + m.z < tolerance::SOUTH_POLE_GUARD {
        return Err(Error::Integration {
            t,
            reason: "invariant axis reached λ = π, where the V(t) parametrization is singular".into(),
        });
    }
    Ok(())
}

/// I = ¼ sinλ e^{−iγ} σ₊ + ¼ sinλ e^{iγ} σ₋ + ½ cosλ σ3.
pub fn invariant_matrix(s: &AuxState) -> Mat2 {
    let (sl, cl) = s.lambda.sin_cos();
    C64::from_polar(0.25 * sl, -s.gamma) * pauli(Pauli::Plus)
        + C64::from_polar(0.25 * sl, s.gamma) * pauli(Pauli::Minus)
        + (0.5 * cl) * pauli(Pauli::Z)
}

/// Rotation axis of V(t): the exponent (β/2)σ₊ − (β*/2)σ₋ equals
/// −i(λ/2)(k̂·σ̄) with k̂ = (−sinγ, cosγ, 0).
fn vt_axis(s: &AuxState) -> Vector3<f64> {
    let (sg, cg) = s.gamma.sin_cos();
    Vector3::new(-sg, cg, 0.0)
}

/// V = exp[(β/2)σ₊ − (β*/2)σ₋], β = −(λ/2)e^{−iγ}; equals
/// [[cos(λ/2), −sin(λ/2)e^{−iγ}], [sin(λ/2)e^{iγ}, cos(λ/2)]].
pub fn vt_unitary(s: &AuxState) -> Mat2 {
    expm_su2(&vt_axis(s), s.lambda).expect("k̂ is a unit vector by construction")
}

/// (∂V/∂λ, ∂V/∂γ) in closed form.
pub fn vt_partials(s: &AuxState) -> (Mat2, Mat2) {
    let (sh, ch) = (0.5 * s.lambda).sin_cos();
    let e_m = C64::from_polar(1.0, -s.gamma);
    let e_p = C64::from_polar(1.0, s.gamma);
    let d_lambda = Mat2::new(
        C64::new(-0.5 * sh, 0.0),
        e_m * (-0.5 * ch),
        e_p * (0.5 * ch),
        C64::new(-0.5 * sh, 0.0),
    );
    let i = C64::new(0.0, 1.0);
    let d_gamma = Mat2::new(C64::new(0.0, 0.0), i * e_m * sh, i * e_p * sh, C64::new(0.0, 0.0));
    (d_lambda, d_gamma)
}

/// V†HV − iV†V̇ computed by direct conjugation, V̇ from the chain rule
/// through the supplied rates.
pub fn hv_direct(s: &AuxState, d: &DriveSample, rates: &AuxRates) -> Mat2 {
    let v = vt_unitary(s);
    let vd = v.adjoint();
    let (dl, dg) = vt_partials(s);
    let v_dot = rates.d_lambda * dl + rates.d_gamma * dg;
    vd * hamiltonian(d) * v - C64::new(0.0, 1.0) * (vd * v_dot)
}

/// Effective Hamiltonian H_V = ½{ω0 f + γ̇(1 − cosλ)}σ3 with
/// f = cosλ cosθ + sinλ sinθ cos(γ − φ).
///
/// Fails when the directly conjugated H_V has an off-diagonal part above
/// tolerance, which happens exactly when `rates` do not satisfy the auxiliary
/// equations at `s`.
pub fn hv_effective(s: &AuxState, d: &DriveSample, rates: &AuxRates) -> Result<Mat2> {
    let (sl, cl) = s.lambda.sin_cos();
    let (st, ct) = d.theta.sin_cos();
    let f = cl * ct + sl * st * (s.gamma - d.phi).cos();
    let closed = (0.5 * (d.omega0 * f + rates.d_gamma * (1.0 - cl))) * pauli(Pauli::Z);

    let direct = hv_direct(s, d, rates);
    let off = direct.a12.norm().max(direct.a21.norm());
    let scale = d
        .omega0
        .max(rates.d_lambda.abs())
        .max((rates.d_gamma * (1.0 - cl)).abs())
        .max(f64::MIN_POSITIVE);
    if off > tolerance::HV_OFF_DIAGONAL * scale {
        return Err(Error::Consistency(format!(
            "off-diagonal of V†HV − iV†V̇ is {off:e}; auxiliary equations are not satisfied"
        )));
    }
    Ok(closed)
}

/// Eigenvalue σ = ±½ of the invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinBranch {
    Up,
    Down,
}

impl SpinBranch {
    pub fn sigma(self) -> f64 {
        match self {
            SpinBranch::Up => 0.5,
            SpinBranch::Down => -0.5,
        }
    }

    /// |σ⟩ in the σ3 basis.
    pub fn ket(self) -> Spinor {
        match self {
            SpinBranch::Up => Spinor::basis_up(),
            SpinBranch::Down => Spinor::basis_down(),
        }
    }
}

/// Accumulated phases per branch (radians, "up" is σ = +½).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhaseDecomposition {
    pub geometric_up: f64,
    pub geometric_down: f64,
    pub dynamical_up: f64,
    pub dynamical_down: f64,
    pub total_up: f64,
    pub total_down: f64,
}

impl PhaseDecomposition {
    /// From ∫γ̇(1 − cosλ)dt and ∫ω0 f dt.
    pub fn from_integrals(geometric: f64, dynamical: f64) -> Self {
        let geometric_up = -0.5 * geometric;
        let dynamical_up = -0.5 * dynamical;
        let total_up = geometric_up + dynamical_up;
        Self {
            geometric_up,
            geometric_down: -geometric_up,
            dynamical_up,
            dynamical_down: -dynamical_up,
            total_up,
            total_down: -total_up,
        }
    }

    pub fn total(&self, b: SpinBranch) -> f64 {
        match b {
            SpinBranch::Up => self.total_up,
            SpinBranch::Down => self.total_down,
        }
    }
}

/// Cumulative phases at every node of the trajectory (composite Simpson).
pub fn phase_series(traj: &AuxTrajectory) -> Vec<PhaseDecomposition> {
    let h = traj.grid.step();
    let geo = cumulative_simpson(&traj.geometric_rate, h);
    let dynm = cumulative_simpson(&traj.dynamical_rate, h);
    geo.iter()
        .zip(&dynm)
        .map(|(&g, &d)| PhaseDecomposition::from_integrals(g, d))
        .collect()
}

/// Phases accumulated over the whole trajectory.
pub fn phase_decompose(traj: &AuxTrajectory) -> PhaseDecomposition {
    *phase_series(traj).last().expect("trajectories have at least two nodes")
}

/// Assembled exact solution for one initial state.
#[derive(Clone, Debug)]
pub struct LrSolution {
    pub trajectory: AuxTrajectory,
    pub phases: Vec<PhaseDecomposition>,
    /// C_σ = ⟨σ, t0|Ψ(t0)⟩ for (up, down).
    pub coefficients: [C64; 2],
}

/// Nodes used to bridge from a grid node to an off-grid time.
const BRIDGE_NODES: usize = 9;

impl LrSolution {
    pub fn new(trajectory: AuxTrajectory, psi0: Spinor) -> Result<Self> {
        if !psi0.is_finite() {
            return Err(Error::domain("initial spinor must be finite"));
        }
        let v0 = vt_unitary(&trajectory.states[0]).adjoint();
        let c = v0 * psi0;
        let phases = phase_series(&trajectory);
        Ok(Self { trajectory, phases, coefficients: [c.up, c.down] })
    }

    fn superpose(&self, s: &AuxState, ph: &PhaseDecomposition) -> Spinor {
        let v = vt_unitary(s);
        let up = self.coefficients[0] * C64::from_polar(1.0, ph.total_up);
        let down = self.coefficients[1] * C64::from_polar(1.0, ph.total_down);
        v * Spinor::new(up, down)
    }

    pub fn state_at_node(&self, k: usize) -> Spinor {
        self.superpose(&self.trajectory.states[k], &self.phases[k])
    }

    /// Amplitudes ⟨σ, t_k|Ψ(t_k)⟩ = C_σ e^{iφ_σ(t_k)}.
    pub fn branch_amplitudes(&self, k: usize) -> [C64; 2] {
        let ph = &self.phases[k];
        [
            self.coefficients[0] * C64::from_polar(1.0, ph.total_up),
            self.coefficients[1] * C64::from_polar(1.0, ph.total_down),
        ]
    }

    /// Ψ(t) for any t in the grid span. Off-node times are reached by
    /// integrating from the preceding node.
    pub fn state_at(&self, t: f64) -> Result<Spinor> {
        let traj = &self.trajectory;
        let k = traj.grid.locate(t)?;
        let tk = traj.grid.time(k);
        if t == tk {
            return Ok(self.state_at_node(k));
        }
        let local = TimeGrid::new(tk, t, BRIDGE_NODES)?;
        let bridge = integrate_aux(&traj.spec, traj.states[k], &local, traj.options)?;
        let extra = phase_decompose(&bridge);
        let base = &self.phases[k];
        let ph = PhaseDecomposition::from_integrals(
            -2.0 * (base.geometric_up + extra.geometric_up),
            -2.0 * (base.dynamical_up + extra.dynamical_up),
        );
        Ok(self.superpose(bridge.states.last().expect("bridge has nodes"), &ph))
    }
}

/// Ψ(t) = Σ_σ C_σ e^{iφ_σ(t)} V(t)|σ⟩ with C_σ = ⟨σ, t0|Ψ(t0)⟩.
pub fn assemble_solution(traj: &AuxTrajectory, psi0: Spinor, t: f64) -> Result<Spinor> {
    LrSolution::new(traj.clone(), psi0)?.state_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2::herm_eig2;
    use std::f64::consts::{FRAC_PI_3, PI, TAU};

    fn rand_state(seed: u64) -> (AuxState, DriveSample) {
        // Small deterministic generator; keeps tests free of RNG plumbing.
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let s = AuxState::new(0.1 + 2.9 * next(), TAU * next());
        let d = DriveSample {
            omega0: 0.5 + next(),
            theta: PI * next(),
            phi: TAU * next(),
            d_omega0: next() - 0.5,
            d_theta: next() - 0.5,
            d_phi: next(),
        };
        (s, d)
    }

    #[test]
    fn aux_rhs_examples() {
        let d = DriveSample { omega0: 2.0, theta: 0.0, phi: 0.3, ..Default::default() };
        let r = aux_rhs(&AuxState::new(1.0, 0.7), &d).unwrap();
        assert_eq!(r, AuxRates { d_lambda: 0.0, d_gamma: 2.0 });
        let d = DriveSample { omega0: 2.0, theta: 1.0, phi: 0.3, ..Default::default() };
        assert_eq!(aux_rhs(&AuxState::new(1.0, 0.3), &d).unwrap().d_lambda, 0.0);
        assert!(aux_rhs(&AuxState::new(0.0, 0.3), &d).is_err());
    }

    #[test]
    fn angle_form_matches_precession_form() {
        for seed in 0..200 {
            let (s, d) = rand_state(seed);
            let r = aux_rhs(&s, &d).unwrap();
            // d/dt m̂(λ, γ), differentiated by hand.
            let (sl, cl) = s.lambda.sin_cos();
            let (sg, cg) = s.gamma.sin_cos();
            let implied = Vector3::new(
                cl * cg * r.d_lambda - sl * sg * r.d_gamma,
                cl * sg * r.d_lambda + sl * cg * r.d_gamma,
                -sl * r.d_lambda,
            );
            let direct = precession_rhs(&s.axis(), &d);
            assert!((implied - direct).amax() < 1e-12, "seed {seed}");
            // Geometric rate in both forms.
            let g = r.d_gamma * (1.0 - cl);
            assert!((g - geometric_rate(&s.axis(), &d)).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_matrix_is_half_m_dot_sigma() {
        for seed in 0..50 {
            let (s, _) = rand_state(seed);
            let i = invariant_matrix(&s);
            let expected = 0.5 * Mat2::from_bloch(&s.axis());
            assert!((i - expected).max_abs() < 1e-15);
            let e = herm_eig2(&i).unwrap();
            assert!((e.values[0] + 0.5).abs() < 1e-12 && (e.values[1] - 0.5).abs() < 1e-12);
        }
        assert_eq!(invariant_matrix(&AuxState::new(0.0, 1.3)), 0.5 * pauli(Pauli::Z));
    }

    #[test]
    fn vt_closed_form_and_transformed_invariant() {
        assert!((vt_unitary(&AuxState::new(0.0, 2.0)) - Mat2::identity()).max_abs() < 1e-16);
        let half_s3 = 0.5 * pauli(Pauli::Z);
        for seed in 0..100 {
            let (s, _) = rand_state(seed);
            let v = vt_unitary(&s);
            let (sh, ch) = (0.5 * s.lambda).sin_cos();
            let expected = Mat2::new(
                C64::new(ch, 0.0),
                -sh * C64::from_polar(1.0, -s.gamma),
                sh * C64::from_polar(1.0, s.gamma),
                C64::new(ch, 0.0),
            );
            assert!((v - expected).max_abs() < 1e-15);
            let iv = v.adjoint() * invariant_matrix(&s) * v;
            assert!((iv - half_s3).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn vt_partials_match_finite_differences() {
        let s = AuxState::new(1.1, -0.4);
        let (dl, dg) = vt_partials(&s);
        let h = 1e-6;
        let fd_l = (1.0 / (2.0 * h))
            * (vt_unitary(&AuxState::new(s.lambda + h, s.gamma))
                - vt_unitary(&AuxState::new(s.lambda - h, s.gamma)));
        let fd_g = (1.0 / (2.0 * h))
            * (vt_unitary(&AuxState::new(s.lambda, s.gamma + h))
                - vt_unitary(&AuxState::new(s.lambda, s.gamma - h)));
        assert!((dl - fd_l).max_abs() < 1e-9);
        assert!((dg - fd_g).max_abs() < 1e-9);
    }

    #[test]
    fn hv_for_axis_along_z() {
        let d = DriveSample { omega0: 1.3, ..Default::default() };
        let s = AuxState::new(0.8, 0.2);
        let rates = aux_rhs(&s, &d).unwrap();
        assert_eq!(rates.d_gamma, 1.3);
        let hv = hv_effective(&s, &d, &rates).unwrap();
        assert!((hv - 0.65 * pauli(Pauli::Z)).max_abs() < 1e-15);
    }

    #[test]
    fn hv_closed_form_matches_direct_conjugation() {
        for seed in 0..200 {
            let (s, d) = rand_state(seed);
            let rates = aux_rhs(&s, &d).unwrap();
            let closed = hv_effective(&s, &d, &rates).unwrap();
            let direct = hv_direct(&s, &d, &rates);
            assert!((closed.a11 - direct.a11).norm() < 1e-10, "seed {seed}");
            assert!((closed.a22 - direct.a22).norm() < 1e-10);
        }
    }

    #[test]
    fn hv_on_constraint_surface() {
        // f = 0: λ = θ + π/2, γ = φ.
        let d = DriveSample { omega0: 1.0, theta: 0.4, phi: 1.0, ..Default::default() };
        let s = AuxState::new(0.4 + PI / 2.0, 1.0);
        let rates = aux_rhs(&s, &d).unwrap();
        let hv = hv_effective(&s, &d, &rates).unwrap();
        let expected = (0.5 * rates.d_gamma * (1.0 - s.lambda.cos())) * pauli(Pauli::Z);
        assert!((hv - expected).max_abs() < 1e-14);
    }

    #[test]
    fn hv_off_diagonal_grows_linearly_with_inconsistency() {
        let (s, d) = rand_state(7);
        let rates = aux_rhs(&s, &d).unwrap();
        let off = |delta: f64| {
            let m = hv_direct(&AuxState::new(s.lambda + delta, s.gamma), &d, &rates);
            m.a12.norm()
        };
        let (a, b) = (off(1e-3), off(1e-4));
        assert!(off(0.0) < 1e-12);
        assert!((a / b - 10.0).abs() < 0.1, "{a} {b}");
        let perturbed = AuxState::new(s.lambda + 1e-3, s.gamma);
        assert!(matches!(hv_effective(&perturbed, &d, &rates), Err(Error::Consistency(_))));
    }

    #[test]
    fn constant_axis_along_z_gives_linear_gamma() {
        let spec = DriveSpec::constant(1.5, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 101).unwrap();
        let traj = integrate_aux(&spec, AuxState::new(0.9, 0.2), &grid, AuxOptions::default()).unwrap();
        for (k, s) in traj.states.iter().enumerate() {
            assert!((s.lambda - 0.9).abs() < 1e-12);
            assert!((s.gamma - (0.2 + 1.5 * grid.time(k))).abs() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn orthogonal_start_stays_orthogonal() {
        let spec = DriveSpec::constant(1.0, 0.7, 0.3).unwrap();
        let grid = TimeGrid::new(0.0, 50.0, 501).unwrap();
        let s0 = initial_state(Initializer::Orthogonal, &spec, 0.0).unwrap();
        let traj = integrate_aux(&spec, s0, &grid, AuxOptions::default()).unwrap();
        assert!(traj.f_max_abs() < 1e-12, "{}", traj.f_max_abs());
    }

    #[test]
    fn closed_form_geometric_phase_one_period() {
        let omega0 = 2.0;
        let lambda0 = FRAC_PI_3;
        let spec = DriveSpec::constant(omega0, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, TAU / omega0, 257).unwrap();
        let traj = integrate_aux(&spec, AuxState::new(lambda0, 0.0), &grid, AuxOptions::default()).unwrap();
        let pd = phase_decompose(&traj);
        assert!((pd.geometric_up - (-PI * (1.0 - lambda0.cos()))).abs() < 1e-9);
        assert_eq!(pd.geometric_down, -pd.geometric_up);
        assert_eq!(pd.total_down, -pd.total_up);
    }

    #[test]
    fn aligned_start_has_no_geometric_phase() {
        let omega0 = 1.0;
        let spec = DriveSpec::constant(omega0, 1.0, 0.5).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 201).unwrap();
        let s0 = initial_state(Initializer::Aligned, &spec, 0.0).unwrap();
        let traj = integrate_aux(&spec, s0, &grid, AuxOptions::default()).unwrap();
        let pd = phase_decompose(&traj);
        assert!(pd.geometric_up.abs() < 1e-12);
        assert!((pd.dynamical_up - (-0.5 * omega0 * 20.0)).abs() < 1e-10);
    }

    #[test]
    fn south_pole_is_reported() {
        let spec = DriveSpec::constant(1.0, PI / 2.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let s0 = initial_state(Initializer::Orthogonal, &spec, 0.0).unwrap();
        assert!(matches!(
            integrate_aux(&spec, s0, &grid, AuxOptions::default()),
            Err(Error::Integration { .. })
        ));
    }

    #[test]
    fn solution_at_start_reproduces_initial_state() {
        let spec = DriveSpec::conical(1.0, 0.6, 0.2, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 101).unwrap();
        let traj = integrate_aux(&spec, AuxState::new(1.0, 0.4), &grid, AuxOptions::default()).unwrap();
        let psi0 = Spinor::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let psi = assemble_solution(&traj, psi0, 0.0).unwrap();
        assert!(psi.max_abs_diff(&psi0) < 1e-13);
        assert!(assemble_solution(&traj, psi0, 6.0).is_err());
    }

    #[test]
    fn single_branch_stays_an_eigenstate() {
        let spec = DriveSpec::conical(1.0, 0.6, 0.2, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 101).unwrap();
        let traj = integrate_aux(&spec, AuxState::new(1.0, 0.4), &grid, AuxOptions::default()).unwrap();
        let psi0 = vt_unitary(&traj.states[0]) * Spinor::basis_up();
        let sol = LrSolution::new(traj, psi0).unwrap();
        assert!(sol.coefficients[1].norm() < 1e-15);
        for k in (0..101).step_by(10) {
            let eig = vt_unitary(&sol.trajectory.states[k]) * Spinor::basis_up();
            let overlap = eig.inner(&sol.state_at_node(k)).norm();
            assert!((overlap - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn off_node_state_is_consistent_with_nodes() {
        let spec = DriveSpec::conical(1.0, 0.6, 0.3, 0.0).unwrap();
        let fine = TimeGrid::new(0.0, 4.0, 401).unwrap();
        let coarse = TimeGrid::new(0.0, 4.0, 101).unwrap();
        let s0 = AuxState::new(1.0, 0.4);
        let psi0 = Spinor::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let fine_sol = LrSolution::new(integrate_aux(&spec, s0, &fine, AuxOptions::default()).unwrap(), psi0).unwrap();
        let coarse_sol =
            LrSolution::new(integrate_aux(&spec, s0, &coarse, AuxOptions::default()).unwrap(), psi0).unwrap();
        // t = 2.01 is node 201 of the fine grid, between coarse nodes 50 and 51.
        let a = fine_sol.state_at_node(201);
        let b = coarse_sol.state_at(2.01).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8, "{}", a.max_abs_diff(&b));
    }
}
