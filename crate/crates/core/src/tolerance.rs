//! Numerical tolerances used across the crate.
//!
//! Every threshold that gates an error path or a documented guarantee lives
//! here, so the whole set can be audited in one place.

/// Hermiticity check: ‖A − A†‖_max ≤ `HERMITIAN_REL`·‖A‖_max.
pub const HERMITIAN_REL: f64 = 1e-14;

/// Unitarity guarantee: ‖U†U − I‖_max.
pub const UNITARY_ABS: f64 = 1e-12;

/// Accepted deviation of a rotation axis from unit length.
pub const UNIT_AXIS: f64 = 1e-10;

/// Eigenvalue gap (relative to ‖A‖_max) below which `herm_eig2` returns the
/// canonical basis.
pub const DEGENERATE_GAP_REL: f64 = 1e-13;

/// Accepted deviation of an initial spinor from unit norm.
pub const UNIT_SPINOR: f64 = 1e-12;

/// Accepted deviation of spinors handed to `fidelity`.
pub const FIDELITY_NORM: f64 = 1e-6;

/// Off-diagonal residual of the directly conjugated effective Hamiltonian.
pub const HV_OFF_DIAGONAL: f64 = 1e-9;

/// Default relative/absolute tolerances of the adaptive integrator.
pub const AUX_RTOL: f64 = 1e-10;
pub const AUX_ATOL: f64 = 1e-12;

/// Default number of classical RK4 substeps per output interval.
pub const DIRECT_SUBSTEPS: usize = 64;

/// Default relative finite-difference step for the spherical curl.
pub const CURL_REL_STEP: f64 = 1e-5;

/// Smallest allowed 1 + m_z before the V(t) gauge becomes singular.
pub const SOUTH_POLE_GUARD: f64 = 1e-8;

/// Default acceptance threshold for LR vs direct fidelity.
pub const FIDELITY_THRESHOLD: f64 = 1.0 - 1e-8;
