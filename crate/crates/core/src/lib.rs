//! Spin-rotation coupling in rotating frames.
//!
//! * [`su2`]: 2×2 complex algebra, Pauli matrices, SU(2) exponentials.
//! * [`gravitomag`]: Kerr and rotating-frame metrics, gravitomagnetic
//!   potentials and fields.
//! * [`drive`]: time-dependent rotation vectors ω̄(t).
//! * [`lr`]: exact solutions built from the Lewis–Riesenfeld invariant.
//! * [`direct`]: reference RK4 propagation of the Schrödinger equation.
//! * [`analysis`]: cross-validation, phase differences, adiabatic limits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod direct;
pub mod drive;
pub mod error;
pub mod gravitomag;
pub mod grid;
pub mod lr;
mod ode;
pub mod su2;
pub mod tolerance;

pub use analysis::{
    compare, fidelity, interferometric_phase_difference, run_comparison, BerryTable, ComparisonReport,
    PhaseDifference,
};
pub use direct::{evolve_direct, evolve_direct_with, invariant_residual, DirectOptions, EvolutionResult};
pub use drive::{DriveSample, DriveSpec, SampledDrive};
pub use error::{Error, Result};
pub use gravitomag::{FieldVector, KerrParams, MetricComponents, RotFrame, SphericalPoint};
pub use grid::TimeGrid;
pub use lr::{
    assemble_solution, integrate_aux, phase_decompose, AuxOptions, AuxState, AuxTrajectory, Initializer,
    LrSolution, PhaseDecomposition, SpinBranch,
};
pub use ode::Tolerances;
pub use su2::{Mat2, Spinor, C64};
