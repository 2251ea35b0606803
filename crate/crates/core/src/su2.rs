//! Exact complex 2×2 algebra for spin-½.
//!
//! `Mat2` and `Spinor` are plain value types; all operations are closed-form
//! and allocation free. Amplitudes of a `Spinor` refer to the σ3 eigenbasis
//! (`up` = +1, `down` = −1).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::Vector3;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tolerance;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Complex 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a11: C64,
    pub a12: C64,
    pub a21: C64,
    pub a22: C64,
}

impl Mat2 {
    pub const fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn diag(d1: C64, d2: C64) -> Self {
        Self::new(d1, ZERO, ZERO, d2)
    }

    /// v·σ for a real 3-vector.
    pub fn from_bloch(v: &Vector3<f64>) -> Self {
        Self::new(
            C64::new(v.z, 0.0),
            C64::new(v.x, -v.y),
            C64::new(v.x, v.y),
            C64::new(-v.z, 0.0),
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.a11.conj(), self.a21.conj(), self.a12.conj(), self.a22.conj())
    }

    pub fn trace(&self) -> C64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> C64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        [self.a11, self.a12, self.a21, self.a22]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.max_abs();
        (*self - self.adjoint()).max_abs() <= tolerance::HERMITIAN_REL * scale
    }

    /// Coordinates (x, y, z) of a traceless Hermitian matrix in the σ basis,
    /// i.e. the inverse of [`Mat2::from_bloch`] projected on su(2).
    pub fn bloch_components(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.a12.re + self.a21.re),
            0.5 * (self.a21.im - self.a12.im),
            0.5 * (self.a11.re - self.a22.re),
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m.scale(C64::new(self, 0.0))
    }
}

impl Mul<Mat2> for C64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m.scale(self)
    }
}

impl Mul<Spinor> for Mat2 {
    type Output = Spinor;
    fn mul(self, s: Spinor) -> Spinor {
        Spinor::new(
            self.a11 * s.up + self.a12 * s.down,
            self.a21 * s.up + self.a22 * s.down,
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a11, self.a12, self.a21, self.a22)
    }
}

/// Two-component spin state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor {
    pub up: C64,
    pub down: C64,
}

impl Spinor {
    pub const fn new(up: C64, down: C64) -> Self {
        Self { up, down }
    }

    pub const fn basis_up() -> Self {
        Self::new(ONE, ZERO)
    }

    pub const fn basis_down() -> Self {
        Self::new(ZERO, ONE)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩, antilinear in `self`.
    pub fn inner(&self, other: &Spinor) -> C64 {
        self.up.conj() * other.up + self.down.conj() * other.down
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.up * s, self.down * s)
    }

    pub fn normalized(&self) -> Self {
        self.scale(C64::new(1.0 / self.norm(), 0.0))
    }

    /// Largest component modulus difference against `other`.
    pub fn max_abs_diff(&self, other: &Spinor) -> f64 {
        (self.up - other.up).norm().max((self.down - other.down).norm())
    }

    pub fn is_finite(&self) -> bool {
        [self.up, self.down].iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Spinor {
    type Output = Spinor;
    fn add(self, o: Spinor) -> Spinor {
        Spinor::new(self.up + o.up, self.down + o.down)
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    fn sub(self, o: Spinor) -> Spinor {
        Spinor::new(self.up - o.up, self.down - o.down)
    }
}

impl Mul<Spinor> for C64 {
    type Output = Spinor;
    fn mul(self, s: Spinor) -> Spinor {
        s.scale(self)
    }
}

/// Index of a Pauli generator: σ1, σ2, σ3 or the ladder combinations
/// σ± = σ1 ± iσ2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "x" | "X" => Ok(Pauli::X),
            "2" | "y" | "Y" => Ok(Pauli::Y),
            "3" | "z" | "Z" => Ok(Pauli::Z),
            "+" => Ok(Pauli::Plus),
            "-" | "−" => Ok(Pauli::Minus),
            other => Err(Error::usage(format!(
                "invalid Pauli index {other:?}; expected 1, 2, 3, '+' or '-'"
            ))),
        }
    }
}

pub fn pauli(k: Pauli) -> Mat2 {
    match k {
        Pauli::X => Mat2::new(ZERO, ONE, ONE, ZERO),
        Pauli::Y => Mat2::new(ZERO, -I, I, ZERO),
        Pauli::Z => Mat2::diag(ONE, -ONE),
        Pauli::Plus => Mat2::new(ZERO, C64::new(2.0, 0.0), ZERO, ZERO),
        Pauli::Minus => Mat2::new(ZERO, ZERO, C64::new(2.0, 0.0), ZERO),
    }
}

/// AB − BA.
pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    *a * *b - *b * *a
}

/// exp(−i·angle·(axis·σ)/2) in closed form.
pub fn expm_su2(axis: &Vector3<f64>, angle: f64) -> Result<Mat2> {
    let len = axis.norm();
    if !len.is_finite() || (len - 1.0).abs() > tolerance::UNIT_AXIS {
        return Err(Error::domain(format!("rotation axis must be unit length, got ‖n‖ = {len}")));
    }
    if !angle.is_finite() {
        return Err(Error::domain("rotation angle must be finite"));
    }
    let (s, c) = (0.5 * angle).sin_cos();
    Ok(Mat2::identity().scale(C64::new(c, 0.0)) + Mat2::from_bloch(axis).scale(C64::new(0.0, -s)))
}

/// Eigen-decomposition of a Hermitian 2×2 matrix.
#[derive(Clone, Copy, Debug)]
pub struct HermEig2 {
    /// Ascending.
    pub values: [f64; 2],
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: [Spinor; 2],
}

/// Fixes the global phase: the larger-modulus component (ties go to `up`)
/// is made real and positive.
fn fix_phase(v: Spinor) -> Spinor {
    let pivot = if v.up.norm() >= v.down.norm() { v.up } else { v.down };
    let n = pivot.norm();
    if n == 0.0 {
        return v;
    }
    v.scale(pivot.conj() / n)
}

pub fn herm_eig2(a: &Mat2) -> Result<HermEig2> {
    if !a.is_finite() {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    if !a.is_hermitian() {
        return Err(Error::domain("herm_eig2 requires a Hermitian matrix"));
    }
    let p = a.a11.re;
    let q = a.a22.re;
    let b = 0.5 * (a.a12 + a.a21.conj());
    let mean = 0.5 * (p + q);
    let half_diff = 0.5 * (p - q);
    let radius = half_diff.hypot(b.norm());

    if 2.0 * radius <= tolerance::DEGENERATE_GAP_REL * a.max_abs() {
        return Ok(HermEig2 {
            values: [mean - radius, mean + radius],
            vectors: [Spinor::basis_up(), Spinor::basis_down()],
        });
    }

    // Eigenvector of the upper eigenvalue mean + radius, taken from whichever
    // row of (A − e·I) is better conditioned.
    let upper = if half_diff >= 0.0 {
        Spinor::new(C64::new(half_diff + radius, 0.0), b.conj())
    } else {
        Spinor::new(b, C64::new(radius - half_diff, 0.0))
    };
    let upper = upper.normalized();
    let lower = Spinor::new(-upper.down.conj(), upper.up.conj());

    Ok(HermEig2 {
        values: [mean - radius, mean + radius],
        vectors: [fix_phase(lower), fix_phase(upper)],
    })
}
