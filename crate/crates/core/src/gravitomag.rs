//! Kerr exterior metric, its rotating-frame form, gravitomagnetic potentials
//! and field strengths.
//!
//! Units are SI. Metric components refer to the coordinates (c·t, r, θ, φ)
//! and follow the line-element convention
//!
//! ```text
//! ds² = g_tt (c dt)² + g_rr dr² + g_thth dθ² + g_phph dφ²
//!     + g_tph (c dt) dφ + g_tr (c dt) dr
//! ```
//!
//! so the off-diagonal entries are the full cross coefficients, not halves.
//! Vector fields are stored in the orthonormal spherical basis
//! (e_r, e_θ, e_φ).

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tolerance;

/// Constants of the gravitating body. `a·c` is the angular momentum per unit
/// mass, so `a` is a length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrParams {
    pub g: f64,
    pub mass: f64,
    pub c: f64,
    pub a: f64,
}

impl KerrParams {
    pub fn new(g: f64, mass: f64, c: f64, a: f64) -> Result<Self> {
        if !(g.is_finite() && mass.is_finite() && c.is_finite() && a.is_finite()) {
            return Err(Error::domain("Kerr parameters must be finite"));
        }
        if g < 0.0 || mass < 0.0 {
            return Err(Error::domain("G and M must be non-negative"));
        }
        if c <= 0.0 {
            return Err(Error::domain("c must be positive"));
        }
        Ok(Self { g, mass, c, a })
    }

    /// Flat space (G = M = a = 0) with light speed `c`.
    pub fn flat(c: f64) -> Self {
        Self { g: 0.0, mass: 0.0, c, a: 0.0 }
    }

    /// GM/c², half the Schwarzschild radius.
    pub fn gravitational_length(&self) -> f64 {
        self.g * self.mass / (self.c * self.c)
    }
}

/// Rotating frame: dφ′ = dφ + ω dt and a radial particle velocity v.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RotFrame {
    pub omega: f64,
    pub v: f64,
}

impl RotFrame {
    pub fn new(omega: f64, v: f64) -> Self {
        Self { omega, v }
    }

    /// ω̄ = ω ẑ.
    pub fn omega_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.omega)
    }

    /// The rotating-frame reduction assumes |v| ≪ ωr. Returns a message when
    /// that is not met at `x` (ratio above 0.1); never an error.
    pub fn validity_warning(&self, x: &SphericalPoint) -> Option<String> {
        let rim = (self.omega * x.r).abs();
        if self.v != 0.0 && self.v.abs() > 0.1 * rim {
            Some(format!(
                "radial speed |v| = {} is not small against ωr = {} at r = {}",
                self.v.abs(),
                rim,
                x.r
            ))
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && theta.is_finite() && phi.is_finite()) {
            return Err(Error::domain("spherical coordinates must be finite"));
        }
        if r <= 0.0 {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::domain(format!("polar angle must lie in [0, π], got {theta}")));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn to_cartesian(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        self.r * Vector3::new(st * cp, st * sp, ct)
    }

    pub fn e_r(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    pub fn e_theta(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(ct * cp, ct * sp, -st)
    }

    pub fn e_phi(&self) -> Vector3<f64> {
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(-sp, cp, 0.0)
    }

    // Unchecked offsets used by the finite-difference stencil.
    fn shifted(&self, dr: f64, dtheta: f64, dphi: f64) -> Self {
        Self { r: self.r + dr, theta: self.theta + dtheta, phi: self.phi + dphi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricComponents {
    pub g_tt: f64,
    pub g_rr: f64,
    pub g_thth: f64,
    pub g_phph: f64,
    pub g_tph: f64,
    pub g_tr: f64,
}

impl MetricComponents {
    /// ds² for coordinate differentials (dt, dr, dθ, dφ).
    pub fn line_element(&self, c: f64, dt: f64, dr: f64, dtheta: f64, dphi: f64) -> f64 {
        let cdt = c * dt;
        self.g_tt * cdt * cdt
            + self.g_rr * dr * dr
            + self.g_thth * dtheta * dtheta
            + self.g_phph * dphi * dphi
            + self.g_tph * cdt * dphi
            + self.g_tr * cdt * dr
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.g_tt, self.g_rr, self.g_thth, self.g_phph, self.g_tph, self.g_tr]
    }

    /// Largest componentwise relative difference, with `floor` guarding
    /// vanishing components.
    pub fn max_rel_diff(&self, other: &Self, floor: f64) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

/// Spherical components of a vector field at one point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FieldVector {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl FieldVector {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    pub fn to_cartesian(&self, x: &SphericalPoint) -> Vector3<f64> {
        self.r * x.e_r() + self.theta * x.e_theta() + self.phi * x.e_phi()
    }

    pub fn from_cartesian(v: &Vector3<f64>, x: &SphericalPoint) -> Self {
        Self::new(v.dot(&x.e_r()), v.dot(&x.e_theta()), v.dot(&x.e_phi()))
    }

    pub fn norm(&self) -> f64 {
        (self.r * self.r + self.theta * self.theta + self.phi * self.phi).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.r, s * self.theta, s * self.phi)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.r - o.r, self.theta - o.theta, self.phi - o.phi)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.r + o.r, self.theta + o.theta, self.phi + o.phi)
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.theta.is_finite() && self.phi.is_finite()
    }
}

struct KerrScalars {
    sigma: f64,
    delta: f64,
    sin2: f64,
}

fn kerr_scalars(p: &KerrParams, x: &SphericalPoint) -> Result<KerrScalars> {
    let (st, ct) = x.theta.sin_cos();
    let a2 = p.a * p.a;
    let r2 = x.r * x.r;
    let sigma = r2 + a2 * ct * ct;
    let delta = r2 + a2 - 2.0 * p.gravitational_length() * x.r;
    if delta.abs() <= 1e-14 * (r2 + a2) || sigma == 0.0 {
        return Err(Error::Horizon { r: x.r, delta });
    }
    Ok(KerrScalars { sigma, delta, sin2: st * st })
}

/// Kerr exterior metric in the fixed frame.
pub fn kerr_metric(p: &KerrParams, x: &SphericalPoint) -> Result<MetricComponents> {
    let KerrScalars { sigma, delta, sin2 } = kerr_scalars(p, x)?;
    let gm_r = p.gravitational_length() * x.r; // GMr/c²
    Ok(MetricComponents {
        g_tt: 1.0 - 2.0 * gm_r / sigma,
        g_rr: -sigma / delta,
        g_thth: -sigma,
        g_phph: -sin2 * (2.0 * p.a * p.a * sin2 * gm_r / sigma + x.r * x.r + p.a * p.a),
        g_tph: 2.0 * p.a * sin2 * gm_r / sigma,
        g_tr: 0.0,
    })
}

/// Kerr metric after dr = dr′ + v dt, dφ′ = dφ + ω dt (θ and t unchanged).
///
/// The substitution is exact: no a²/r² or v/(ωr) terms are dropped.
pub fn rotating_metric(p: &KerrParams, f: &RotFrame, x: &SphericalPoint) -> Result<MetricComponents> {
    let k = kerr_metric(p, x)?;
    let beta_v = f.v / p.c;
    let beta_w = f.omega / p.c;
    Ok(MetricComponents {
        g_tt: k.g_tt + k.g_rr * beta_v * beta_v + k.g_phph * beta_w * beta_w - k.g_tph * beta_w,
        g_rr: k.g_rr,
        g_thth: k.g_thth,
        g_phph: k.g_phph,
        g_tph: k.g_tph - 2.0 * k.g_phph * beta_w,
        g_tr: 2.0 * k.g_rr * beta_v,
    })
}

/// Exact dt′·dφ′ coefficient of the rotating metric (per dt, not per c·dt).
pub fn cross_term_exact(p: &KerrParams, f: &RotFrame, x: &SphericalPoint) -> Result<f64> {
    Ok(p.c * rotating_metric(p, f, x)?.g_tph)
}

/// The dt′·dφ′ coefficient with all a²/r² corrections dropped:
/// 2aGM sin²θ/(c r) + 2ω r² sin²θ.
pub fn cross_term_approx(p: &KerrParams, f: &RotFrame, x: &SphericalPoint) -> f64 {
    let sin2 = x.theta.sin().powi(2);
    2.0 * p.a * p.g * p.mass * sin2 / (p.c * x.r) + 2.0 * f.omega * x.r * x.r * sin2
}

/// Gravitomagnetic potential (A_r, A_θ, A_φ) of the rotating frame.
pub fn gravitomagnetic_potential(p: &KerrParams, f: &RotFrame, x: &SphericalPoint) -> FieldVector {
    let st = x.theta.sin();
    let a_phi = 2.0 * p.a * p.g * p.mass * st / (p.c * x.r * x.r) + 2.0 * f.omega * x.r * st;
    FieldVector::new(-2.0 * f.v, 0.0, a_phi)
}

/// Central-difference curl in orthonormal spherical components.
///
/// `h` is a length: the radial step is `h`, angular steps are `h / r`.
pub fn curl_spherical<F>(field: F, x: &SphericalPoint, h: f64) -> Result<FieldVector>
where
    F: Fn(&SphericalPoint) -> FieldVector,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("finite-difference step must be positive, got {h}")));
    }
    let dr = h;
    let dang = h / x.r;
    if x.r - 2.0 * dr <= 0.0 {
        return Err(Error::domain(format!("r = {} is within 2h of the origin", x.r)));
    }
    if x.theta - 2.0 * dang <= 0.0 || x.theta + 2.0 * dang >= std::f64::consts::PI {
        return Err(Error::domain(format!(
            "θ = {} is within 2h/r of the polar axis",
            x.theta
        )));
    }
    let (r, st) = (x.r, x.theta.sin());

    let rp = x.shifted(dr, 0.0, 0.0);
    let rm = x.shifted(-dr, 0.0, 0.0);
    let tp = x.shifted(0.0, dang, 0.0);
    let tm = x.shifted(0.0, -dang, 0.0);
    let pp = x.shifted(0.0, 0.0, dang);
    let pm = x.shifted(0.0, 0.0, -dang);
    let (f_rp, f_rm) = (field(&rp), field(&rm));
    let (f_tp, f_tm) = (field(&tp), field(&tm));
    let (f_pp, f_pm) = (field(&pp), field(&pm));

    let d_theta_sin_aphi =
        (tp.theta.sin() * f_tp.phi - tm.theta.sin() * f_tm.phi) / (2.0 * dang);
    let d_theta_ar = (f_tp.r - f_tm.r) / (2.0 * dang);
    let d_phi_atheta = (f_pp.theta - f_pm.theta) / (2.0 * dang);
    let d_phi_ar = (f_pp.r - f_pm.r) / (2.0 * dang);
    let d_r_r_aphi = (rp.r * f_rp.phi - rm.r * f_rm.phi) / (2.0 * dr);
    let d_r_r_atheta = (rp.r * f_rp.theta - rm.r * f_rm.theta) / (2.0 * dr);

    let curl = FieldVector::new(
        (d_theta_sin_aphi - d_phi_atheta) / (r * st),
        (d_phi_ar / st - d_r_r_aphi) / r,
        (d_r_r_atheta - d_theta_ar) / r,
    );
    if !curl.is_finite() {
        return Err(Error::domain("curl evaluation produced non-finite values"));
    }
    Ok(curl)
}

/// B̄ = −½ ∇×Ā with step `rel_step·r`.
pub fn gravitomagnetic_field_with_step(
    p: &KerrParams,
    f: &RotFrame,
    x: &SphericalPoint,
    rel_step: f64,
) -> Result<FieldVector> {
    let curl = curl_spherical(|y| gravitomagnetic_potential(p, f, y), x, rel_step * x.r)?;
    Ok(curl.scale(-0.5))
}

/// B̄ = −½ ∇×Ā at the default step.
pub fn gravitomagnetic_field(p: &KerrParams, f: &RotFrame, x: &SphericalPoint) -> Result<FieldVector> {
    gravitomagnetic_field_with_step(p, f, x, tolerance::CURL_REL_STEP)
}

/// Closed form of the frame-induced field: (−2ω cosθ, 2ω sinθ, 0).
pub fn frame_field_analytic(f: &RotFrame, x: &SphericalPoint) -> FieldVector {
    let (st, ct) = x.theta.sin_cos();
    FieldVector::new(-2.0 * f.omega * ct, 2.0 * f.omega * st, 0.0)
}

/// Unit-prefactor dipole shape ā/r³ − 3(ā·r̄)r̄/r⁵ for ā = a ẑ, in spherical
/// components: a(−2cosθ, −sinθ, 0)/r³.
pub fn dipole_shape(a: f64, x: &SphericalPoint) -> FieldVector {
    let (st, ct) = x.theta.sin_cos();
    let r3 = x.r.powi(3);
    FieldVector::new(-2.0 * a * ct / r3, -a * st / r3, 0.0)
}

/// F = m v̄ × B̄ with B̄ converted to Cartesian at `x`.
pub fn lorentz_force(
    mass: f64,
    velocity: &Vector3<f64>,
    b: &FieldVector,
    x: &SphericalPoint,
) -> Vector3<f64> {
    mass * velocity.cross(&b.to_cartesian(x))
}

/// 2m v̄ × ω̄.
pub fn coriolis_force(mass: f64, velocity: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    2.0 * mass * velocity.cross(omega)
}

/// Least-squares dipole fit of a sampled field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleFit {
    /// K in K·(ā/r³ − 3(ā·r̄)r̄/r⁵).
    pub k: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    /// Exponent p of |B| ∝ r^(−p), pooled over the angular rows.
    pub falloff_exponent: f64,
}

/// Fits `K` in B ≈ K·dipole_shape(a) over the given samples. Samples should
/// cover at least two radii at each polar angle for the falloff exponent.
pub fn fit_dipole(a: f64, samples: &[(SphericalPoint, FieldVector)]) -> Result<DipoleFit> {
    if samples.len() < 2 || a == 0.0 {
        return Err(Error::usage("dipole fit needs a ≠ 0 and at least two samples"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, b) in samples {
        let d = dipole_shape(a, x);
        num += b.r * d.r + b.theta * d.theta + b.phi * d.phi;
        den += d.r * d.r + d.theta * d.theta + d.phi * d.phi;
    }
    let k = num / den;

    let n = samples.len() as f64;
    let mean = samples
        .iter()
        .fold(FieldVector::default(), |acc, (_, b)| acc.add(b))
        .scale(1.0 / n);
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (x, b) in samples {
        ss_res += b.sub(&dipole_shape(a, x).scale(k)).norm().powi(2);
        ss_tot += b.sub(&mean).norm().powi(2);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    // Pooled within-row regression of ln|B| on ln r; rows share θ.
    let mut rows: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for (x, b) in samples {
        let mag = b.norm();
        if mag <= 0.0 {
            continue;
        }
        let key = x.theta;
        let entry = (x.r.ln(), mag.ln());
        match rows.iter_mut().find(|(t, _)| (*t - key).abs() <= 1e-12) {
            Some((_, v)) => v.push(entry),
            None => rows.push((key, vec![entry])),
        }
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (_, pts) in rows.iter().filter(|(_, v)| v.len() >= 2) {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        for (lx, ly) in pts {
            sxy += (lx - mx) * (ly - my);
            sxx += (lx - mx) * (lx - mx);
        }
    }
    let falloff_exponent = if sxx > 0.0 { -sxy / sxx } else { f64::NAN };

    Ok(DipoleFit { k, r_squared, falloff_exponent })
}

/// Test particle used for the force columns of a grid evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParticleVelocity {
    /// Speed along e_r at each grid point.
    Radial(f64),
    /// Fixed Cartesian velocity.
    Cartesian(Vector3<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl FieldGrid {
    /// Grid-major order: r outermost, then θ, then φ.
    pub fn points(&self) -> Result<Vec<SphericalPoint>> {
        let mut pts = Vec::with_capacity(self.radii.len() * self.thetas.len() * self.phis.len());
        for &r in &self.radii {
            for &t in &self.thetas {
                for &p in &self.phis {
                    pts.push(SphericalPoint::new(r, t, p)?);
                }
            }
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub x: SphericalPoint,
    pub b: FieldVector,
    pub force: Vector3<f64>,
}

/// Evaluates B̄ and the force on a test particle over a grid. Rows come back
/// in grid-major order regardless of evaluation order.
pub fn evaluate_grid(
    p: &KerrParams,
    f: &RotFrame,
    grid: &FieldGrid,
    rel_step: f64,
    mass: f64,
    velocity: ParticleVelocity,
) -> Result<Vec<GridRow>> {
    grid.points()?
        .par_iter()
        .map(|x| {
            let b = gravitomagnetic_field_with_step(p, f, x, rel_step)?;
            let v = match velocity {
                ParticleVelocity::Radial(s) => s * x.e_r(),
                ParticleVelocity::Cartesian(v) => v,
            };
            Ok(GridRow { x: *x, b, force: lorentz_force(mass, &v, &b, x) })
        })
        .collect()
}
