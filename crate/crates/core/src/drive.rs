//! Time-dependent rotation vector ω̄(t) = ω0(t)[sinθ cosφ, sinθ sinφ, cosθ]
//! and the spin-rotation Hamiltonian H = ½ ω̄·σ̄ (ħ = 1).

use std::io::Read;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::su2::{pauli, Mat2, Pauli, C64};

/// Instantaneous drive values and their time derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DriveSample {
    pub omega0: f64,
    pub theta: f64,
    pub phi: f64,
    pub d_omega0: f64,
    pub d_theta: f64,
    pub d_phi: f64,
}

impl DriveSample {
    /// Unit axis n̂ = ω̄/ω0.
    pub fn axis(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// dn̂/dt.
    pub fn axis_rate(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let e_theta = Vector3::new(ct * cp, ct * sp, -st);
        let e_phi = Vector3::new(-sp, cp, 0.0);
        self.d_theta * e_theta + self.d_phi * st * e_phi
    }
}

/// How a drive evolves in time. Angles are radians, rates rad/s.
#[derive(Clone, Debug, PartialEq)]
pub enum DriveSpec {
    Constant { omega0: f64, theta0: f64, phi0: f64 },
    /// Axis precessing on a cone: φ(t) = φ0 + ν t.
    Conical { omega0: f64, theta0: f64, nu: f64, phi0: f64 },
    /// Conical with ω0(t) = ω0·(1 + ε sin(ν_m t)).
    Modulated { omega0: f64, theta0: f64, nu: f64, phi0: f64, epsilon: f64, nu_m: f64 },
    Sampled(SampledDrive),
}

fn check_angle(name: &str, theta: f64) -> Result<()> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::domain(format!("{name} must lie in [0, π], got {theta}")));
    }
    Ok(())
}

fn check_finite(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("drive parameters must be finite"))
    }
}

impl DriveSpec {
    pub fn constant(omega0: f64, theta0: f64, phi0: f64) -> Result<Self> {
        let d = DriveSpec::Constant { omega0, theta0, phi0 };
        d.validate()?;
        Ok(d)
    }

    pub fn conical(omega0: f64, theta0: f64, nu: f64, phi0: f64) -> Result<Self> {
        let d = DriveSpec::Conical { omega0, theta0, nu, phi0 };
        d.validate()?;
        Ok(d)
    }

    pub fn modulated(
        omega0: f64,
        theta0: f64,
        nu: f64,
        phi0: f64,
        epsilon: f64,
        nu_m: f64,
    ) -> Result<Self> {
        let d = DriveSpec::Modulated { omega0, theta0, nu, phi0, epsilon, nu_m };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DriveSpec::Constant { omega0, theta0, phi0 } => {
                check_finite(&[omega0, theta0, phi0])?;
                check_omega(omega0)?;
                check_angle("theta0", theta0)
            }
            DriveSpec::Conical { omega0, theta0, nu, phi0 } => {
                check_finite(&[omega0, theta0, nu, phi0])?;
                check_omega(omega0)?;
                check_angle("theta0", theta0)
            }
            DriveSpec::Modulated { omega0, theta0, nu, phi0, epsilon, nu_m } => {
                check_finite(&[omega0, theta0, nu, phi0, epsilon, nu_m])?;
                check_omega(omega0)?;
                if epsilon.abs() > 1.0 {
                    return Err(Error::domain(format!(
                        "modulation depth |ε| must not exceed 1 (ω0(t) ≥ 0), got {epsilon}"
                    )));
                }
                check_angle("theta0", theta0)
            }
            DriveSpec::Sampled(_) => Ok(()),
        }
    }

    /// Time span on which `sample` is defined, if bounded.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            DriveSpec::Sampled(s) => Some(s.span()),
            _ => None,
        }
    }

    /// Nominal ω0 used to define one drive period 2π/ω0.
    pub fn nominal_omega0(&self) -> f64 {
        match self {
            DriveSpec::Constant { omega0, .. }
            | DriveSpec::Conical { omega0, .. }
            | DriveSpec::Modulated { omega0, .. } => *omega0,
            DriveSpec::Sampled(s) => s.mean_omega0(),
        }
    }

    /// Axis precession rate ν for analytic cones, zero for a constant axis.
    pub fn precession_rate(&self) -> Option<f64> {
        match self {
            DriveSpec::Constant { .. } => Some(0.0),
            DriveSpec::Conical { nu, .. } | DriveSpec::Modulated { nu, .. } => Some(*nu),
            DriveSpec::Sampled(_) => None,
        }
    }
}

fn check_omega(omega0: f64) -> Result<()> {
    if omega0 < 0.0 {
        return Err(Error::domain(format!("omega0 must be non-negative, got {omega0}")));
    }
    Ok(())
}

/// Evaluates the drive at time `t`.
pub fn sample(spec: &DriveSpec, t: f64) -> Result<DriveSample> {
    match *spec {
        DriveSpec::Constant { omega0, theta0, phi0 } => Ok(DriveSample {
            omega0,
            theta: theta0,
            phi: phi0,
            ..Default::default()
        }),
        DriveSpec::Conical { omega0, theta0, nu, phi0 } => Ok(DriveSample {
            omega0,
            theta: theta0,
            phi: phi0 + nu * t,
            d_phi: nu,
            ..Default::default()
        }),
        DriveSpec::Modulated { omega0, theta0, nu, phi0, epsilon, nu_m } => {
            let (s, c) = (nu_m * t).sin_cos();
            Ok(DriveSample {
                omega0: omega0 * (1.0 + epsilon * s),
                theta: theta0,
                phi: phi0 + nu * t,
                d_omega0: omega0 * epsilon * nu_m * c,
                d_theta: 0.0,
                d_phi: nu,
            })
        }
        DriveSpec::Sampled(ref table) => table.sample(t),
    }
}

/// ω̄ = ω0 n̂.
pub fn omega_vector(s: &DriveSample) -> Vector3<f64> {
    s.omega0 * s.axis()
}

/// H = ω0{¼ sinθ e^{−iφ} σ₊ + ¼ sinθ e^{iφ} σ₋ + ½ cosθ σ3}.
pub fn hamiltonian(s: &DriveSample) -> Mat2 {
    let (st, ct) = s.theta.sin_cos();
    let plus = C64::from_polar(0.25 * st, -s.phi) * pauli(Pauli::Plus);
    let minus = C64::from_polar(0.25 * st, s.phi) * pauli(Pauli::Minus);
    s.omega0 * (plus + minus + (0.5 * ct) * pauli(Pauli::Z))
}

/// Natural cubic spline through (x_i, y_i).
#[derive(Clone, Debug, PartialEq)]
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for j in 1..k {
                let lower = x[j + 1] - x[j];
                let w = lower / diag[j - 1];
                diag[j] -= w * upper[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    /// Value and first derivative at `t`, which must lie within the knots.
    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let deriv = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, deriv)
    }
}

/// One row of a sampled drive table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveKnot {
    pub t: f64,
    pub omega0: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Tabulated drive, interpolated with natural cubic splines per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledDrive {
    knots: Vec<DriveKnot>,
    omega0: NaturalSpline,
    theta: NaturalSpline,
    phi: NaturalSpline,
}

impl SampledDrive {
    pub fn new(knots: Vec<DriveKnot>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::domain("sampled drive needs at least two rows"));
        }
        for (i, k) in knots.iter().enumerate() {
            if ![k.t, k.omega0, k.theta, k.phi].iter().all(|v| v.is_finite()) {
                return Err(Error::domain(format!("row {i}: non-finite value")));
            }
            if k.omega0 < 0.0 {
                return Err(Error::domain(format!("row {i}: omega0 must be non-negative")));
            }
            check_angle(&format!("row {i}: theta"), k.theta)?;
            if i > 0 && k.t <= knots[i - 1].t {
                return Err(Error::domain(format!("row {i}: t must be strictly increasing")));
            }
        }
        let t: Vec<f64> = knots.iter().map(|k| k.t).collect();
        let col = |f: fn(&DriveKnot) -> f64| knots.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            omega0: NaturalSpline::new(&t, &col(|k| k.omega0)),
            theta: NaturalSpline::new(&t, &col(|k| k.theta)),
            phi: NaturalSpline::new(&t, &col(|k| k.phi)),
            knots,
        })
    }

    /// Reads a table with header `t,omega0,theta,phi`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::domain(format!("drive table: {e}")))?
            .clone();
        let expected = ["t", "omega0", "theta", "phi"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::domain(format!(
                "drive table header must be `t,omega0,theta,phi`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut knots = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::domain(format!("drive table: {e}")))?;
            let line = i + 2;
            let mut vals = [0.0; 4];
            if rec.len() != 4 {
                return Err(Error::domain(format!("drive table line {line}: expected 4 fields")));
            }
            for (slot, field) in vals.iter_mut().zip(rec.iter()) {
                *slot = field.parse().map_err(|_| {
                    Error::domain(format!("drive table line {line}: invalid number {field:?}"))
                })?;
            }
            knots.push(DriveKnot { t: vals[0], omega0: vals[1], theta: vals[2], phi: vals[3] });
        }
        Self::new(knots)
    }

    pub fn knots(&self) -> &[DriveKnot] {
        &self.knots
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0].t, self.knots[self.knots.len() - 1].t)
    }

    fn mean_omega0(&self) -> f64 {
        self.knots.iter().map(|k| k.omega0).sum::<f64>() / self.knots.len() as f64
    }

    pub fn sample(&self, t: f64) -> Result<DriveSample> {
        let (start, end) = self.span();
        if !(start..=end).contains(&t) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let (omega0, d_omega0) = self.omega0.eval(t);
        let (theta, d_theta) = self.theta.eval(t);
        let (phi, d_phi) = self.phi.eval(t);
        Ok(DriveSample { omega0, theta, phi, d_omega0, d_theta, d_phi })
    }
}
