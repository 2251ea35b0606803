//! Typed scenario configurations built on top of [`crate::ini`].

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use spinphase_core::drive::SampledDrive;
use spinphase_core::gravitomag::{FieldGrid, KerrParams, ParticleVelocity, RotFrame};
use spinphase_core::lr::{AuxState, Initializer};
use spinphase_core::{tolerance, DriveSpec, Spinor, TimeGrid, C64};

use crate::ini::{Ini, IniError, Section};

/// Failure while reading or validating a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn wrap(path: &Path) -> impl Fn(IniError) -> ConfigError + '_ {
    move |e| ConfigError { path: path.to_path_buf(), line: e.line, message: e.message }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriveKind {
    Constant,
    Conical,
    Modulated,
    Sampled,
}

/// Drive parameters as written in the file; sweeps rebuild the spec after
/// overriding one of them.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveParams {
    pub kind: DriveKind,
    pub omega0: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub nu_m: f64,
    pub table: Option<SampledDrive>,
}

impl DriveParams {
    pub fn build(&self) -> spinphase_core::Result<DriveSpec> {
        match self.kind {
            DriveKind::Constant => DriveSpec::constant(self.omega0, self.theta0, self.phi0),
            DriveKind::Conical => DriveSpec::conical(self.omega0, self.theta0, self.nu, self.phi0),
            DriveKind::Modulated => {
                DriveSpec::modulated(self.omega0, self.theta0, self.nu, self.phi0, self.epsilon, self.nu_m)
            }
            DriveKind::Sampled => Ok(DriveSpec::Sampled(self.table.clone().expect("table loaded at parse time"))),
        }
    }

    /// Overrides a named parameter; returns false for unknown names.
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "omega0" => &mut self.omega0,
            "theta0" => &mut self.theta0,
            "phi0" => &mut self.phi0,
            "nu" => &mut self.nu,
            "epsilon" => &mut self.epsilon,
            "nu_m" => &mut self.nu_m,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialKind {
    Orthogonal,
    Aligned,
    Custom { lambda0: f64, gamma0: f64 },
}

impl InitialKind {
    pub fn initializer(&self) -> Initializer {
        match *self {
            InitialKind::Orthogonal => Initializer::Orthogonal,
            InitialKind::Aligned => Initializer::Aligned,
            InitialKind::Custom { lambda0, gamma0 } => Initializer::Custom(AuxState::new(lambda0, gamma0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeEnd {
    Absolute(f64),
    /// Multiples of the drive period 2π/ω0.
    Periods(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeSpan {
    pub t0: f64,
    pub end: TimeEnd,
    pub nodes: usize,
}

impl TimeSpan {
    pub fn grid(&self, spec: &DriveSpec) -> spinphase_core::Result<TimeGrid> {
        let t1 = match self.end {
            TimeEnd::Absolute(t1) => t1,
            TimeEnd::Periods(n) => {
                let w = spec.nominal_omega0();
                if !(w > 0.0) {
                    return Err(spinphase_core::Error::Domain("periods need a positive omega0".into()));
                }
                self.t0 + n * TAU / w
            }
        };
        TimeGrid::new(self.t0, t1, self.nodes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
    pub substeps: usize,
    pub fidelity_threshold: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rtol: tolerance::AUX_RTOL,
            atol: tolerance::AUX_ATOL,
            substeps: tolerance::DIRECT_SUBSTEPS,
            fidelity_threshold: tolerance::FIDELITY_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveConfig {
    pub name: String,
    pub drive: DriveParams,
    pub initial: InitialKind,
    pub psi0: Spinor,
    pub time: TimeSpan,
    pub tolerance: ToleranceSpec,
    pub output_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Evolve,
    Berry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
    pub mode: SweepMode,
    /// Reference value for the linear-response fit.
    pub baseline: Option<f64>,
    pub nodes_per_larmor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: EvolveConfig,
    pub sweep: SweepSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfig {
    pub name: String,
    pub body: KerrParams,
    pub frame: RotFrame,
    pub grid: FieldGrid,
    pub rel_step: f64,
    pub mass: f64,
    pub velocity: ParticleVelocity,
    pub output_dir: PathBuf,
}

fn read(path: &Path) -> Result<Ini, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    Ini::parse(&text).map_err(wrap(path))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn scenario_name(ini: &Ini) -> Result<String, IniError> {
    let s = ini.require_section("scenario")?;
    s.check_keys(&["name"])?;
    let name = s.str("name")?;
    let e = s.entry("name").expect("present");
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
        return Err(IniError::at(e.line, format!("scenario name '{name}' must be a plain file stem")));
    }
    Ok(name.to_string())
}

fn output_dir(ini: &Ini, dir: &Path) -> Result<PathBuf, IniError> {
    match ini.section("output") {
        Some(s) => {
            s.check_keys(&["dir"])?;
            Ok(dir.join(s.str("dir")?))
        }
        None => Ok(dir.join("out")),
    }
}

fn check_angle(s: &Section, key: &str, v: f64) -> Result<(), IniError> {
    if !(0.0..=std::f64::consts::PI).contains(&v) {
        let line = s.entry(key).map_or(s.line, |e| e.line);
        return Err(IniError::at(line, format!("{key} must lie in [0, pi], got {v}")));
    }
    Ok(())
}

fn parse_drive(ini: &Ini, dir: &Path) -> Result<DriveParams, IniError> {
    let s = ini.require_section("drive")?;
    s.check_keys(&["kind", "omega0", "theta0", "phi0", "nu", "epsilon", "nu_m", "file"])?;
    let kind_entry = s
        .entry("kind")
        .ok_or_else(|| IniError::at(s.line, "[drive] is missing key 'kind'"))?;
    let kind = match kind_entry.value.as_str() {
        "constant" => DriveKind::Constant,
        "conical" => DriveKind::Conical,
        "modulated" => DriveKind::Modulated,
        "sampled" => DriveKind::Sampled,
        other => {
            return Err(IniError::at(
                kind_entry.line,
                format!("unknown drive kind '{other}' (expected constant, conical, modulated or sampled)"),
            ))
        }
    };
    let mut p = DriveParams {
        kind,
        omega0: 0.0,
        theta0: 0.0,
        phi0: s.f64_or("phi0", 0.0)?,
        nu: 0.0,
        epsilon: 0.0,
        nu_m: 0.0,
        table: None,
    };
    if kind == DriveKind::Sampled {
        let e = s.entry("file").ok_or_else(|| IniError::at(s.line, "[drive] is missing key 'file'"))?;
        let path = dir.join(&e.value);
        let file = fs::File::open(&path)
            .map_err(|err| IniError::at(e.line, format!("cannot open drive table {}: {err}", path.display())))?;
        let table = SampledDrive::from_csv(file)
            .map_err(|err| IniError::at(e.line, format!("drive table {}: {err}", path.display())))?;
        p.omega0 = table.knots().iter().map(|k| k.omega0).sum::<f64>() / table.knots().len() as f64;
        p.table = Some(table);
        return Ok(p);
    }
    p.omega0 = s.f64("omega0")?;
    p.theta0 = s.f64("theta0")?;
    check_angle(s, "theta0", p.theta0)?;
    if p.omega0 <= 0.0 {
        let line = s.entry("omega0").map_or(s.line, |e| e.line);
        return Err(IniError::at(line, "omega0 must be positive"));
    }
    if matches!(kind, DriveKind::Conical | DriveKind::Modulated) {
        p.nu = s.f64("nu")?;
    }
    if kind == DriveKind::Modulated {
        p.epsilon = s.f64("epsilon")?;
        p.nu_m = s.f64("nu_m")?;
    }
    Ok(p)
}

fn parse_initial(ini: &Ini) -> Result<(InitialKind, Spinor), IniError> {
    let Some(s) = ini.section("initial") else {
        return Ok((InitialKind::Orthogonal, Spinor::basis_up()));
    };
    s.check_keys(&["invariant", "lambda0", "gamma0", "psi"])?;
    let kind = match s.entry("invariant") {
        None => InitialKind::Orthogonal,
        Some(e) => match e.value.as_str() {
            "orthogonal" => InitialKind::Orthogonal,
            "aligned" => InitialKind::Aligned,
            "custom" => InitialKind::Custom { lambda0: s.f64("lambda0")?, gamma0: s.f64("gamma0")? },
            other => {
                return Err(IniError::at(
                    e.line,
                    format!("unknown invariant initializer '{other}' (expected orthogonal, aligned or custom)"),
                ))
            }
        },
    };
    let psi = match s.entry("psi") {
        None => Spinor::basis_up(),
        Some(e) => {
            let v = crate::ini::parse_f64_list(e)?;
            if v.len() != 4 {
                return Err(IniError::at(e.line, "psi needs four numbers: re_up, im_up, re_down, im_down"));
            }
            let psi = Spinor::new(C64::new(v[0], v[1]), C64::new(v[2], v[3]));
            if (psi.norm() - 1.0).abs() > tolerance::UNIT_SPINOR {
                return Err(IniError::at(e.line, format!("psi must have unit norm, got {}", psi.norm())));
            }
            psi
        }
    };
    Ok((kind, psi))
}

fn parse_time(ini: &Ini) -> Result<TimeSpan, IniError> {
    let s = ini.require_section("time")?;
    s.check_keys(&["t0", "t1", "periods", "nodes"])?;
    let t0 = s.f64_or("t0", 0.0)?;
    let end = match (s.opt_f64("t1")?, s.opt_f64("periods")?) {
        (Some(t1), None) => {
            if t1 <= t0 {
                return Err(IniError::at(s.entry("t1").expect("present").line, "t1 must exceed t0"));
            }
            TimeEnd::Absolute(t1)
        }
        (None, Some(n)) => {
            if n <= 0.0 {
                return Err(IniError::at(s.entry("periods").expect("present").line, "periods must be positive"));
            }
            TimeEnd::Periods(n)
        }
        (Some(_), Some(_)) => return Err(IniError::at(s.line, "[time] takes either t1 or periods, not both")),
        (None, None) => return Err(IniError::at(s.line, "[time] is missing key 't1' (or 'periods')")),
    };
    let nodes = s.usize("nodes")?;
    if nodes < 5 {
        return Err(IniError::at(s.entry("nodes").expect("present").line, "nodes must be at least 5"));
    }
    Ok(TimeSpan { t0, end, nodes })
}

fn parse_tolerance(ini: &Ini) -> Result<ToleranceSpec, IniError> {
    let mut t = ToleranceSpec::default();
    let Some(s) = ini.section("tolerance") else {
        return Ok(t);
    };
    s.check_keys(&["rtol", "atol", "substeps", "fidelity_threshold"])?;
    t.rtol = s.f64_or("rtol", t.rtol)?;
    t.atol = s.f64_or("atol", t.atol)?;
    t.substeps = s.opt_usize("substeps")?.unwrap_or(t.substeps);
    t.fidelity_threshold = s.f64_or("fidelity_threshold", t.fidelity_threshold)?;
    if !(t.rtol > 0.0) || t.atol < 0.0 || t.substeps == 0 {
        return Err(IniError::at(s.line, "tolerances must be positive and substeps at least 1"));
    }
    Ok(t)
}

fn parse_evolve_sections(ini: &Ini, dir: &Path) -> Result<EvolveConfig, IniError> {
    let name = scenario_name(ini)?;
    let drive = parse_drive(ini, dir)?;
    let (initial, psi0) = parse_initial(ini)?;
    Ok(EvolveConfig {
        name,
        drive,
        initial,
        psi0,
        time: parse_time(ini)?,
        tolerance: parse_tolerance(ini)?,
        output_dir: output_dir(ini, dir)?,
    })
}

const EVOLVE_SECTIONS: [&str; 6] = ["scenario", "drive", "initial", "time", "tolerance", "output"];

pub fn load_evolve(path: &Path) -> Result<EvolveConfig, ConfigError> {
    let ini = read(path)?;
    ini.check_sections(&EVOLVE_SECTIONS).map_err(wrap(path))?;
    parse_evolve_sections(&ini, &base_dir(path)).map_err(wrap(path))
}

pub fn load_sweep(path: &Path) -> Result<SweepConfig, ConfigError> {
    let ini = read(path)?;
    let mut allowed = EVOLVE_SECTIONS.to_vec();
    allowed.push("sweep");
    ini.check_sections(&allowed).map_err(wrap(path))?;
    let base = parse_evolve_sections(&ini, &base_dir(path)).map_err(wrap(path))?;
    let sweep = parse_sweep(&ini, &base).map_err(wrap(path))?;
    Ok(SweepConfig { base, sweep })
}

fn parse_sweep(ini: &Ini, base: &EvolveConfig) -> Result<SweepSpec, IniError> {
    let s = ini.require_section("sweep")?;
    s.check_keys(&["parameter", "values", "mode", "baseline", "nodes_per_larmor"])?;
    let mode = match s.entry("mode").map(|e| (e.value.as_str(), e.line)) {
        None | Some(("evolve", _)) => SweepMode::Evolve,
        Some(("berry", _)) => SweepMode::Berry,
        Some((other, line)) => {
            return Err(IniError::at(line, format!("unknown sweep mode '{other}' (expected evolve or berry)")))
        }
    };
    let parameter = s.str("parameter")?.to_string();
    let p_line = s.entry("parameter").expect("present").line;
    let values = s.f64_list("values")?;
    let v_line = s.entry("values").expect("present").line;
    if values.is_empty() {
        return Err(IniError::at(v_line, "sweep values list is empty"));
    }
    let mut probe = base.drive.clone();
    let known = probe.set(&parameter, 0.0) || matches!(parameter.as_str(), "lambda0" | "gamma0");
    if !known {
        return Err(IniError::at(p_line, format!("'{parameter}' cannot be swept")));
    }
    if mode == SweepMode::Berry {
        if parameter != "nu" {
            return Err(IniError::at(p_line, "berry sweeps vary 'nu'"));
        }
        if base.drive.kind != DriveKind::Conical {
            return Err(IniError::at(p_line, "berry sweeps need a conical drive"));
        }
    }
    if base.drive.kind == DriveKind::Sampled && !matches!(parameter.as_str(), "lambda0" | "gamma0") {
        return Err(IniError::at(p_line, "sampled drives only allow sweeping lambda0 or gamma0"));
    }
    if matches!(parameter.as_str(), "lambda0" | "gamma0") && !matches!(base.initial, InitialKind::Custom { .. }) {
        return Err(IniError::at(p_line, "sweeping lambda0 or gamma0 needs invariant = custom"));
    }
    let nodes_per_larmor = s.opt_usize("nodes_per_larmor")?.unwrap_or(64);
    Ok(SweepSpec { parameter, values, mode, baseline: s.opt_f64("baseline")?, nodes_per_larmor })
}

fn linspace(s: &Section, prefix: &str, min_default: Option<(f64, f64)>) -> Result<(f64, f64, usize), IniError> {
    let count = s.usize(&format!("{prefix}_count"))?;
    let (lo, hi) = match min_default {
        Some((a, b)) => (s.f64_or(&format!("{prefix}_min"), a)?, s.f64_or(&format!("{prefix}_max"), b)?),
        None => (s.f64(&format!("{prefix}_min"))?, s.f64(&format!("{prefix}_max"))?),
    };
    if count == 0 || (count > 1 && hi <= lo) || (count == 1 && hi < lo) {
        return Err(IniError::at(s.line, format!("{prefix} range needs count ≥ 1 and {prefix}_max > {prefix}_min")));
    }
    Ok((lo, hi, count))
}

fn spaced(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            if i + 1 == n {
                hi
            } else if log {
                lo * (hi / lo).powf(u)
            } else {
                lo + u * (hi - lo)
            }
        })
        .collect()
}

pub fn load_field(path: &Path) -> Result<FieldConfig, ConfigError> {
    let ini = read(path)?;
    ini.check_sections(&["scenario", "body", "frame", "grid", "field", "particle", "output"])
        .map_err(wrap(path))?;
    parse_field(&ini, &base_dir(path)).map_err(wrap(path))
}

fn parse_field(ini: &Ini, dir: &Path) -> Result<FieldConfig, IniError> {
    let name = scenario_name(ini)?;
    let b = ini.require_section("body")?;
    b.check_keys(&["G", "M", "c", "a"])?;
    let body = KerrParams::new(b.f64("G")?, b.f64("M")?, b.f64("c")?, b.f64("a")?)
        .map_err(|e| IniError::at(b.line, e.to_string()))?;
    let frame = match ini.section("frame") {
        Some(f) => {
            f.check_keys(&["omega", "v"])?;
            RotFrame::new(f.f64_or("omega", 0.0)?, f.f64_or("v", 0.0)?)
        }
        None => RotFrame::default(),
    };
    let g = ini.require_section("grid")?;
    g.check_keys(&[
        "r_min", "r_max", "r_count", "theta_min", "theta_max", "theta_count", "phi", "spacing",
    ])?;
    let (r_lo, r_hi, r_n) = linspace(g, "r", None)?;
    if r_lo <= 0.0 {
        return Err(IniError::at(g.entry("r_min").map_or(g.line, |e| e.line), "r_min must be positive"));
    }
    let (t_lo, t_hi, t_n) = linspace(g, "theta", None)?;
    if t_lo <= 0.0 || t_hi >= std::f64::consts::PI {
        return Err(IniError::at(g.line, "theta range must stay strictly inside (0, pi)"));
    }
    let log = match g.entry("spacing").map(|e| (e.value.as_str(), e.line)) {
        None | Some(("log", _)) => true,
        Some(("linear", _)) => false,
        Some((other, line)) => {
            return Err(IniError::at(line, format!("unknown spacing '{other}' (expected log or linear)")))
        }
    };
    let grid = FieldGrid {
        radii: spaced(r_lo, r_hi, r_n, log),
        thetas: spaced(t_lo, t_hi, t_n, false),
        phis: vec![g.f64_or("phi", 0.0)?],
    };
    let rel_step = match ini.section("field") {
        Some(f) => {
            f.check_keys(&["step"])?;
            f.f64_or("step", tolerance::CURL_REL_STEP)?
        }
        None => tolerance::CURL_REL_STEP,
    };
    if !(rel_step > 0.0 && rel_step < 0.1) {
        return Err(IniError::general("[field] step must lie in (0, 0.1)"));
    }
    let (mass, velocity) = match ini.section("particle") {
        Some(p) => {
            p.check_keys(&["mass", "speed", "velocity"])?;
            let mass = p.f64_or("mass", 1.0)?;
            let velocity = match (p.opt_f64("speed")?, p.entry("velocity")) {
                (Some(_), Some(e)) => {
                    return Err(IniError::at(e.line, "[particle] takes either speed or velocity, not both"))
                }
                (Some(s), None) => ParticleVelocity::Radial(s),
                (None, Some(e)) => {
                    let v = crate::ini::parse_f64_list(e)?;
                    if v.len() != 3 {
                        return Err(IniError::at(e.line, "velocity needs three Cartesian components"));
                    }
                    ParticleVelocity::Cartesian(Vector3::new(v[0], v[1], v[2]))
                }
                (None, None) => ParticleVelocity::Radial(frame.v),
            };
            (mass, velocity)
        }
        None => (1.0, ParticleVelocity::Radial(frame.v)),
    };
    Ok(FieldConfig { name, body, frame, grid, rel_step, mass, velocity, output_dir: output_dir(ini, dir)? })
}
