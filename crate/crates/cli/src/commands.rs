//! The `field`, `evolve` and `sweep` commands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use spinphase_core::analysis::{
    berry_limit_check, eigenvalue_drift, linear_response, run_comparison, wrap_phase, ComparisonReport,
};
use spinphase_core::direct::{invariant_residual, DirectOptions, EvolutionResult};
use spinphase_core::gravitomag::{
    coriolis_force, evaluate_grid, fit_dipole, gravitomagnetic_field_with_step, lorentz_force, KerrParams,
    ParticleVelocity, RotFrame,
};
use spinphase_core::lr::{AuxOptions, LrSolution};
use spinphase_core::{DriveSpec, TimeGrid};

use crate::config::{self, EvolveConfig, FieldConfig, InitialKind, SweepConfig, SweepMode};
use crate::output::{ensure_dir, write_json, Csv};
use crate::CliError;

/// Command-line overrides shared by all commands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub quiet: bool,
}

impl RunOptions {
    fn out_dir(&self, configured: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| configured.to_path_buf())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

// ---------------------------------------------------------------- field

#[derive(Debug, Serialize)]
pub struct DipoleSummary {
    pub fitted_k: f64,
    pub r_squared: f64,
    pub falloff_exponent: f64,
    pub gm_over_c: f64,
    pub two_g_over_c: f64,
    pub k_over_gm_over_c: f64,
    pub k_over_two_g_over_c: f64,
}

#[derive(Debug, Serialize)]
pub struct FieldSummary {
    pub scenario: String,
    pub points: usize,
    pub rel_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_field_max_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole: Option<DipoleSummary>,
    /// max |m v̄×B̄_frame − 2m v̄×ω̄| / |2m v̄×ω̄| over the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coriolis_max_rel_deviation: Option<f64>,
    /// max |m v̄×B̄_frame − 2m ω̄×v̄| / |2m ω̄×v̄| over the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_cross_v_max_rel_deviation: Option<f64>,
    pub validity_warnings: usize,
}

pub fn cmd_field(config_path: &Path, opts: &RunOptions) -> Result<FieldSummary, CliError> {
    let cfg = config::load_field(config_path)?;
    run_field(&cfg, opts)
}

pub fn run_field(cfg: &FieldConfig, opts: &RunOptions) -> Result<FieldSummary, CliError> {
    let out = ensure_dir(&opts.out_dir(&cfg.output_dir))?;
    let rows = evaluate_grid(&cfg.body, &cfg.frame, &cfg.grid, cfg.rel_step, cfg.mass, cfg.velocity)?;

    let mut csv = Csv::with_header(&["r", "theta", "phi", "B_r", "B_theta", "B_phi", "F_x", "F_y", "F_z"]);
    for row in &rows {
        csv.row(&[
            row.x.r, row.x.theta, row.x.phi, row.b.r, row.b.theta, row.b.phi, row.force.x, row.force.y, row.force.z,
        ]);
    }
    csv.write(&out.join(format!("{}_field.csv", cfg.name)))?;

    let points = cfg.grid.points()?;
    let flat = KerrParams::flat(cfg.body.c);
    let frame_only: Vec<_> = if cfg.frame.omega != 0.0 {
        points
            .par_iter()
            .map(|x| gravitomagnetic_field_with_step(&flat, &cfg.frame, x, cfg.rel_step).map(|b| (*x, b)))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    let frame_field_max_deviation = (!frame_only.is_empty()).then(|| {
        let target = -2.0 * cfg.frame.omega_vector();
        frame_only
            .iter()
            .map(|(x, b)| (b.to_cartesian(x) - target).norm() / target.norm())
            .fold(0.0, f64::max)
    });

    let (mut coriolis_dev, mut omega_cross_dev) = (None, None);
    if !frame_only.is_empty() && cfg.mass != 0.0 {
        let omega = cfg.frame.omega_vector();
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        let mut any = false;
        for (x, b) in &frame_only {
            let v = match cfg.velocity {
                ParticleVelocity::Radial(s) => s * x.e_r(),
                ParticleVelocity::Cartesian(v) => v,
            };
            let f = lorentz_force(cfg.mass, &v, b, x);
            let cor = coriolis_force(cfg.mass, &v, &omega);
            if cor.norm() > 0.0 {
                any = true;
                d1 = d1.max((f - cor).norm() / cor.norm());
                d2 = d2.max((f + cor).norm() / cor.norm());
            }
        }
        if any {
            coriolis_dev = Some(d1);
            omega_cross_dev = Some(d2);
        }
    }

    let dipole = if cfg.body.a != 0.0 && cfg.body.g * cfg.body.mass != 0.0 {
        let still = RotFrame::default();
        let samples: Vec<_> = points
            .par_iter()
            .map(|x| gravitomagnetic_field_with_step(&cfg.body, &still, x, cfg.rel_step).map(|b| (*x, b)))
            .collect::<Result<_, _>>()?;
        let fit = fit_dipole(cfg.body.a, &samples)?;
        let gm_c = cfg.body.g * cfg.body.mass / cfg.body.c;
        let two_g_c = 2.0 * cfg.body.g / cfg.body.c;
        Some(DipoleSummary {
            fitted_k: fit.k,
            r_squared: fit.r_squared,
            falloff_exponent: fit.falloff_exponent,
            gm_over_c: gm_c,
            two_g_over_c: two_g_c,
            k_over_gm_over_c: fit.k / gm_c,
            k_over_two_g_over_c: fit.k / two_g_c,
        })
    } else {
        None
    };

    let mut warnings = 0;
    for x in &points {
        if let Some(w) = cfg.frame.validity_warning(x) {
            warnings += 1;
            if warnings == 1 {
                opts.note(&format!("warning: {w}"));
            }
        }
    }
    if warnings > 1 {
        opts.note(&format!("warning: {warnings} grid points violate |v| << omega r"));
    }

    let summary = FieldSummary {
        scenario: cfg.name.clone(),
        points: points.len(),
        rel_step: cfg.rel_step,
        frame_field_max_deviation,
        dipole,
        coriolis_max_rel_deviation: coriolis_dev,
        omega_cross_v_max_rel_deviation: omega_cross_dev,
        validity_warnings: warnings,
    };
    write_json(&out.join(format!("{}_field_summary.json", cfg.name)), &summary)?;
    opts.note(&format!("{}: {} grid points written to {}", cfg.name, points.len(), out.display()));
    Ok(summary)
}

// ---------------------------------------------------------------- evolve

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub scenario: String,
    pub min_fidelity: f64,
    pub dphi_geometric: f64,
    pub dphi_dynamical: f64,
    pub dphi_total: f64,
    pub f_max_abs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_exponent: Option<f64>,
    pub dphi_total_wrapped: f64,
    pub geometric_up: f64,
    pub dynamical_up: f64,
    pub total_up: f64,
    pub adiabaticity: f64,
    pub invariant_residual: f64,
    pub eigenvalue_drift: f64,
    pub direct_norm_drift: f64,
    pub fidelity_threshold: f64,
    pub passed: bool,
    pub t0: f64,
    pub t1: f64,
    pub nodes: usize,
    pub aux_steps: usize,
}

/// Everything produced by one evolution, before anything is written.
pub struct Evolution {
    pub lr: LrSolution,
    pub direct: EvolutionResult,
    pub report: ComparisonReport,
    pub summary: EvolveSummary,
}

fn aux_options(cfg: &EvolveConfig, opts: &RunOptions) -> AuxOptions {
    AuxOptions { rtol: opts.tol.unwrap_or(cfg.tolerance.rtol), atol: cfg.tolerance.atol }
}

fn build_drive(cfg: &EvolveConfig) -> Result<DriveSpec, CliError> {
    cfg.drive.build().map_err(|e| CliError::Invalid(format!("{}: {e}", cfg.name)))
}

fn build_grid(cfg: &EvolveConfig, spec: &DriveSpec) -> Result<TimeGrid, CliError> {
    cfg.time.grid(spec).map_err(|e| CliError::Invalid(format!("{}: {e}", cfg.name)))
}

/// Solves a scenario both ways without touching the file system.
pub fn evolve(cfg: &EvolveConfig, opts: &RunOptions) -> Result<Evolution, CliError> {
    let spec = build_drive(cfg)?;
    let grid = build_grid(cfg, &spec)?;
    let direct_opts = DirectOptions { substeps: cfg.tolerance.substeps, require_unit_norm: true };
    let (lr, direct, report) =
        run_comparison(&spec, cfg.initial.initializer(), cfg.psi0, &grid, aux_options(cfg, opts), direct_opts)?;
    let pd = report.final_phases;
    let d = report.final_difference;
    let summary = EvolveSummary {
        scenario: cfg.name.clone(),
        min_fidelity: report.min_fidelity,
        dphi_geometric: d.geometric,
        dphi_dynamical: d.dynamical,
        dphi_total: d.total,
        f_max_abs: report.f_max_abs,
        convergence_exponent: None,
        dphi_total_wrapped: wrap_phase(d.total),
        geometric_up: pd.geometric_up,
        dynamical_up: pd.dynamical_up,
        total_up: pd.total_up,
        adiabaticity: report.adiabaticity,
        invariant_residual: invariant_residual(&lr.trajectory)?,
        eigenvalue_drift: eigenvalue_drift(&lr)?,
        direct_norm_drift: report.direct_norm_drift,
        fidelity_threshold: cfg.tolerance.fidelity_threshold,
        passed: report.min_fidelity >= cfg.tolerance.fidelity_threshold,
        t0: grid.start(),
        t1: grid.end(),
        nodes: grid.len(),
        aux_steps: lr.trajectory.steps,
    };
    Ok(Evolution { lr, direct, report, summary })
}

fn write_trajectories(ev: &Evolution, out: &Path, name: &str) -> Result<(), CliError> {
    let traj = &ev.lr.trajectory;
    let mut lr_csv = Csv::with_header(&[
        "t", "lambda", "gamma", "f", "phi_geo_up", "phi_dyn_up", "phi_total_up", "norm_residual",
    ]);
    for k in 0..traj.len() {
        let s = traj.states[k];
        let p = ev.lr.phases[k];
        let norm_residual = (ev.lr.state_at_node(k).norm() - 1.0).abs();
        lr_csv.row(&[
            traj.grid.time(k),
            s.lambda,
            s.gamma,
            traj.f[k],
            p.geometric_up,
            p.dynamical_up,
            p.total_up,
            norm_residual,
        ]);
    }
    lr_csv.write(&out.join(format!("{name}_lr.csv")))?;

    let mut d_csv = Csv::with_header(&["t", "re_up", "im_up", "re_down", "im_down", "norm"]);
    for (k, s) in ev.direct.states.iter().enumerate() {
        d_csv.row(&[ev.direct.grid.time(k), s.up.re, s.up.im, s.down.re, s.down.im, s.norm()]);
    }
    d_csv.write(&out.join(format!("{name}_direct.csv")))
}

pub fn cmd_evolve(config_path: &Path, opts: &RunOptions) -> Result<EvolveSummary, CliError> {
    let cfg = config::load_evolve(config_path)?;
    run_evolve(&cfg, opts)
}

pub fn run_evolve(cfg: &EvolveConfig, opts: &RunOptions) -> Result<EvolveSummary, CliError> {
    let out = ensure_dir(&opts.out_dir(&cfg.output_dir))?;
    let ev = evolve(cfg, opts)?;
    write_trajectories(&ev, &out, &cfg.name)?;
    write_json(&out.join(format!("{}_summary.json", cfg.name)), &ev.summary)?;
    let s = &ev.summary;
    opts.note(&format!(
        "{}: min fidelity 1 - {:.3e}, dphi_total = {:.12} rad, |f|max = {:.3e}",
        s.scenario,
        1.0 - s.min_fidelity,
        s.dphi_total,
        s.f_max_abs
    ));
    if !s.passed {
        return Err(CliError::Validation(format!(
            "{}: minimum fidelity {} is below the threshold {} (worst node deviation 1 - F = {:.3e})",
            s.scenario,
            s.min_fidelity,
            s.fidelity_threshold,
            1.0 - s.min_fidelity
        )));
    }
    Ok(ev.summary)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub parameter: String,
    pub mode: &'static str,
    pub members: usize,
    pub failed_members: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone_deviation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub berry_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_response_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_response_max_rel_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BerryMember {
    scenario: String,
    nu: f64,
    nu_ratio: f64,
    geometric_up: f64,
    target: f64,
    deviation: f64,
}

pub fn cmd_sweep(config_path: &Path, opts: &RunOptions) -> Result<SweepSummary, CliError> {
    let cfg = config::load_sweep(config_path)?;
    run_sweep(&cfg, opts)
}

fn member_config(cfg: &SweepConfig, value: f64, suffix: &str) -> EvolveConfig {
    let mut m = cfg.base.clone();
    m.name = format!("{}_{suffix}", cfg.base.name);
    if !m.drive.set(&cfg.sweep.parameter, value) {
        if let InitialKind::Custom { lambda0, gamma0 } = m.initial {
            m.initial = match cfg.sweep.parameter.as_str() {
                "lambda0" => InitialKind::Custom { lambda0: value, gamma0 },
                _ => InitialKind::Custom { lambda0, gamma0: value },
            };
        }
    }
    m
}

pub fn run_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<SweepSummary, CliError> {
    match cfg.sweep.mode {
        SweepMode::Evolve => run_evolve_sweep(cfg, opts),
        SweepMode::Berry => run_berry_sweep(cfg, opts),
    }
}

fn run_evolve_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<SweepSummary, CliError> {
    let out = ensure_dir(&opts.out_dir(&cfg.base.output_dir))?;
    let sweep = &cfg.sweep;
    let results: Vec<Result<EvolveSummary, CliError>> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let member = member_config(cfg, v, &format!("{i:03}"));
            let ev = evolve(&member, opts)?;
            write_json(&out.join(format!("{}_summary.json", member.name)), &ev.summary)?;
            Ok(ev.summary)
        })
        .collect();
    let baseline = match sweep.baseline {
        Some(b) => Some((b, evolve(&member_config(cfg, b, "baseline"), opts)?.summary)),
        None => None,
    };

    let mut csv = Csv::with_header(&[
        "index",
        "parameter",
        "value",
        "dphi_geometric",
        "dphi_dynamical",
        "dphi_total",
        "min_fidelity",
        "f_max_abs",
        "status",
    ]);
    let mut worst: Option<CliError> = None;
    let mut failed = 0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, (v, r)) in sweep.values.iter().zip(&results).enumerate() {
        let idx = i.to_string();
        match r {
            Ok(s) => {
                let status = if s.passed { "ok" } else { "below_threshold" };
                csv.mixed_row(&[&idx, &sweep.parameter], &[
                    *v,
                    s.dphi_geometric,
                    s.dphi_dynamical,
                    s.dphi_total,
                    s.min_fidelity,
                    s.f_max_abs,
                ]);
                csv.append_to_last_row(status);
                if !s.passed {
                    failed += 1;
                    worst = Some(pick_worse(
                        worst,
                        CliError::Validation(format!("{}: fidelity {} below threshold", s.scenario, s.min_fidelity)),
                    ));
                }
                if let Some((b, base)) = &baseline {
                    xs.push(v - b);
                    ys.push(s.dphi_total - base.dphi_total);
                }
            }
            Err(e) => {
                failed += 1;
                opts.note(&format!("member {i} ({} = {v}) failed: {e}", sweep.parameter));
                csv.mixed_row(&[&idx, &sweep.parameter], &[*v, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
                csv.append_to_last_row("error");
                worst = Some(pick_worse(worst, clone_error(e)));
            }
        }
    }
    csv.write(&out.join(format!("{}_sweep.csv", cfg.base.name)))?;

    let fit = if xs.is_empty() { None } else { linear_response(&xs, &ys).ok() };
    let summary = SweepSummary {
        scenario: cfg.base.name.clone(),
        parameter: sweep.parameter.clone(),
        mode: "evolve",
        members: sweep.values.len(),
        failed_members: failed,
        convergence_exponent: None,
        monotone_deviation: None,
        berry_target: None,
        baseline: baseline.as_ref().map(|(b, _)| *b),
        linear_response_slope: fit.map(|f| f.slope),
        linear_response_max_rel_residual: fit.map(|f| f.max_rel_residual),
    };
    write_json(&out.join(format!("{}_sweep_summary.json", cfg.base.name)), &summary)?;
    opts.note(&format!("{}: {} members, {} failed", summary.scenario, summary.members, failed));
    match worst {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

fn run_berry_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<SweepSummary, CliError> {
    let out = ensure_dir(&opts.out_dir(&cfg.base.output_dir))?;
    let d = &cfg.base.drive;
    let table = berry_limit_check(d.omega0, d.theta0, &cfg.sweep.values, cfg.sweep.nodes_per_larmor, aux_options(&cfg.base, opts))
        .map_err(|e| match e {
            spinphase_core::Error::Usage(m) => CliError::Invalid(m),
            other => CliError::Numerical(other),
        })?;

    let mut csv = Csv::with_header(&["index", "nu", "nu_ratio", "geometric_up", "target", "deviation"]);
    for (i, (row, nu)) in table.rows.iter().zip(&cfg.sweep.values).enumerate() {
        csv.mixed_row(&[&i.to_string()], &[*nu, row.nu_ratio, row.geometric_up, table.target, row.deviation]);
        let member = BerryMember {
            scenario: format!("{}_{i:03}", cfg.base.name),
            nu: *nu,
            nu_ratio: row.nu_ratio,
            geometric_up: row.geometric_up,
            target: table.target,
            deviation: row.deviation,
        };
        write_json(&out.join(format!("{}_summary.json", member.scenario)), &member)?;
    }
    csv.write(&out.join(format!("{}_sweep.csv", cfg.base.name)))?;
    let summary = SweepSummary {
        scenario: cfg.base.name.clone(),
        parameter: cfg.sweep.parameter.clone(),
        mode: "berry",
        members: table.rows.len(),
        failed_members: 0,
        convergence_exponent: table.exponent,
        monotone_deviation: Some(table.monotone),
        berry_target: Some(table.target),
        baseline: None,
        linear_response_slope: None,
        linear_response_max_rel_residual: None,
    };
    write_json(&out.join(format!("{}_sweep_summary.json", cfg.base.name)), &summary)?;
    opts.note(&format!(
        "{}: deviation monotone = {}, exponent = {:?}",
        summary.scenario, table.monotone, table.exponent
    ));
    Ok(summary)
}

fn clone_error(e: &CliError) -> CliError {
    match e {
        CliError::Config(c) => CliError::Config(c.clone()),
        CliError::Invalid(m) => CliError::Invalid(m.clone()),
        CliError::Numerical(n) => CliError::Numerical(n.clone()),
        CliError::Validation(m) => CliError::Validation(m.clone()),
        CliError::Io { path, source } => CliError::Io {
            path: path.clone(),
            source: std::io::Error::new(source.kind(), source.to_string()),
        },
    }
}

/// Numerical and I/O failures take precedence over validation failures.
fn pick_worse(current: Option<CliError>, new: CliError) -> CliError {
    match current {
        None => new,
        Some(c) => {
            let rank = |e: &CliError| match e {
                CliError::Validation(_) => 0,
                CliError::Config(_) | CliError::Invalid(_) => 1,
                CliError::Numerical(_) | CliError::Io { .. } => 2,
            };
            if rank(&new) > rank(&c) {
                new
            } else {
                c
            }
        }
    }
}
