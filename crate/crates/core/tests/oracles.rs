//! Comparisons against closed forms written independently of the library.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI, TAU};

use nalgebra::Vector3;

use spinphase_core::analysis::{
    berry_limit_check, interferometric_phase_difference, linear_response, power_law_exponent, run_comparison,
};
use spinphase_core::direct::{evolve_direct_with, DirectOptions};
use spinphase_core::gravitomag::{
    dipole_shape, fit_dipole, frame_field_analytic, gravitomagnetic_field, gravitomagnetic_field_with_step,
    kerr_metric, rotating_metric, FieldVector, KerrParams, RotFrame, SphericalPoint,
};
use spinphase_core::lr::{integrate_aux, phase_decompose, AuxOptions, AuxState, Initializer, LrSolution};
use spinphase_core::{DriveSpec, Spinor, TimeGrid, C64};

/// exp(−i t w̄·σ̄/2) ψ, spelled out component by component.
fn precess(w: Vector3<f64>, t: f64, psi: Spinor) -> Spinor {
    let mag = w.norm();
    let (s, c) = (0.5 * mag * t).sin_cos();
    let n = if mag > 0.0 { w / mag } else { Vector3::z() };
    let i = C64::new(0.0, 1.0);
    let a11 = C64::new(c, 0.0) - i * s * n.z;
    let a22 = C64::new(c, 0.0) + i * s * n.z;
    let a12 = -i * s * C64::new(n.x, -n.y);
    let a21 = -i * s * C64::new(n.x, n.y);
    Spinor::new(a11 * psi.up + a12 * psi.down, a21 * psi.up + a22 * psi.down)
}

/// Exact state for ω̄(t) = ω0(sinθ0 cos νt, sinθ0 sin νt, cosθ0), obtained in
/// the frame co-rotating with the axis.
fn conical_exact(omega0: f64, theta0: f64, nu: f64, t: f64, psi0: Spinor) -> Spinor {
    let w_rot = Vector3::new(omega0 * theta0.sin(), 0.0, omega0 * theta0.cos() - nu);
    let chi = precess(w_rot, t, psi0);
    precess(Vector3::new(0.0, 0.0, nu), t, chi)
}

fn psi0() -> Spinor {
    Spinor::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8))
}

#[test]
fn conical_drive_matches_rotating_frame_solution() {
    for nu in [0.0, 0.01, 0.3, 0.6] {
        let (omega0, theta0) = (1.0, 0.9);
        let spec = DriveSpec::conical(omega0, theta0, nu, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 10.0 * TAU, 2561).unwrap();
        let (lr, direct, _) = run_comparison(
            &spec,
            Initializer::Custom(AuxState::new(1.0, 0.5)),
            psi0(),
            &grid,
            AuxOptions::default(),
            DirectOptions::default(),
        )
        .unwrap();
        for k in (0..grid.len()).step_by(80) {
            let exact = conical_exact(omega0, theta0, nu, grid.time(k), psi0());
            assert!(lr.state_at_node(k).max_abs_diff(&exact) < 1e-8, "ν = {nu}, node {k}: {:e}", lr.state_at_node(k).max_abs_diff(&exact));
            assert!(direct.states[k].max_abs_diff(&exact) < 1e-8, "ν = {nu}, node {k}");
        }
        let t = 17.3;
        let exact = conical_exact(omega0, theta0, nu, t, psi0());
        assert!(lr.state_at(t).unwrap().max_abs_diff(&exact) < 1e-8);
    }
}

#[test]
fn dynamical_phase_for_a_fixed_axis() {
    // m̂ keeps its angle α to a fixed n̂, so the dynamical phase is −½ ω0 cosα t.
    let spec = DriveSpec::constant(1.5, 0.8, 0.2).unwrap();
    let s0 = AuxState::new(1.9, 2.4);
    let n = Vector3::new(0.8f64.sin() * 0.2f64.cos(), 0.8f64.sin() * 0.2f64.sin(), 0.8f64.cos());
    let cos_alpha = s0.axis().dot(&n);
    let grid = TimeGrid::new(0.0, 30.0, 601).unwrap();
    let traj = integrate_aux(&spec, s0, &grid, AuxOptions::default()).unwrap();
    let pd = phase_decompose(&traj);
    assert!((pd.dynamical_up - (-0.5 * 1.5 * cos_alpha * 30.0)).abs() < 1e-10);
}

#[test]
fn closed_form_geometric_phase_difference() {
    let spec = DriveSpec::constant(1.0, 0.0, 0.0).unwrap();
    let grid = TimeGrid::new(0.0, TAU, 513).unwrap();
    let traj = integrate_aux(&spec, AuxState::new(FRAC_PI_3, 0.0), &grid, AuxOptions::default()).unwrap();
    let pd = phase_decompose(&traj);
    assert!((pd.geometric_up + PI / 2.0).abs() < 1e-9);
    let d = interferometric_phase_difference(&pd);
    assert!((d.geometric + PI).abs() < 1e-9);
}

#[test]
fn rk4_is_fourth_order() {
    let (omega0, theta0, nu) = (1.0, 0.9, 0.3);
    let spec = DriveSpec::conical(omega0, theta0, nu, 0.0).unwrap();
    let grid = TimeGrid::new(0.0, 10.0, 2).unwrap();
    let exact = conical_exact(omega0, theta0, nu, 10.0, psi0());
    let mut dts = Vec::new();
    let mut errs = Vec::new();
    for substeps in [25, 50, 100, 200] {
        let opts = DirectOptions { substeps, ..Default::default() };
        let r = evolve_direct_with(&spec, psi0(), &grid, opts).unwrap();
        dts.push(10.0 / substeps as f64);
        errs.push(r.states[1].max_abs_diff(&exact));
    }
    let order = power_law_exponent(&dts, &errs).unwrap();
    assert!((order - 4.0).abs() <= 0.2, "order {order}");
}

fn earth() -> KerrParams {
    KerrParams::new(6.674e-11, 5.972e24, 2.998e8, 3.3).unwrap()
}

#[test]
fn kerr_metric_matches_boyer_lindquist_form() {
    let p = earth();
    let rs = 2.0 * p.g * p.mass / (p.c * p.c);
    for &r in &[6.4e6, 2.0e7, 4.0e8] {
        for k in 1..8 {
            let th = PI * k as f64 / 8.0;
            let x = SphericalPoint::new(r, th, 0.0).unwrap();
            let g = kerr_metric(&p, &x).unwrap();
            let a = p.a;
            let rho2 = r * r + a * a * th.cos().powi(2);
            let delta = r * r - rs * r + a * a;
            let s2 = th.sin().powi(2);
            let big_a = (r * r + a * a).powi(2) - a * a * delta * s2;
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs();
            assert!(close(g.g_tt, 1.0 - rs * r / rho2));
            assert!(close(g.g_rr, -rho2 / delta));
            assert!(close(g.g_thth, -rho2));
            assert!(close(g.g_phph, -big_a * s2 / rho2));
            assert!(close(g.g_tph, rs * r * a * s2 / rho2));
        }
    }
}

#[test]
fn metric_limit_chain() {
    let c = 2.998e8;
    let x = SphericalPoint::new(7.0e6, 1.1, 0.4).unwrap();
    let schw = KerrParams::new(6.674e-11, 5.972e24, c, 0.0).unwrap();
    let g = kerr_metric(&schw, &x).unwrap();
    let f = 1.0 - 2.0 * schw.g * schw.mass / (c * c * x.r);
    assert!((g.g_tt - f).abs() <= 1e-12 * f);
    assert!((g.g_rr + 1.0 / f).abs() <= 1e-12 / f);
    assert_eq!(g.g_tph, 0.0);
    let flat = kerr_metric(&KerrParams::flat(c), &x).unwrap();
    assert_eq!(flat.g_tt, 1.0);
    assert_eq!(flat.g_rr, -1.0);
    assert!((flat.g_thth + x.r * x.r).abs() <= 1e-12 * x.r * x.r);
    assert!((flat.g_phph + (x.r * x.theta.sin()).powi(2)).abs() <= 1e-12 * x.r * x.r);

    // Rotating flat space: the only g_tt change is the centrifugal term.
    let frame = RotFrame::new(7.292e-5, 0.0);
    let rot = rotating_metric(&KerrParams::flat(c), &frame, &x).unwrap();
    let centrifugal = -(frame.omega * x.r * x.theta.sin() / c).powi(2);
    assert!(((rot.g_tt - 1.0) - centrifugal).abs() <= 1e-12 * centrifugal.abs().max(1e-4));
}

#[test]
fn frame_field_matches_closed_form_on_theta_grid() {
    let frame = RotFrame::new(7.292e-5, 0.0);
    let p = KerrParams::flat(2.998e8);
    let target = -2.0 * frame.omega_vector();
    for k in 1..36 {
        let x = SphericalPoint::new(6.4e6, PI * k as f64 / 36.0, 1.0).unwrap();
        let b = gravitomagnetic_field(&p, &frame, &x).unwrap();
        let exact = frame_field_analytic(&frame, &x);
        assert!(b.sub(&exact).norm() <= 1e-6 * exact.norm());
        assert!((b.to_cartesian(&x) - target).norm() <= 1e-10 * target.norm());
    }
}

#[test]
fn mass_field_is_a_dipole_with_prefactor_gm_over_c() {
    let p = earth();
    let frame = RotFrame::default();
    let mut samples = Vec::new();
    for i in 0..21 {
        let r = 7.0e6 * 10f64.powf(2.0 * i as f64 / 20.0);
        for k in 1..12 {
            let x = SphericalPoint::new(r, PI * k as f64 / 12.0, 0.0).unwrap();
            samples.push((x, gravitomagnetic_field(&p, &frame, &x).unwrap()));
        }
    }
    let fit = fit_dipole(p.a, &samples).unwrap();
    let gm_c = p.g * p.mass / p.c;
    assert!((fit.k / gm_c - 1.0).abs() < 1e-8, "K/(GM/c) = {}", fit.k / gm_c);
    assert!((fit.falloff_exponent - 3.0).abs() < 0.01);
    assert!(fit.r_squared >= 1.0 - 1e-6);
    // The shape itself, against ā/r³ − 3(ā·r̄)r̄/r⁵ in Cartesian form.
    let x = SphericalPoint::new(8.0e6, 0.7, 0.3).unwrap();
    let rv = x.to_cartesian();
    let av = Vector3::new(0.0, 0.0, p.a);
    let cart = av / rv.norm().powi(3) - 3.0 * av.dot(&rv) * rv / rv.norm().powi(5);
    assert!((dipole_shape(p.a, &x).to_cartesian(&x) - cart).norm() <= 1e-12 * cart.norm());
}

#[test]
fn curl_is_second_order() {
    // B for A_φ = r² sin²θ cosφ / r₀ is not resolved exactly by central differences.
    let field = |y: &SphericalPoint| FieldVector::new(0.0, 0.0, (y.r * y.theta.sin()).powi(2) * y.phi.cos());
    let x = SphericalPoint::new(2.0, 0.9, 0.5).unwrap();
    // Analytic curl of (0, 0, r² sin²θ cosφ).
    let (st, ct) = x.theta.sin_cos();
    let exact = FieldVector::new(
        3.0 * x.r * st * ct * x.phi.cos(),
        -3.0 * x.r * st * st * x.phi.cos(),
        0.0,
    );
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for h in [0.04, 0.02, 0.01, 0.005] {
        let c = spinphase_core::gravitomag::curl_spherical(field, &x, h).unwrap();
        hs.push(h);
        errs.push(c.sub(&exact).norm());
    }
    let order = power_law_exponent(&hs, &errs).unwrap();
    assert!((order - 2.0).abs() <= 0.1, "order {order}");
}

#[test]
fn frame_field_curl_is_second_order_in_the_step() {
    let frame = RotFrame::new(1.0, 0.0);
    let p = KerrParams::flat(1.0);
    let x = SphericalPoint::new(1.0, 0.7, 0.0).unwrap();
    let exact = frame_field_analytic(&frame, &x);
    let steps = [4e-2, 2e-2, 1e-2, 5e-3];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| gravitomagnetic_field_with_step(&p, &frame, &x, h).unwrap().sub(&exact).norm())
        .collect();
    let order = power_law_exponent(&steps, &errs).unwrap();
    assert!((order - 2.0).abs() <= 0.1, "order {order}");
}

#[test]
fn berry_phase_approaches_half_solid_angle() {
    let t = berry_limit_check(1.0, PI / 2.0, &[1e-2, 5e-3, 2.5e-3, 1.25e-3], 64, AuxOptions::default()).unwrap();
    assert!(t.monotone);
    assert!((t.target + PI).abs() < 1e-15);
    // The deviation is (3π/2)(ν/ω0) to leading order.
    for r in &t.rows {
        assert!((r.deviation / r.nu_ratio - 1.5 * PI).abs() < 0.03, "{r:?}");
    }
    let e = t.exponent.unwrap();
    assert!((e - 1.0).abs() < 0.01, "{e}");
}

#[test]
fn phase_difference_responds_linearly_to_modulation() {
    let grid = TimeGrid::new(0.0, 10.0 * TAU, 1281).unwrap();
    let run = |eps: f64| {
        let spec = DriveSpec::modulated(1.0, FRAC_PI_4, 0.05, 0.0, eps, 0.2).unwrap();
        let traj = integrate_aux(&spec, AuxState::new(1.0, 0.5), &grid, AuxOptions::default()).unwrap();
        interferometric_phase_difference(&phase_decompose(&traj)).total
    };
    let base = run(0.0);
    let eps = [1e-4, 1e-3, 1e-2];
    let shifts: Vec<f64> = eps.iter().map(|&e| run(e) - base).collect();
    let fit = linear_response(&eps, &shifts).unwrap();
    assert!(fit.slope.abs() > 1e-3);
    assert!(fit.max_rel_residual < 0.05, "{fit:?}");
}

#[test]
fn superposition_solution_is_normalised() {
    let spec = DriveSpec::modulated(1.0, 0.6, 0.2, 0.0, 0.05, 0.9).unwrap();
    let grid = TimeGrid::new(0.0, 40.0, 801).unwrap();
    let traj = integrate_aux(&spec, AuxState::new(0.7, 0.1), &grid, AuxOptions::default()).unwrap();
    let lr = LrSolution::new(traj, psi0()).unwrap();
    for k in 0..grid.len() {
        assert!((lr.state_at_node(k).norm() - 1.0).abs() < 1e-12);
    }
}
