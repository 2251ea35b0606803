//! Adaptive Dormand–Prince 5(4) integration of a 3-vector ODE onto a fixed
//! output grid.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// b − b̂ (fifth- minus fourth-order weights).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

pub(crate) struct Solution {
    pub states: Vec<Vector3<f64>>,
    pub steps: usize,
}

/// Integrates `rhs` from `y0` at `grid.start()` and returns the state at every
/// grid node. `project` is applied after each accepted step and may reject
/// the trajectory with an error.
pub(crate) fn integrate<F, P>(
    rhs: F,
    project: P,
    y0: Vector3<f64>,
    grid: &TimeGrid,
    tol: Tolerances,
) -> Result<Solution>
where
    F: Fn(f64, &Vector3<f64>) -> Result<Vector3<f64>>,
    P: Fn(f64, Vector3<f64>) -> Result<Vector3<f64>>,
{
    if !(tol.rtol > 0.0 && tol.atol >= 0.0) {
        return Err(Error::usage("integrator tolerances must be positive"));
    }
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0);
    let mut t = grid.start();
    let mut y = y0;
    let mut steps = 0usize;

    let f0 = rhs(t, &y)?;
    let mut h = (0.01 * (tol.rtol.powf(0.2)) / f0.amax().max(1e-300)).min(grid.step());

    for k in 1..grid.len() {
        let target = grid.time(k);
        while t < target {
            if steps >= MAX_STEPS {
                return Err(Error::Integration { t, reason: "step budget exhausted".into() });
            }
            let mut h_try = h.min(target - t);
            let hit = h_try >= target - t || (target - t - h_try) <= 1e-12 * target.abs().max(1.0);
            if hit {
                h_try = target - t;
            }
            let k1 = rhs(t, &y)?;
            let k2 = rhs(t + C[0] * h_try, &(y + h_try * (A2[0] * k1)))?;
            let k3 = rhs(t + C[1] * h_try, &(y + h_try * (A3[0] * k1 + A3[1] * k2)))?;
            let k4 = rhs(
                t + C[2] * h_try,
                &(y + h_try * (A4[0] * k1 + A4[1] * k2 + A4[2] * k3)),
            )?;
            let k5 = rhs(
                t + C[3] * h_try,
                &(y + h_try * (A5[0] * k1 + A5[1] * k2 + A5[2] * k3 + A5[3] * k4)),
            )?;
            let k6 = rhs(
                t + C[4] * h_try,
                &(y + h_try * (A6[0] * k1 + A6[1] * k2 + A6[2] * k3 + A6[3] * k4 + A6[4] * k5)),
            )?;
            let y_new = y
                + h_try
                    * (B[0] * k1 + B[2] * k3 + B[3] * k4 + B[4] * k5 + B[5] * k6);
            let t_new = if hit { target } else { t + h_try };
            let k7 = rhs(t_new, &y_new)?;
            let err_vec = h_try
                * (E[0] * k1 + E[2] * k3 + E[3] * k4 + E[4] * k5 + E[5] * k6 + E[6] * k7);

            let mut acc = 0.0;
            for i in 0..3 {
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                acc += (err_vec[i] / sc).powi(2);
            }
            let err = (acc / 3.0).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                steps += 1;
                t = t_new;
                y = project(t, y_new)?;
                // Keep the controller's proposal when the step was shortened
                // only to land on a node.
                h = if hit { h.max(h_try * factor) } else { h_try * factor };
            } else {
                h = h_try * factor.min(1.0);
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration { t, reason: format!("step size collapsed to {h:e}") });
            }
        }
        states.push(y);
    }
    Ok(Solution { states, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(_: f64, y: Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(y)
    }

    #[test]
    fn linear_decay_hits_grid() {
        let grid = TimeGrid::new(0.0, 2.0, 11).unwrap();
        let tol = Tolerances { rtol: 1e-10, atol: 1e-12 };
        let sol = integrate(|_, y| Ok(-y), identity, Vector3::new(1.0, 2.0, -1.0), &grid, tol).unwrap();
        for (k, y) in sol.states.iter().enumerate() {
            let e = (-grid.time(k)).exp();
            assert!((y - Vector3::new(e, 2.0 * e, -e)).amax() < 1e-9);
        }
    }

    #[test]
    fn global_error_tracks_tolerance() {
        // y' = cos(t) y, y = exp(sin t).
        let grid = TimeGrid::new(0.0, 10.0, 3).unwrap();
        let mut errs = Vec::new();
        for rtol in [1e-6, 1e-8, 1e-10] {
            let tol = Tolerances { rtol, atol: rtol * 1e-2 };
            let sol = integrate(|t, y| Ok(t.cos() * y), identity, Vector3::new(1.0, 0.0, 0.0), &grid, tol)
                .unwrap();
            errs.push((sol.states[2].x - 10f64.sin().exp()).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-8);
    }

    #[test]
    fn blow_up_reports_integration_failure() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let grid = TimeGrid::new(0.0, 2.0, 2).unwrap();
        let tol = Tolerances { rtol: 1e-8, atol: 1e-10 };
        let res = integrate(
            |_, y| Ok(Vector3::new(y.x * y.x, 0.0, 0.0)),
            identity,
            Vector3::new(1.0, 0.0, 0.0),
            &grid,
            tol,
        );
        match res {
            Err(Error::Integration { t, .. }) => assert!(t > 0.9 && t < 1.01, "{t}"),
            other => panic!("expected integration failure, got {:?}", other.map(|s| s.steps)),
        }
    }
}
