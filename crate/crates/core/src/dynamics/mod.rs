//! The regularized inertial flow, integrated through the change of variables
//! `z = ẋ + β t^q A(x)`, which turns the second-order system into
//!
//! ```text
//! ẋ = z − β t^q A(x)
//! ż = −α t^{−q} z + (αβ − 1 + γ t^{−s} + βq t^{q−1}) A(x) − c t^{−(2q+s)} x
//! ```
//!
//! The correction term `β t^q d/dt A(x(t))` is absorbed exactly, so the
//! right-hand side needs one operator evaluation and no Jacobian.

pub mod integrator;
mod params;
mod residual;

use serde::Serialize;

pub use integrator::{IntegratorConfig, IntegratorStats, Tolerances};
pub use params::{validate_params, FlowParams};
pub use residual::{ds_residual, ResidualPoint};

use crate::error::{Error, Result};
use crate::operators::MonotoneOperator;
use crate::vector::{all_finite, check_dim, dist, norm, VectorPoint};

/// Reformulated state `(t, x, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Time-dependent scalar coefficients of the first-order system at `t`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RhsCoefficients {
    /// `β t^q`
    pub correction: f64,
    /// `α t^{−q}`
    pub damping: f64,
    /// `αβ − 1 + γ t^{−s} + βq t^{q−1}`
    pub operator: f64,
    /// `c t^{−(2q+s)}`
    pub tikhonov: f64,
}

impl RhsCoefficients {
    #[inline]
    pub fn at(p: &FlowParams, t: f64) -> Self {
        let tq = t.powf(p.q);
        Self {
            correction: p.beta * tq,
            damping: p.alpha / tq,
            operator: p.alpha * p.beta - 1.0 + p.gamma * t.powf(-p.s) + p.beta * p.q * tq / t,
            tikhonov: p.epsilon(t),
        }
    }
}

/// Evaluates `(ẋ, ż)` for a flat state `y = [x; z]`; `ax` is scratch space
/// receiving `A(x)`.
#[inline]
pub(crate) fn rhs_flat(op: &MonotoneOperator, p: &FlowParams, t: f64, y: &[f64], dy: &mut [f64], ax: &mut [f64]) {
    let n = ax.len();
    let (x, z) = y.split_at(n);
    let (dx, dz) = dy.split_at_mut(n);
    op.apply(x, ax);
    let k = RhsCoefficients::at(p, t);
    for i in 0..n {
        dx[i] = z[i] - k.correction * ax[i];
        dz[i] = -k.damping * z[i] + k.operator * ax[i] - k.tikhonov * x[i];
    }
}

/// Right-hand side of the reformulated system at `state`.
pub fn rhs(state: &FlowState, op: &MonotoneOperator, params: &FlowParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = op.dim();
    check_dim(n, state.x.len())?;
    check_dim(n, state.z.len())?;
    if !(state.t > 0.0) {
        return Err(Error::InvalidArgument("rhs requires t > 0".into()));
    }
    let mut y = state.x.clone();
    y.extend_from_slice(&state.z);
    let mut dy = vec![0.0; 2 * n];
    let mut ax = vec![0.0; n];
    rhs_flat(op, params, state.t, &y, &mut dy, &mut ax);
    if !all_finite(&dy) {
        return Err(Error::NonFiniteOutput { context: "flow right-hand side" });
    }
    let dz = dy.split_off(n);
    Ok((dy, dz))
}

/// Initial position `u0` and velocity `v0` at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub u0: VectorPoint,
    pub v0: VectorPoint,
}

impl InitialConditions {
    pub fn at_rest(u0: Vec<f64>) -> Result<Self> {
        let n = u0.len();
        Ok(Self { u0: VectorPoint::new(u0)?, v0: VectorPoint::zeros(n) })
    }
}

/// One sampled point of a trajectory with its derived observables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub xdot: Vec<f64>,
    pub ax: Vec<f64>,
}

impl Sample {
    fn from_state(op: &MonotoneOperator, p: &FlowParams, t: f64, y: &[f64]) -> Self {
        let n = op.dim();
        let x = y[..n].to_vec();
        let z = y[n..].to_vec();
        let mut ax = vec![0.0; n];
        op.apply(&x, &mut ax);
        let corr = p.beta * t.powf(p.q);
        let xdot = z.iter().zip(&ax).map(|(zi, ai)| zi - corr * ai).collect();
        Self { t, x, z, xdot, ax }
    }

    pub fn norm_x(&self) -> f64 {
        norm(&self.x)
    }

    pub fn norm_xdot(&self) -> f64 {
        norm(&self.xdot)
    }

    pub fn norm_ax(&self) -> f64 {
        norm(&self.ax)
    }

    pub fn state(&self) -> FlowState {
        FlowState { t: self.t, x: self.x.clone(), z: self.z.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: FlowParams,
    pub samples: Vec<Sample>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `(t, value)` series of a scalar observable.
    pub fn series<F: Fn(&Sample) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, f(s))).collect()
    }

    /// CSV with columns `t,norm_x,norm_xdot,norm_Ax,dist_to_xstar,dist_to_xt`.
    /// Missing references are written as `NaN`.
    pub fn to_csv(&self, x_star: Option<&[f64]>, x_path: Option<&[Vec<f64>]>) -> String {
        let mut out = String::from("t,norm_x,norm_xdot,norm_Ax,dist_to_xstar,dist_to_xt\n");
        for (i, s) in self.samples.iter().enumerate() {
            let dstar = x_star.map_or(f64::NAN, |xs| dist(&s.x, xs));
            let dxt = x_path.map_or(f64::NAN, |p| dist(&s.x, &p[i]));
            let row = [s.t, s.norm_x(), s.norm_xdot(), s.norm_ax(), dstar, dxt];
            out.push_str(&crate::csv_row(&row));
        }
        out
    }
}

/// Integrates the flow from `(u0, v0)` at `params.t0`, sampling at each
/// point of `schedule`. Deterministic for fixed inputs.
pub fn integrate(
    op: &MonotoneOperator,
    params: &FlowParams,
    init: &InitialConditions,
    schedule: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = op.dim();
    check_dim(n, init.u0.dim())?;
    check_dim(n, init.v0.dim())?;
    let t0 = params.t0;
    let u0 = init.u0.as_slice();
    let a0 = op.eval_slice(u0)?;
    let corr = params.beta * t0.powf(params.q);
    let mut y0 = u0.to_vec();
    y0.extend(init.v0.as_slice().iter().zip(&a0).map(|(v, a)| v + corr * a));

    let mut samples = Vec::with_capacity(schedule.len());
    let mut scratch = vec![0.0; n];
    let stats = integrator::integrate_adaptive(
        |t, y, dy| rhs_flat(op, params, t, y, dy, &mut scratch),
        t0,
        &y0,
        schedule,
        config,
        |t, y| {
            if !all_finite(y) {
                return Err(Error::NonFiniteState { t });
            }
            samples.push(Sample::from_state(op, params, t, y));
            Ok(())
        },
    )?;
    Ok(Trajectory { params: *params, samples, stats })
}

/// Log-spaced schedule on `[t0, t_end]` with `per_decade` points per decade.
pub fn log_schedule(t0: f64, t_end: f64, per_decade: usize) -> Vec<f64> {
    crate::vector::log_grid(t0, t_end, per_decade)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::builtin;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rhs_hand_example() {
        let op = MonotoneOperator::identity(1);
        let p = FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 };
        let (dx, dz) = rhs(&FlowState { t: 1.0, x: vec![1.0], z: vec![0.0] }, &op, &p).unwrap();
        assert_abs_diff_eq!(dx[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dz[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rhs_equilibrium_in_baseline() {
        let (op, sol) = builtin("fullrank").unwrap();
        let xs = sol.unwrap().anchor;
        let p = FlowParams { alpha: 3.0, q: 0.4, s: 0.3, beta: 0.7, gamma: 2.0, c: 0.0, t0: 1.0 };
        let (dx, dz) = rhs(&FlowState { t: 5.0, x: xs, z: vec![0.0; 3] }, &op, &p).unwrap();
        assert!(dx.iter().chain(&dz).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rhs_large_t_limit() {
        let op = MonotoneOperator::rotation();
        let p = FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 };
        let t = 1e8;
        let x = vec![0.3, -0.7];
        let (_, dz) = rhs(&FlowState { t, x: x.clone(), z: vec![0.0; 2] }, &op, &p).unwrap();
        // only (αβ − 1) A(x) survives; corrections are O(t^{-s}) = 1e-2 relative
        let ax = [0.7, 0.3];
        let lead = p.alpha * p.beta - 1.0;
        for i in 0..2 {
            let k = RhsCoefficients::at(&p, t);
            assert_abs_diff_eq!(k.operator, lead + 1e-2 + 0.5e-4, epsilon = 1e-6);
            assert_abs_diff_eq!(dz[i], k.operator * ax[i] - k.tikhonov * x[i], epsilon = 1e-15);
            assert!((dz[i] - lead * ax[i]).abs() < 1.1e-2);
        }
        assert!(RhsCoefficients::at(&p, t).damping < 1e-3);
    }

    #[test]
    fn rhs_dimension_errors() {
        let op = MonotoneOperator::identity(2);
        let p = FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 };
        assert!(rhs(&FlowState { t: 1.0, x: vec![1.0], z: vec![0.0, 0.0] }, &op, &p).is_err());
        assert!(rhs(&FlowState { t: 0.0, x: vec![1.0, 0.0], z: vec![0.0, 0.0] }, &op, &p).is_err());
    }

    #[test]
    fn equilibrium_trajectory_stays_put() {
        let (op, sol) = builtin("rankdef").unwrap();
        let xs = sol.unwrap().anchor; // (1,1,1,1) is a zero of A
        let p = FlowParams { alpha: 2.0, q: 0.75, s: 1.0 / 6.0, beta: 0.5, gamma: 1.0, c: 0.0, t0: 1.0 };
        let init = InitialConditions::at_rest(xs.clone()).unwrap();
        let traj = integrate(&op, &p, &init, &log_schedule(1.0, 1e3, 20), &IntegratorConfig::default()).unwrap();
        for s in &traj.samples {
            assert!(dist(&s.x, &xs) < 1e-12);
        }
    }

    #[test]
    fn first_sample_matches_initial_conditions() {
        let op = MonotoneOperator::rotation();
        let p = FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 };
        let init = InitialConditions { u0: VectorPoint::new(vec![1.0, 2.0]).unwrap(), v0: VectorPoint::new(vec![0.5, -0.5]).unwrap() };
        let traj = integrate(&op, &p, &init, &[1.0, 2.0, 3.0], &IntegratorConfig::default()).unwrap();
        let s0 = &traj.samples[0];
        assert_eq!(s0.x, vec![1.0, 2.0]);
        assert_abs_diff_eq!(s0.xdot[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s0.xdot[1], -0.5, epsilon = 1e-15);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_header_and_rows() {
        let op = MonotoneOperator::identity(1);
        let p = FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 };
        let traj = integrate(&op, &p, &InitialConditions::at_rest(vec![1.0]).unwrap(), &[1.0, 10.0], &IntegratorConfig::default()).unwrap();
        let csv = traj.to_csv(Some(&[0.0]), None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,norm_x,norm_xdot,norm_Ax,dist_to_xstar,dist_to_xt");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1.0000000000000000e0,1.0000000000000000e0,"));
        assert!(lines[1].ends_with(",NaN"));
    }
}
