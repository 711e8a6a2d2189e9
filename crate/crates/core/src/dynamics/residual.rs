use serde::Serialize;

use super::{integrator::integrate_fixed, rhs_flat, FlowParams, Trajectory};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::operators::MonotoneOperator;
use crate::vector::{dot, norm};

/// Residual of the original second-order equation at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    /// `‖ẍ + α t^{−q} ẋ + β t^q d/dt A(x) + (1 − γ t^{−s}) A(x) + c t^{−(2q+s)} x‖`
    pub residual: f64,
    /// `⟨d/dt A(x(t)), ẋ(t)⟩`, nonnegative for monotone `A`.
    pub dadt_dot_xdot: f64,
}

const SUBSTEPS: usize = 4;

/// Plugs the sampled trajectory back into the second-order equation. `ẍ`
/// and `d/dt A(x(t))` are central differences with half-width `h`, built from
/// short auxiliary integrations forward and backward from each interior
/// sample; interior means `t − h ≥ t0` and not the final sample.
pub fn ds_residual(traj: &Trajectory, op: &MonotoneOperator, params: &FlowParams, h: f64, exec: Execution) -> Result<Vec<ResidualPoint>> {
    if traj.samples.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: traj.samples.len() });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("stencil width must be positive".into()));
    }
    let last = traj.samples.len() - 1;
    let interior: Vec<usize> = (1..last).filter(|&i| traj.samples[i].t - h >= params.t0).collect();
    if interior.is_empty() {
        return Err(Error::InsufficientSamples { needed: 3, got: traj.samples.len() });
    }
    let n = op.dim();
    let points = exec::map(exec, &interior, |&i| {
        let s = &traj.samples[i];
        let t = s.t;
        let mut y = s.x.clone();
        y.extend_from_slice(&s.z);
        let mut scratch = vec![0.0; n];
        let mut f = |tt: f64, yy: &[f64], dy: &mut [f64]| rhs_flat(op, params, tt, yy, dy, &mut scratch);
        let y_plus = integrate_fixed(&mut f, t, &y, t + h, SUBSTEPS);
        let y_minus = integrate_fixed(&mut f, t, &y, t - h, SUBSTEPS);
        let observe = |tt: f64, yy: &[f64]| {
            let mut ax = vec![0.0; n];
            op.apply(&yy[..n], &mut ax);
            let corr = params.beta * tt.powf(params.q);
            let xdot: Vec<f64> = yy[n..].iter().zip(&ax).map(|(z, a)| z - corr * a).collect();
            (xdot, ax)
        };
        let (xd_p, a_p) = observe(t + h, &y_plus);
        let (xd_m, a_m) = observe(t - h, &y_minus);
        let xddot: Vec<f64> = xd_p.iter().zip(&xd_m).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let dadt: Vec<f64> = a_p.iter().zip(&a_m).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let damping = params.alpha * t.powf(-params.q);
        let corr = params.beta * t.powf(params.q);
        let restoring = 1.0 - params.gamma * t.powf(-params.s);
        let eps = params.epsilon(t);
        let res: Vec<f64> = (0..n).map(|k| xddot[k] + damping * s.xdot[k] + corr * dadt[k] + restoring * s.ax[k] + eps * s.x[k]).collect();
        ResidualPoint { t, residual: norm(&res), dadt_dot_xdot: dot(&dadt, &s.xdot) }
    });
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, log_schedule, InitialConditions, IntegratorConfig, Tolerances};
    use crate::operators::builtin;

    fn params() -> FlowParams {
        FlowParams { alpha: 2.0, q: 0.5, s: 0.25, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 }
    }

    #[test]
    fn constant_trajectory_has_zero_residual() {
        let (op, sol) = builtin("fullrank").unwrap();
        let p = FlowParams { c: 0.0, ..params() };
        let init = InitialConditions::at_rest(sol.unwrap().anchor).unwrap();
        let traj = integrate(&op, &p, &init, &log_schedule(1.0, 100.0, 5), &IntegratorConfig::default()).unwrap();
        let r = ds_residual(&traj, &op, &p, 1e-3, Execution::default()).unwrap();
        assert!(!r.is_empty());
        assert!(r.iter().all(|p| p.residual < 1e-10), "{r:?}");
    }

    #[test]
    fn identity_run_small_residual() {
        let op = MonotoneOperator::identity(1);
        let p = params();
        let cfg = IntegratorConfig::with_tolerances(Tolerances { rel: 1e-10, abs: 1e-12 });
        let traj = integrate(&op, &p, &InitialConditions::at_rest(vec![1.0]).unwrap(), &log_schedule(1.0, 100.0, 10), &cfg).unwrap();
        let r = ds_residual(&traj, &op, &p, 1e-4, Execution::default()).unwrap();
        let worst = r.iter().map(|p| p.residual).fold(0.0, f64::max);
        assert!(worst <= 1e-5, "worst {worst}");
    }

    #[test]
    fn too_few_samples() {
        let op = MonotoneOperator::identity(1);
        let p = params();
        let traj = integrate(&op, &p, &InitialConditions::at_rest(vec![1.0]).unwrap(), &[1.0, 2.0], &IntegratorConfig::default()).unwrap();
        assert!(matches!(ds_residual(&traj, &op, &p, 1e-3, Execution::Sequential), Err(Error::InsufficientSamples { .. })));
    }
}
