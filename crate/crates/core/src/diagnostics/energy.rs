use serde::Serialize;

use crate::dynamics::{FlowParams, Sample};
use crate::error::Result;
use crate::operators::MonotoneOperator;
use crate::vector::{check_dim, dot, norm};

/// Summands of the Lyapunov energy at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub t: f64,
    /// `½‖b(x − x_t) + c(t)(2ẋ + β(t)A(x))‖²`
    pub v: f64,
    /// `b c(t)β(t)⟨A(x), x − x_t⟩ + (b c(t)β(t)ε/2)(‖x‖² − ‖x − x_t‖² − ‖x_t‖²)`
    pub u: f64,
    /// `(c(t)²β(t)²/2)‖A(x)‖²`
    pub operator_term: f64,
    /// `2c(t)²ε‖x‖²`
    pub tikhonov_term: f64,
    /// `b(2α − b − 2ċ(t) + c(t)β(t)ε)/2`
    pub coupling_weight: f64,
    /// `coupling_weight · ‖x − x_t‖²`
    pub anchor_term: f64,
    pub energy: f64,
}

/// Energy at a trajectory sample against the path point `x_t` at the same
/// time, with `c(t) = t^q`, `β(t) = βt^q` and anchor weight `b`.
pub fn energy(sample: &Sample, x_t: &[f64], params: &FlowParams, b: f64) -> Result<EnergyBreakdown> {
    let n = sample.x.len();
    check_dim(n, x_t.len())?;
    let t = sample.t;
    let ct = t.powf(params.q);
    let bt = params.beta * ct;
    let e = params.epsilon(t);
    let cdot = params.q * t.powf(params.q - 1.0);
    let diff: Vec<f64> = sample.x.iter().zip(x_t).map(|(a, b)| a - b).collect();
    let inner: Vec<f64> = (0..n).map(|i| b * diff[i] + ct * (2.0 * sample.xdot[i] + bt * sample.ax[i])).collect();
    let v = 0.5 * dot(&inner, &inner);
    let nx2 = dot(&sample.x, &sample.x);
    let nd2 = dot(&diff, &diff);
    let nt2 = dot(x_t, x_t);
    let u = b * ct * bt * dot(&sample.ax, &diff) + 0.5 * b * ct * bt * e * (nx2 - nd2 - nt2);
    let operator_term = 0.5 * ct * ct * bt * bt * dot(&sample.ax, &sample.ax);
    let tikhonov_term = 2.0 * ct * ct * e * nx2;
    let coupling_weight = 0.5 * b * (2.0 * params.alpha - b - 2.0 * cdot + ct * bt * e);
    let anchor_term = coupling_weight * nd2;
    Ok(EnergyBreakdown {
        t,
        v,
        u,
        operator_term,
        tikhonov_term,
        coupling_weight,
        anchor_term,
        energy: v + u + operator_term + tikhonov_term + anchor_term,
    })
}

/// `u` written as `b c(t)β(t)⟨A(x) − A(x_t), x − x_t⟩`, which is nonnegative
/// for monotone `A`; it agrees with [`EnergyBreakdown::u`] when
/// `A(x_t) = −ε x_t`.
pub fn u_monotone_form(op: &MonotoneOperator, x: &[f64], x_t: &[f64], t: f64, params: &FlowParams, b: f64) -> Result<f64> {
    let ax = op.eval_slice(x)?;
    let axt = op.eval_slice(x_t)?;
    let ct = t.powf(params.q);
    let da: Vec<f64> = ax.iter().zip(&axt).map(|(a, c)| a - c).collect();
    let dx: Vec<f64> = x.iter().zip(x_t).map(|(a, c)| a - c).collect();
    Ok(b * ct * params.beta * ct * dot(&da, &dx))
}

/// Envelope `t^{2q+2s−2} + t^{−s}` bounding the energy.
pub fn energy_envelope(t: f64, params: &FlowParams) -> f64 {
    t.powf(2.0 * params.q + 2.0 * params.s - 2.0) + t.powf(-params.s)
}

/// `‖x − x_t‖` implied by the anchor term, for reporting.
pub fn anchor_distance(e: &EnergyBreakdown) -> f64 {
    if e.coupling_weight > 0.0 {
        (e.anchor_term / e.coupling_weight).sqrt()
    } else {
        f64::NAN
    }
}

/// `‖A(x)‖` implied by the operator term.
pub fn operator_norm_from(e: &EnergyBreakdown, params: &FlowParams) -> f64 {
    let w = e.t.powf(2.0 * params.q) * params.beta;
    norm(&[(2.0 * e.operator_term).sqrt() / w])
}
