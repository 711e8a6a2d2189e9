use serde::Serialize;

use crate::dynamics::FlowParams;
use crate::error::{Error, Result};

/// Fraction of the admissible upper bound on `K` that is used.
pub const K_FRACTION: f64 = 0.5;

/// Auxiliary constants of the Lyapunov argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProofConstants {
    pub b: f64,
    pub tau: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub s5: f64,
    pub s6: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

/// Largest admissible `τ`: `αγ − c(α²β² + 8(α−1)β) / (8(α−1))`.
pub fn tau_max(p: &FlowParams) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    a * p.gamma - p.c * (a * a * b * b + 8.0 * (a - 1.0) * b) / (8.0 * (a - 1.0))
}

/// Open interval for `s5`.
pub fn s5_interval(p: &FlowParams, tau: f64) -> (f64, f64) {
    let a = p.alpha;
    let lo = a * p.beta * p.beta / (4.0 * ((a * p.gamma - tau) / p.c - p.beta));
    (lo, 2.0 * (a - 1.0) / a)
}

/// Strict upper bound on `K`: `min(2τ/(4+αβ), 2c/(3α))`.
pub fn k_bound(p: &FlowParams, tau: f64) -> f64 {
    (2.0 * tau / (4.0 + p.alpha * p.beta)).min(2.0 * p.c / (3.0 * p.alpha))
}

/// `t^{4q}` coefficient of `R2² − 4 R1 R3` with a common small value
/// `δ = s1 = s3 = s4 = s6`.
fn discriminant_with(p: &FlowParams, b: f64, s5: f64, k: f64, delta: f64) -> f64 {
    let first = ((2.0 * b - 2.0 * p.alpha) * p.beta - 4.0).powi(2);
    let r1 = 2.0 * b + delta * b + s5 * b - 4.0 * p.alpha;
    let r3 = -2.0 + delta + b * delta + k * delta * b / 2.0;
    first - 4.0 * p.beta * r1 * r3
}

/// `b = α`, `s2 = 1/α`, `τ = τ_max/2`, `s5` the geometric mean of its
/// interval, `K = K_FRACTION · bound`, and `s1 = s3 = s4 = s6 = δ` with `δ`
/// the largest of `10^{−1}, …, 10^{−8}` that makes the leading discriminant
/// negative.
pub fn select_proof_constants(p: &FlowParams) -> Result<ProofConstants> {
    if !(p.c > 0.0) {
        return Err(Error::InvalidArgument("certification requires c > 0".into()));
    }
    let b = p.alpha;
    let tau = 0.5 * tau_max(p);
    if !(tau > 0.0) {
        return Err(Error::InfeasibleConstants(format!("tau_max = {} is not positive", tau_max(p))));
    }
    let (lo, hi) = s5_interval(p, tau);
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InfeasibleConstants(format!("s5 interval ({lo}, {hi}) is empty")));
    }
    let s5 = (lo * hi).sqrt();
    let k = K_FRACTION * k_bound(p, tau);
    let delta = (1..=8).map(|e| 10f64.powi(-e)).find(|&d| discriminant_with(p, b, s5, k, d) < 0.0).ok_or_else(|| {
        Error::InfeasibleConstants(format!(
            "leading discriminant is nonnegative for every delta (value at delta=1e-8: {})",
            discriminant_with(p, b, s5, k, 1e-8)
        ))
    })?;
    let consts = ProofConstants { b, tau, s1: delta, s2: 1.0 / p.alpha, s3: delta, s4: delta, s5, s6: delta, k };
    let violations = consts.violations(p);
    if !violations.is_empty() {
        return Err(Error::InfeasibleConstants(violations.join("; ")));
    }
    Ok(consts)
}

impl ProofConstants {
    /// Invariants that fail for these constants, as messages.
    pub fn violations(&self, p: &FlowParams) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.b > 0.0 && self.b < 2.0 * p.alpha) {
            v.push(format!("b = {} outside (0, 2 alpha)", self.b));
        }
        if (self.s2 - 1.0 / p.alpha).abs() > 1e-15 {
            v.push(format!("s2 = {} differs from 1/alpha", self.s2));
        }
        if !(self.tau > 0.0) {
            v.push(format!("tau = {} not positive", self.tau));
        }
        let c_bound =
            8.0 * (p.alpha - 1.0) * (p.alpha * p.gamma - self.tau) / (p.alpha * p.alpha * p.beta * p.beta + 8.0 * (p.alpha - 1.0) * p.beta);
        if !(p.c < c_bound) {
            v.push(format!("c = {} not below {c_bound}", p.c));
        }
        let (lo, hi) = s5_interval(p, self.tau);
        if !(self.s5 > lo && self.s5 < hi) {
            v.push(format!("s5 = {} outside ({lo}, {hi})", self.s5));
        }
        let kb = k_bound(p, self.tau);
        if !(self.k > 0.0 && self.k < kb) {
            v.push(format!("K = {} outside (0, {kb})", self.k));
        }
        for (name, s) in [("s1", self.s1), ("s3", self.s3), ("s4", self.s4), ("s6", self.s6)] {
            if !(s > 0.0) {
                v.push(format!("{name} = {s} not positive"));
            }
        }
        v
    }
}
