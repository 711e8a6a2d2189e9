use serde::Serialize;

use super::ProofConstants;
use crate::dynamics::FlowParams;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Coefficients of the energy estimate at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientValues {
    pub t: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    /// Coefficient of `‖x_t‖²`, excluding the total-derivative part.
    pub r6_leading: f64,
    /// `((2b−2α)β−4)² − 4(2b+s3b+s5b−4α)(−2+s1+bs4+Ks6b/2)`
    pub forneg: f64,
    /// `t^{4q}` coefficient of `R2² − 4R1R3`; carries the factor `β` of the
    /// leading `R3` term.
    pub discriminant_leading: f64,
    /// `R1 ≈ r1_leading · t^q`
    pub r1_leading: f64,
    /// `R3 ≈ r3_leading · t^{3q}`
    pub r3_leading: f64,
    /// `R4 ≈ r4_leading · t^{−q−s}`
    pub r4_leading: f64,
    /// `R5 ≈ r5_leading · t^{−q−2s}`
    pub r5_leading: f64,
}

impl CoefficientValues {
    pub fn discriminant(&self) -> f64 {
        self.r2 * self.r2 - 4.0 * self.r1 * self.r3
    }

    /// Relative deviation of `R1` and `R3` from their leading terms.
    pub fn leading_deviation(&self, p: &FlowParams) -> (f64, f64) {
        let l1 = self.r1_leading * self.t.powf(p.q);
        let l3 = self.r3_leading * self.t.powf(3.0 * p.q);
        ((self.r1 - l1).abs() / l1.abs(), (self.r3 - l3).abs() / l3.abs())
    }

    /// Names of the sign conditions that fail at this time.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if !(self.r1 < 0.0) {
            f.push("R1 < 0");
        }
        if !(self.r3 < 0.0) {
            f.push("R3 < 0");
        }
        if !(self.discriminant() < 0.0) {
            f.push("R2^2 - 4 R1 R3 < 0");
        }
        if !(self.r4 <= 0.0) {
            f.push("R4 <= 0");
        }
        if !(self.r5 <= 0.0) {
            f.push("R5 <= 0");
        }
        f
    }
}

pub const CONDITIONS: [&str; 5] = ["R1 < 0", "R3 < 0", "R2^2 - 4 R1 R3 < 0", "R4 <= 0", "R5 <= 0"];

/// Exact coefficients with `c(t) = t^q`, `β(t) = βt^q`, `γ(t) = 1 − γt^{−s}`,
/// `α(t)c(t) = α`, `ε(t) = c t^{−(2q+s)}`, `r = q + s`.
pub fn coefficients(t: f64, p: &FlowParams, k: &ProofConstants) -> CoefficientValues {
    let (alpha, q, s, beta, gamma, c) = (p.alpha, p.q, p.s, p.beta, p.gamma, p.c);
    let ProofConstants { b, s1, s2, s3, s4, s5, s6, k: kk, .. } = *k;
    let r = q + s;
    let tr = t.powf(r);
    let ct = t.powf(q);
    let cd = q * t.powf(q - 1.0);
    let cdd = q * (q - 1.0) * t.powf(q - 2.0);
    let bt = beta * ct;
    let bd = q * beta * t.powf(q - 1.0);
    let gt = 1.0 - gamma * t.powf(-s);
    let e = p.epsilon(t);
    let ed = p.epsilon_dot(t);
    let cb_d = cd * bt + ct * bd;
    let ac = alpha;

    let r1 = (2.0 * b + s3 * b + s5 * b + 4.0 * cd - 4.0 * ac + 8.0 * kk * ct / tr) * ct;
    let r2 = (2.0 * b + 2.0 * cd - 2.0 * ac) * ct * bt + 2.0 * (cd * bt + ct * bd - 2.0 * ct * gt) * ct;
    let r3 = (2.0 * cd * bt + 2.0 * ct * bd - 2.0 * ct * gt + s1 * ct + b * s4 * ct) * ct * bt
        + kk * ((s6 * b * tr + 5.0 * bt) / (2.0 * tr)) * ct * ct * bt;
    let mixed = (b * (cb_d - ct * gt) - ct * ct * bt * e) * e;
    let r4 = b * ((alpha - cd) * s2 - 1.0) * ct * e - b * cdd
        + mixed
        + kk * (b * (2.0 * ac + b - 2.0 * cd) / (2.0 * tr) + b * bt / (2.0 * s6 * tr * tr));
    let r5 = 2.0 * (2.0 * ct * cd * e + ct * ct * ed) + b * (cb_d * e + ct * bt * ed) / 2.0 + b * ct * bt * bt * e * e / (4.0 * s5)
        - b * ct * e
        - mixed
        + kk * (2.0 * ct * ct * e / tr + b * ct * bt * e / (2.0 * tr));
    let r6_leading = b * ct * e
        + ct * ct * bt * e * e / s1
        + b * (alpha - cd) * ed * ed / (s2 * ct * e.powi(3))
        + b * ct * ed * ed / (s3 * e * e)
        + b * bt * ed * ed / (s4 * e * e)
        - b * kk * ct * bt * e / (2.0 * tr)
        + mixed;

    let first = ((2.0 * b - 2.0 * alpha) * beta - 4.0).powi(2);
    let l1 = 2.0 * b + s3 * b + s5 * b - 4.0 * alpha;
    let l3 = -2.0 + s1 + b * s4 + kk * s6 * b / 2.0;
    CoefficientValues {
        t,
        r1,
        r2,
        r3,
        r4,
        r5,
        r6_leading,
        forneg: first - 4.0 * l1 * l3,
        discriminant_leading: first - 4.0 * beta * l1 * l3,
        r1_leading: l1,
        r3_leading: l3 * beta,
        r4_leading: -alpha * c + 1.5 * kk * alpha * alpha,
        r5_leading: -alpha * gamma * c + (alpha * beta * beta / (4.0 * s5) + beta) * c * c + kk * c * (4.0 + alpha * beta) / 2.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub condition: &'static str,
    /// Grid points at which the condition fails.
    pub failures: usize,
    pub holds_at_end: bool,
    /// Last grid point at which the condition fails.
    pub last_failure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub params: FlowParams,
    pub constants: ProofConstants,
    pub certified: bool,
    /// Smallest grid point from which every condition holds to the end.
    pub t_star: Option<f64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub conditions: Vec<ConditionResult>,
    /// Values at the last grid point.
    pub at_end: CoefficientValues,
    pub constant_violations: Vec<String>,
}

impl Certificate {
    /// Structured plain-text report.
    pub fn report(&self) -> String {
        use crate::fmt17;
        let p = &self.params;
        let k = &self.constants;
        let mut out = String::new();
        out.push_str("[certificate]\n");
        out.push_str(&format!("status = {}\n", if self.certified { "certified" } else { "not_certified" }));
        out.push_str(&format!("t_star = {}\n", self.t_star.map_or("none".into(), fmt17)));
        out.push_str(&format!("grid = {} .. {} ({} points)\n", fmt17(self.grid_lo), fmt17(self.grid_hi), self.grid_points));
        out.push_str("\n[params]\n");
        for (name, v) in [("alpha", p.alpha), ("q", p.q), ("s", p.s), ("beta", p.beta), ("gamma", p.gamma), ("c", p.c), ("t0", p.t0)] {
            out.push_str(&format!("{name} = {}\n", fmt17(v)));
        }
        out.push_str(&format!("c_bound = {}\n", fmt17(p.tikhonov_bound())));
        out.push_str("\n[constants]\n");
        for (name, v) in
            [("b", k.b), ("tau", k.tau), ("s1", k.s1), ("s2", k.s2), ("s3", k.s3), ("s4", k.s4), ("s5", k.s5), ("s6", k.s6), ("K", k.k)]
        {
            out.push_str(&format!("{name} = {}\n", fmt17(v)));
        }
        for v in &self.constant_violations {
            out.push_str(&format!("violation = {v}\n"));
        }
        out.push_str("\n[conditions]\n");
        for c in &self.conditions {
            out.push_str(&format!(
                "{} : {} (failures {}, last failure {})\n",
                c.condition,
                if c.holds_at_end && self.certified {
                    "pass"
                } else if c.holds_at_end {
                    "holds at end"
                } else {
                    "FAIL"
                },
                c.failures,
                c.last_failure.map_or("none".into(), fmt17)
            ));
        }
        let e = &self.at_end;
        out.push_str("\n[leading]\n");
        for (name, v) in [
            ("R1_leading", e.r1_leading),
            ("R3_leading", e.r3_leading),
            ("R4_leading", e.r4_leading),
            ("R5_leading", e.r5_leading),
            ("forneg", e.forneg),
            ("discriminant_leading", e.discriminant_leading),
        ] {
            out.push_str(&format!("{name} = {}\n", fmt17(v)));
        }
        out.push_str("\n[at_grid_end]\n");
        for (name, v) in [("t", e.t), ("R1", e.r1), ("R2", e.r2), ("R3", e.r3), ("R4", e.r4), ("R5", e.r5), ("R6_leading", e.r6_leading)] {
            out.push_str(&format!("{name} = {}\n", fmt17(v)));
        }
        out
    }
}

/// Evaluates the sign conditions on `t_grid` and reports the threshold `T*`
/// from which all of them hold. Never fails on an uncertifiable input; see
/// [`certify`].
pub fn certify_report(p: &FlowParams, k: &ProofConstants, t_grid: &[f64], exec: Execution) -> Result<Certificate> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_grid must be increasing with at least two points".into()));
    }
    let hi = *t_grid.last().unwrap();
    if hi < 1e4 {
        return Err(Error::InvalidArgument(format!("t_grid must reach 1e4, ends at {hi}")));
    }
    if t_grid[0] < p.t0 {
        return Err(Error::InvalidArgument("t_grid starts before t0".into()));
    }
    let values = exec::map(exec, t_grid, |&t| coefficients(t, p, k));
    let fails: Vec<Vec<&'static str>> = values.iter().map(|v| v.failures()).collect();
    let conditions = CONDITIONS
        .iter()
        .map(|&name| {
            let hits: Vec<usize> = (0..values.len()).filter(|&i| fails[i].contains(&name)).collect();
            ConditionResult {
                condition: name,
                failures: hits.len(),
                holds_at_end: !fails.last().unwrap().contains(&name),
                last_failure: hits.last().map(|&i| t_grid[i]),
            }
        })
        .collect();
    let last_bad = fails.iter().rposition(|f| !f.is_empty());
    let t_star = match last_bad {
        None => Some(t_grid[0]),
        Some(i) if i + 1 < t_grid.len() => Some(t_grid[i + 1]),
        Some(_) => None,
    };
    Ok(Certificate {
        params: *p,
        constants: *k,
        certified: t_star.is_some(),
        t_star,
        grid_lo: t_grid[0],
        grid_hi: hi,
        grid_points: t_grid.len(),
        conditions,
        at_end: *values.last().unwrap(),
        constant_violations: k.violations(p),
    })
}

/// Like [`certify_report`], but `NotCertified` names the violated condition
/// when the conditions do not all hold at the end of the grid.
pub fn certify(p: &FlowParams, k: &ProofConstants, t_grid: &[f64], exec: Execution) -> Result<Certificate> {
    let cert = certify_report(p, k, t_grid, exec)?;
    if cert.certified {
        Ok(cert)
    } else {
        let failing: Vec<&str> = cert.conditions.iter().filter(|c| !c.holds_at_end).map(|c| c.condition).collect();
        Err(Error::NotCertified(format!("{} fails at t = {}", failing.join(", "), crate::fmt17(cert.grid_hi))))
    }
}

#[cfg(test)]
mod tests {
    use super::super::select_proof_constants;
    use super::*;
    use crate::vector::log_grid;
    use approx::assert_relative_eq;

    fn example() -> FlowParams {
        FlowParams { alpha: 2.0, q: 0.75, s: 1.0 / 6.0, beta: 1.0, gamma: 1.0, c: 0.5, t0: 1.0 }
    }

    #[test]
    fn leading_signs_for_example() {
        let p = example();
        let k = select_proof_constants(&p).unwrap();
        let v = coefficients(10.0, &p, &k);
        assert!(v.r1_leading < 0.0 && v.r3_leading < 0.0 && v.forneg < 0.0);
        assert!(v.r4_leading < 0.0 && v.r5_leading < 0.0);
        // beta = 1: both discriminant forms agree
        assert_relative_eq!(v.forneg, v.discriminant_leading, max_relative = 1e-15);
    }

    #[test]
    fn vanishing_auxiliaries_reduce_forneg() {
        let p = example();
        let k = ProofConstants { b: 2.0, tau: 0.6, s1: 0.0, s2: 0.5, s3: 0.0, s4: 0.0, s5: 0.5, s6: 0.0, k: 0.0 };
        // 16(1 − α) + 8 s5 α
        assert_relative_eq!(coefficients(5.0, &p, &k).forneg, -8.0, max_relative = 1e-15);
    }

    #[test]
    fn tikhonov_terms_vanish_without_c() {
        let p = FlowParams { c: 0.0, ..example() };
        let k = ProofConstants { b: 2.0, tau: 0.6, s1: 0.1, s2: 0.5, s3: 0.1, s4: 0.1, s5: 0.5, s6: 0.1, k: 0.0 };
        let v = coefficients(100.0, &p, &k);
        assert_eq!(v.r4_leading, 0.0);
        assert_eq!(v.r5_leading, 0.0);
        assert_eq!(v.r5, 0.0);
    }

    #[test]
    fn exact_values_approach_leading_terms() {
        let p = FlowParams { alpha: 3.0, q: 0.5, s: 0.3, beta: 1.0, gamma: 1.0, c: 1.0, t0: 1.0 };
        let k = select_proof_constants(&p).unwrap();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for t in [1e4, 1e6, 1e8] {
            let d = coefficients(t, &p, &k).leading_deviation(&p);
            assert!(d.0 < prev.0 && d.1 < prev.1);
            prev = d;
        }
        assert!(prev.0 <= 1e-2 && prev.1 <= 1e-2, "{prev:?}");
        let v = coefficients(1e12, &p, &k);
        let l4 = v.r4_leading * 1e12f64.powf(-p.q - p.s);
        let l5 = v.r5_leading * 1e12f64.powf(-p.q - 2.0 * p.s);
        assert!((v.r4 - l4).abs() < 0.2 * l4.abs(), "{} vs {l4}", v.r4);
        assert!((v.r5 - l5).abs() < 0.2 * l5.abs(), "{} vs {l5}", v.r5);
    }

    #[test]
    fn example_certifies() {
        let p = example();
        let k = select_proof_constants(&p).unwrap();
        let cert = certify(&p, &k, &log_grid(1.0, 1e6, 100), Execution::default()).unwrap();
        let t_star = cert.t_star.unwrap();
        assert!(t_star > 1.0 && t_star <= 1e6);
        assert!(cert.report().contains("status = certified"));
    }

    #[test]
    fn violated_k_or_s5_not_certified() {
        let p = example();
        let k = select_proof_constants(&p).unwrap();
        let grid = log_grid(1.0, 1e6, 50);
        let big_k = ProofConstants { k: 2.0 * (2.0 * p.c / (3.0 * p.alpha)), ..k };
        assert!(coefficients(1e6, &p, &big_k).r4_leading > 0.0);
        match certify(&p, &big_k, &grid, Execution::Sequential) {
            Err(Error::NotCertified(msg)) => assert!(msg.contains("R4"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let (lo, _) = super::super::constants::s5_interval(&p, k.tau);
        let small_s5 = ProofConstants { s5: 0.1 * lo, ..k };
        assert!(coefficients(1e6, &p, &small_s5).r5_leading > 0.0);
        match certify(&p, &small_s5, &grid, Execution::Sequential) {
            Err(Error::NotCertified(msg)) => assert!(msg.contains("R5"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_preconditions() {
        let p = example();
        let k = select_proof_constants(&p).unwrap();
        assert!(certify(&p, &k, &[1.0, 10.0], Execution::Sequential).is_err());
        assert!(certify(&p, &k, &[1.0, 1e5, 1e4], Execution::Sequential).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::super::select_proof_constants;
    use super::*;
    use crate::dynamics::validate_params;
    use proptest::prelude::*;

    fn admissible() -> impl Strategy<Value = FlowParams> {
        (1.5f64..5.0, 0.5f64..3.0, 0.5f64..3.0, 0.1f64..0.7, 0.05f64..0.9, 0.1f64..0.9).prop_map(|(alpha, beta, gamma, q, sf, cf)| {
            let s = sf * (0.95 - q);
            let mut p = FlowParams { alpha, q, s, beta, gamma, c: 1.0, t0: 1.0 };
            p.c = cf * p.tikhonov_bound();
            p
        })
    }

    proptest! {
        #[test]
        fn exact_coefficients_approach_leading_terms(p in admissible()) {
            let p = validate_params(p, false).unwrap();
            let Ok(k) = select_proof_constants(&p) else { return Ok(()) };
            let (a1, a3) = coefficients(1e6, &p, &k).leading_deviation(&p);
            let (b1, b3) = coefficients(1e12, &p, &k).leading_deviation(&p);
            prop_assert!(b1 <= a1 + 1e-12 && b3 <= a3 + 1e-12, "{a1} {a3} -> {b1} {b3}");
        }

        #[test]
        fn selected_constants_satisfy_their_bounds(p in admissible()) {
            let p = validate_params(p, false).unwrap();
            if let Ok(k) = select_proof_constants(&p) {
                prop_assert!(k.violations(&p).is_empty(), "{:?}", k.violations(&p));
            }
        }
    }
}
