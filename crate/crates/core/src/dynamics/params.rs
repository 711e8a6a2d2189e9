use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the regularized second-order flow
///
/// ```text
/// ẍ + α/t^q ẋ + β t^q d/dt A(x) + (1 − γ/t^s) A(x) + c/t^{2q+s} x = 0,   t ≥ t0.
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub alpha: f64,
    pub q: f64,
    pub s: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
}

fn default_t0() -> f64 {
    1.0
}

impl FlowParams {
    /// `r = q + s`
    pub fn r(&self) -> f64 {
        self.q + self.s
    }

    /// Exponent `p = 2q + s` of the Tikhonov parameter `ε(t) = c t^{−p}`.
    pub fn tikhonov_exponent(&self) -> f64 {
        2.0 * self.q + self.s
    }

    /// Upper bound on `c`: `8α(α−1)γ / (α²β² + 8(α−1)β)`.
    pub fn tikhonov_bound(&self) -> f64 {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        8.0 * a * (a - 1.0) * g / (a * a * b * b + 8.0 * (a - 1.0) * b)
    }

    /// `ε(t) = c t^{−(2q+s)}`.
    pub fn epsilon(&self, t: f64) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.c * t.powf(-self.tikhonov_exponent())
        }
    }

    /// `ε̇(t) = −(2q+s) c t^{−(2q+s)−1}`.
    pub fn epsilon_dot(&self, t: f64) -> f64 {
        -self.tikhonov_exponent() * self.epsilon(t) / t
    }

    /// Warnings that do not invalidate the parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.t0.powf(self.s) <= self.gamma {
            w.push(format!(
                "t0^s = {:.6} <= gamma = {}: coefficient 1 - gamma/t^s is nonpositive at the start",
                self.t0.powf(self.s),
                self.gamma
            ));
        }
        w
    }
}

/// Checks the admissibility conditions. `baseline` permits `c = 0` and skips
/// the upper bound on `c`.
pub fn validate_params(raw: FlowParams, baseline: bool) -> Result<FlowParams> {
    let fields = [("alpha", raw.alpha), ("q", raw.q), ("s", raw.s), ("beta", raw.beta), ("gamma", raw.gamma), ("c", raw.c), ("t0", raw.t0)];
    if fields.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteInput("flow parameters"));
    }
    if raw.alpha <= 1.0 {
        return Err(Error::AlphaTooSmall(raw.alpha));
    }
    if raw.q <= 0.0 || raw.s <= 0.0 || raw.q + raw.s >= 1.0 {
        return Err(Error::ExponentRange { q: raw.q, s: raw.s });
    }
    for (name, value) in [("beta", raw.beta), ("gamma", raw.gamma), ("t0", raw.t0)] {
        if value <= 0.0 {
            return Err(Error::NonPositive { name, value });
        }
    }
    if baseline {
        if raw.c < 0.0 {
            return Err(Error::NonPositive { name: "c", value: raw.c });
        }
    } else {
        if raw.c <= 0.0 {
            return Err(Error::NonPositive { name: "c", value: raw.c });
        }
        let bound = raw.tikhonov_bound();
        if raw.c >= bound {
            return Err(Error::TikhonovBound { c: raw.c, bound });
        }
    }
    for w in raw.warnings() {
        log::warn!("{w}");
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example() -> FlowParams {
        FlowParams { alpha: 2.0, q: 0.5, s: 0.3, beta: 1.0, gamma: 1.0, c: 1.0, t0: 1.0 }
    }

    #[test]
    fn accepts_example_and_bound_value() {
        let p = validate_params(example(), false).unwrap();
        // 8·2·1·1 / (4 + 8)
        assert_abs_diff_eq!(p.tikhonov_bound(), 16.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_c_above_bound() {
        let p = FlowParams { c: 2.0, ..example() };
        assert!(matches!(validate_params(p, false), Err(Error::TikhonovBound { .. })));
        // exactly on the bound is rejected too
        let on = FlowParams { c: example().tikhonov_bound(), ..example() };
        assert!(matches!(validate_params(on, false), Err(Error::TikhonovBound { .. })));
    }

    #[test]
    fn rejects_alpha_one() {
        let p = FlowParams { alpha: 1.0, ..example() };
        assert!(matches!(validate_params(p, false), Err(Error::AlphaTooSmall(_))));
    }

    #[test]
    fn exponent_range() {
        for (q, s) in [(0.0, 0.3), (0.5, 0.0), (0.6, 0.4), (0.9, 0.2), (-0.1, 0.5)] {
            let p = FlowParams { q, s, ..example() };
            assert!(matches!(validate_params(p, false), Err(Error::ExponentRange { .. })), "q={q} s={s}");
        }
    }

    #[test]
    fn non_positive_fields() {
        for p in [
            FlowParams { beta: 0.0, ..example() },
            FlowParams { gamma: -1.0, ..example() },
            FlowParams { t0: 0.0, ..example() },
            FlowParams { c: 0.0, ..example() },
        ] {
            assert!(matches!(validate_params(p, false), Err(Error::NonPositive { .. })));
        }
        assert!(validate_params(FlowParams { c: f64::NAN, ..example() }, false).is_err());
    }

    #[test]
    fn baseline_allows_zero_c_and_skips_bound() {
        assert!(validate_params(FlowParams { c: 0.0, ..example() }, true).is_ok());
        assert!(validate_params(FlowParams { c: 5.0, ..example() }, true).is_ok());
        assert!(validate_params(FlowParams { c: -1.0, ..example() }, true).is_err());
    }

    #[test]
    fn start_warning() {
        // t0^s = 1 <= gamma = 1
        assert_eq!(example().warnings().len(), 1);
        let late = FlowParams { t0: 10.0, ..example() };
        assert!(late.warnings().is_empty());
    }

    #[test]
    fn epsilon_values() {
        let p = FlowParams { c: 1.0, q: 0.5, s: 0.5 - 1e-12, ..example() };
        assert_abs_diff_eq!(p.epsilon(1.0), 1.0, epsilon = 1e-15);
        let p = FlowParams { c: 0.5, q: 0.75, s: 1.0 / 6.0, ..example() };
        // 0.5 · 100^{-5/3}
        assert_abs_diff_eq!(p.epsilon(100.0), 2.320794416806389e-4, epsilon = 1e-15);
        let p0 = FlowParams { c: 0.0, ..example() };
        assert_eq!(p0.epsilon(7.0), 0.0);
        assert_eq!(p0.epsilon_dot(7.0), 0.0);
    }
}
