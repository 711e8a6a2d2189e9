use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_WINDOW_SAMPLES: usize = 10;

/// Log-log fit of a positive series over a time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub quantity: String,
    pub window_lo: f64,
    pub window_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub claimed_exponent: f64,
    /// `max value / t^claimed_exponent` over the window
    pub sup_ratio: f64,
    pub samples: usize,
    pub dropped_zeros: usize,
}

/// Least-squares line through `(ln t, ln value)` on `window`, plus the sup of
/// `value / t^claimed_exponent`. Zero values are dropped and counted.
pub fn fit_rate(quantity: &str, series: &[(f64, f64)], window: (f64, f64), claimed_exponent: f64) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid window {lo}:{hi}")));
    }
    let inside: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= lo && *t <= hi).collect();
    if inside.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::EmptyWindow { lo, hi, needed: MIN_WINDOW_SAMPLES });
    }
    if inside.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(format!("{quantity}: values must be finite and nonnegative")));
    }
    let positive: Vec<(f64, f64)> = inside.iter().copied().filter(|(_, v)| *v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::AllZero { lo, hi });
    }
    let dropped_zeros = inside.len() - positive.len();
    if positive.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::EmptyWindow { lo, hi, needed: MIN_WINDOW_SAMPLES });
    }
    let xs: Vec<f64> = positive.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = positive.iter().map(|(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 1e-24 * m * (1.0 + my * my) { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        quantity: quantity.to_string(),
        window_lo: lo,
        window_hi: hi,
        slope,
        intercept,
        r2,
        claimed_exponent,
        sup_ratio: sup_ratio(&inside, window, |t| t.powf(claimed_exponent)),
        samples: positive.len(),
        dropped_zeros,
    })
}

/// `max value / envelope(t)` over samples in `window`; 0 for an empty window.
pub fn sup_ratio<F: Fn(f64) -> f64>(series: &[(f64, f64)], window: (f64, f64), envelope: F) -> f64 {
    series.iter().filter(|(t, _)| *t >= window.0 && *t <= window.1).map(|(t, v)| v / envelope(*t)).fold(0.0, f64::max)
}

/// Sup-ratio on a short window and on an extended one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStability {
    pub short: f64,
    pub extended: f64,
    /// `extended / short − 1`
    pub growth: f64,
    pub pass: bool,
}

/// An O-bound is accepted when the sup-ratio is finite and grows by less than
/// `max_growth` when the window is extended.
pub fn ratio_stability<F: Fn(f64) -> f64>(
    series: &[(f64, f64)],
    short: (f64, f64),
    extended: (f64, f64),
    envelope: F,
    max_growth: f64,
) -> RatioStability {
    let a = sup_ratio(series, short, &envelope);
    let b = sup_ratio(series, extended, &envelope);
    let growth = if a > 0.0 {
        b / a - 1.0
    } else if b == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    RatioStability { short: a, extended: b, growth, pass: b.is_finite() && growth < max_growth }
}

/// Rate report CSV: `quantity,window_lo,window_hi,slope,r2,claimed_exponent,sup_ratio`.
pub fn rates_csv(fits: &[RateFit]) -> String {
    use crate::fmt17;
    let mut out = String::from("quantity,window_lo,window_hi,slope,r2,claimed_exponent,sup_ratio\n");
    for f in fits {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.quantity,
            fmt17(f.window_lo),
            fmt17(f.window_hi),
            fmt17(f.slope),
            fmt17(f.r2),
            fmt17(f.claimed_exponent),
            fmt17(f.sup_ratio)
        ));
    }
    out
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::vector::log_grid;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn power_laws_are_recovered(c in 1e-3f64..1e3, e in -3.0f64..1.0) {
            let series: Vec<(f64, f64)> = log_grid(1.0, 1e4, 10).into_iter().map(|t| (t, c * t.powf(e))).collect();
            let fit = fit_rate("y", &series, (10.0, 1e4), e).unwrap();
            prop_assert!((fit.slope - e).abs() <= 1e-9);
            prop_assert!((fit.sup_ratio - c).abs() <= 1e-9 * c);
            let st = ratio_stability(&series, (10.0, 1e3), (10.0, 1e4), |t| t.powf(e), 0.1);
            prop_assert!(st.pass);
        }
    }
}
