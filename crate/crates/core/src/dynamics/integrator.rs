//! Dormand–Prince 5(4) with PI step-size control and the method's native
//! continuous extension for sampling between steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-8, abs: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub tol: Tolerances,
    pub max_steps: u64,
    pub h_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { tol: Tolerances::default(), max_steps: 50_000_000, h_max: f64::INFINITY }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: u64,
    pub rejections: u64,
    pub rhs_evals: u64,
}

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], y_new: vec![0.0; n], err: vec![0.0; n] }
    }
}

/// One Dormand–Prince step of size `h` from `(t, y)` with `k[0] = f(t, y)`
/// already filled. Leaves the 5th-order solution in `y_new`, the embedded
/// error estimate in `err`, and `f(t+h, y_new)` in `k[6]`.
fn step<F>(f: &mut F, t: f64, y: &[f64], h: f64, s: &mut Stages)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let [k1, k2, k3, k4, k5, k6, k7] = &mut s.k;
    let tmp = &mut s.tmp;
    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    f(t + C2 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f(t + C3 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f(t + C4 * h, tmp, k4);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f(t + C5 * h, tmp, k5);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f(t + h, tmp, k6);
    for i in 0..n {
        s.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    f(t + h, &s.y_new, k7);
    for i in 0..n {
        s.err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
}

/// Continuous extension on the last accepted step.
struct Dense {
    t: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn new(n: usize) -> Self {
        Self { t: 0.0, h: 0.0, r: std::array::from_fn(|_| vec![0.0; n]) }
    }

    fn prepare(&mut self, t: f64, h: f64, y: &[f64], s: &Stages) {
        self.t = t;
        self.h = h;
        let k = &s.k;
        for i in 0..y.len() {
            let ydiff = s.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            self.r[0][i] = y[i];
            self.r[1][i] = ydiff;
            self.r[2][i] = bspl;
            self.r[3][i] = ydiff - h * k[6][i] - bspl;
            self.r[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        for i in 0..out.len() {
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], tol: &Tolerances) -> f64 {
    let n = y.len() as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sk = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sk) * (e / sk)
        })
        .sum();
    (sum / n).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], tol: &Tolerances, h_max: f64, span: f64, evals: &mut u64) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len() as f64;
    let sk: Vec<f64> = y.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let dnf = (f0.iter().zip(&sk).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let dny = (y.iter().zip(&sk).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-5 || dny <= 1e-5 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(h_max).min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h, &y1, &mut f1);
    *evals += 1;
    let der2 = (f1.iter().zip(f0).zip(&sk).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n).sqrt() / h;
    let der12 = der2.abs().max(dnf);
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(h_max).min(span)
}

/// Adaptive integration of `y' = f(t, y)` from `(t0, y0)` through the
/// strictly increasing `schedule` (first point ≥ `t0`). `sample` is called once
/// per schedule point, in order, with the interpolated state.
pub fn integrate_adaptive<F, S>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    schedule: &[f64],
    config: &IntegratorConfig,
    mut sample: S,
) -> Result<IntegratorStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    validate_schedule(t0, schedule)?;
    if !(config.tol.rel > 0.0 && config.tol.abs > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut next = 0;
    while next < schedule.len() && schedule[next] <= t0 {
        sample(t0, &y)?;
        next += 1;
    }
    if next == schedule.len() {
        return Ok(stats);
    }
    let t_end = *schedule.last().unwrap();

    let mut s = Stages::new(n);
    let mut dense = Dense::new(n);
    let mut out = vec![0.0; n];
    f(t, &y, &mut s.k[0]);
    stats.rhs_evals += 1;
    let mut h = initial_step(&mut f, t, &y, &s.k[0].clone(), &config.tol, config.h_max, t_end - t, &mut stats.rhs_evals);
    let expo = 0.2 - BETA * 0.75;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while next < schedule.len() {
        if stats.steps + stats.rejections >= config.max_steps {
            return Err(Error::StepLimit { t, max_steps: config.max_steps });
        }
        let mut last = false;
        if t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { t });
            }
            return Err(Error::StepSizeUnderflow { t, h, last_state: y });
        }
        step(&mut f, t, &y, h, &mut s);
        stats.rhs_evals += 6;
        let err = error_norm(&y, &s.y_new, &s.err, &config.tol);
        if !err.is_finite() {
            stats.rejections += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }
        let fac11 = err.powf(expo);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(config.h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            stats.steps += 1;
            let t_new = if last { t_end } else { t + h };
            dense.prepare(t, t_new - t, &y, &s);
            while next < schedule.len() && schedule[next] <= t_new {
                if schedule[next] == t_new {
                    sample(t_new, &s.y_new)?;
                } else {
                    dense.eval(schedule[next], &mut out);
                    sample(schedule[next], &out)?;
                }
                next += 1;
            }
            std::mem::swap(&mut y, &mut s.y_new);
            s.k.swap(0, 6);
            t = t_new;
            h = h_new;
            last_rejected = false;
        } else {
            stats.rejections += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Ok(stats)
}

fn validate_schedule(t0: f64, schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    if schedule[0] < t0 {
        return Err(Error::InvalidArgument(format!("schedule starts at {} before t0 = {t0}", schedule[0])));
    }
    if schedule.iter().any(|t| !t.is_finite()) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("schedule must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `steps` fixed Dormand–Prince steps from `(t, y)` to `t_end` (which may lie
/// before `t`). Used for short auxiliary integrations around checkpoints.
pub fn integrate_fixed<F>(mut f: F, t: f64, y: &[f64], t_end: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let h = (t_end - t) / steps as f64;
    let mut s = Stages::new(n);
    let mut y = y.to_vec();
    for i in 0..steps {
        let ti = t + h * i as f64;
        f(ti, &y, &mut s.k[0]);
        step(&mut f, ti, &y, h, &mut s);
        std::mem::swap(&mut y, &mut s.y_new);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oscillator(_: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn harmonic_oscillator_accuracy_and_dense_output() {
        let schedule: Vec<f64> = (0..=100).map(|i| i as f64 * 0.2).collect();
        let mut samples = Vec::new();
        let cfg = IntegratorConfig::with_tolerances(Tolerances { rel: 1e-10, abs: 1e-12 });
        let stats = integrate_adaptive(oscillator, 0.0, &[1.0, 0.0], &schedule, &cfg, |t, y| {
            samples.push((t, y[0], y[1]));
            Ok(())
        })
        .unwrap();
        assert_eq!(samples.len(), 101);
        for (t, x, v) in samples {
            assert!((x - t.cos()).abs() < 1e-8, "t={t}");
            assert!((v + t.sin()).abs() < 1e-8, "t={t}");
        }
        assert!(stats.steps > 0);
        assert!(stats.rhs_evals >= 6 * stats.steps);
    }

    #[test]
    fn exponential_decay_fifth_order() {
        // y' = -y: fixed-step error shrinks ~32x when halving the step
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
        let e1 = (integrate_fixed(f, 0.0, &[1.0], 2.0, 10)[0] - (-2.0f64).exp()).abs();
        let e2 = (integrate_fixed(f, 0.0, &[1.0], 2.0, 20)[0] - (-2.0f64).exp()).abs();
        let ratio = e1 / e2;
        assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
        // backward integration recovers the start
        let fwd = integrate_fixed(f, 0.0, &[1.0], 0.5, 8);
        let back = integrate_fixed(f, 0.5, &fwd, 0.0, 8);
        assert_relative_eq!(back[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn sample_at_start() {
        let mut ts = Vec::new();
        integrate_adaptive(oscillator, 1.0, &[1.0, 0.0], &[1.0, 2.0], &IntegratorConfig::default(), |t, _| {
            ts.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(ts, vec![1.0, 2.0]);
    }

    #[test]
    fn bad_schedules() {
        let cfg = IntegratorConfig::default();
        let ok = |_: f64, _: &[f64]| Ok(());
        assert!(integrate_adaptive(oscillator, 1.0, &[1.0, 0.0], &[0.5, 2.0], &cfg, ok).is_err());
        assert!(integrate_adaptive(oscillator, 1.0, &[1.0, 0.0], &[2.0, 2.0], &cfg, ok).is_err());
        assert!(integrate_adaptive(oscillator, 1.0, &[1.0, 0.0], &[], &cfg, ok).is_err());
        let bad_tol = IntegratorConfig::with_tolerances(Tolerances { rel: 0.0, abs: 1e-10 });
        assert!(integrate_adaptive(oscillator, 1.0, &[1.0, 0.0], &[2.0], &bad_tol, ok).is_err());
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y², y(0) = 1 blows up at t = 1
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0];
        let r = integrate_adaptive(f, 0.0, &[1.0], &[2.0], &IntegratorConfig::default(), |_, _| Ok(()));
        match r {
            Err(Error::StepSizeUnderflow { t, last_state, .. }) => {
                assert!(t < 1.0 + 1e-6 && t > 0.99, "t = {t}");
                assert!(last_state[0].is_finite() && last_state[0] > 1e3);
            }
            Err(Error::NonFiniteState { t }) => assert!(t < 1.0),
            other => panic!("expected blow-up error, got {other:?}"),
        }
    }
}
