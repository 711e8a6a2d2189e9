use std::path::{Path, PathBuf};

use serde::Serialize;

use super::artifacts::{to_json, write_atomic, CsvTable};
use super::config::ExperimentConfig;
use super::plot::{render_svg, PlotSpec};
use crate::diagnostics::{certify_report, energy, fit_rate, rates_csv, ratio_stability, select_proof_constants, Certificate, RateFit};
use crate::dynamics::{integrate, log_schedule, FlowParams, IntegratorStats, Trajectory};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::operators::{monotonicity_probe, MonotoneOperator, PointSampler, SolutionSet, Structure};
use crate::primal_dual::{gap_bound_check, kkt_oracle, metrics_csv, pd_metrics, PdMetric};
use crate::tikhonov::{minimal_norm_solution, path_checks, path_csv, tikhonov_path, ContinuationOptions, PathCheckOptions, SolveMethod};
use crate::vector::{dist, log_space};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub quantity: String,
    pub envelope: String,
    pub short_window: [f64; 2],
    pub extended_window: [f64; 2],
    pub short: f64,
    pub extended: f64,
    pub growth: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalState {
    pub t: f64,
    pub x: Vec<f64>,
    pub norm_xdot: f64,
    pub norm_ax: f64,
    pub dist_to_xstar: Option<f64>,
    pub dist_to_xt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Echo of the configuration that produced this report.
    pub config: ExperimentConfig,
    pub checks: Vec<CheckResult>,
    pub rates: Vec<RateFit>,
    pub ratios: Vec<RatioEntry>,
    pub x_star: Option<Vec<f64>>,
    pub final_state: FinalState,
    pub integrator: IntegratorStats,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Report plus artifact contents, not yet written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<(String, String)>,
}

/// Exponents of the rate envelopes `t^{a} + t^{b}` for `‖ẋ‖`, `‖A(x)‖` and
/// `‖x − x_t‖`.
pub fn rate_envelopes(p: &FlowParams) -> [(&'static str, f64, f64); 3] {
    let (q, s) = (p.q, p.s);
    [("norm_xdot", s - 1.0, -(2.0 * q + s) / 2.0), ("norm_Ax", s - 1.0 - q, -(4.0 * q + s) / 2.0), ("dist_to_xt", q + s - 1.0, -s / 2.0)]
}

fn short_window(lo: f64, hi: f64) -> [f64; 2] {
    let cut = if hi / 10.0 > lo { hi / 10.0 } else { (lo * hi).sqrt() };
    [lo, cut]
}

fn stability_entry(quantity: &str, series: &[(f64, f64)], window: [f64; 2], a: f64, b: f64) -> RatioEntry {
    let short = short_window(window[0], window[1]);
    let st = ratio_stability(series, (short[0], short[1]), (window[0], window[1]), |t| t.powf(a) + t.powf(b), 0.1);
    RatioEntry {
        quantity: quantity.to_string(),
        envelope: format!("t^{} + t^{}", crate::fmt17(a), crate::fmt17(b)),
        short_window: short,
        extended_window: window,
        short: st.short,
        extended: st.extended,
        growth: st.growth,
        pass: st.pass,
    }
}

fn minimal_norm(op: &MonotoneOperator, sol: Option<&SolutionSet>, warnings: &mut Vec<String>) -> Option<Vec<f64>> {
    if op.affine_form().is_none() {
        if let Some(s) = sol {
            return Some(s.min_norm_point());
        }
    }
    match minimal_norm_solution(op, Some(ContinuationOptions::default())) {
        Ok(m) => Some(m.x_star),
        Err(e) => {
            warnings.push(format!("minimal-norm solution unavailable: {e}"));
            sol.map(SolutionSet::min_norm_point)
        }
    }
}

/// Certificate for the configured parameters, honoring constant overrides.
pub fn build_certificate(cfg: &ExperimentConfig, p: &FlowParams, exec: Execution) -> Result<Certificate> {
    let mut consts = select_proof_constants(p)?;
    if let Some(k) = cfg.diagnostics.k_override {
        consts.k = k;
    }
    if let Some(s5) = cfg.diagnostics.s5_override {
        consts.s5 = s5;
    }
    let end = cfg.diagnostics.certify_grid_end.unwrap_or(1e6_f64.max(cfg.t_end()));
    certify_report(p, &consts, &crate::vector::log_grid(p.t0, end, 20), exec)
}

/// Runs the configured experiment and renders all artifacts in memory.
pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    let p = cfg.validate()?;
    if cfg.diagnostics.energy && p.c <= 0.0 {
        return Err(Error::InvalidArgument("energy diagnostics require c > 0".into()));
    }
    let (op, sol) = cfg.build_problem()?;
    let init = cfg.initial_conditions(op.dim())?;
    let mut warnings = p.warnings();
    let mut checks = Vec::new();
    let mut rates = Vec::new();
    let mut ratios = Vec::new();
    let mut artifacts: Vec<(String, String)> = Vec::new();

    let x_star = minimal_norm(&op, sol.as_ref(), &mut warnings);
    let schedule = log_schedule(p.t0, cfg.t_end(), cfg.schedule.per_decade);
    let traj = integrate(&op, &p, &init, &schedule, &cfg.integrator_config())?;
    let times = traj.times();

    let path = if p.c > 0.0 { Some(tikhonov_path(&op, &p, &times, SolveMethod::Auto, exec)?) } else { None };
    let path_x: Option<Vec<Vec<f64>>> = path.as_ref().map(|pts| pts.iter().map(|pt| pt.x.clone()).collect());
    let traj_csv = traj.to_csv(x_star.as_deref(), path_x.as_deref());
    artifacts.push(("trajectory.csv".into(), traj_csv.clone()));
    if let Some(pts) = &path {
        artifacts.push(("path.csv".into(), path_csv(pts)));
    }

    let window = cfg.rate_window();
    let envelopes = rate_envelopes(&p);
    if cfg.diagnostics.rates {
        let mut ok = true;
        for (name, a, b) in envelopes {
            let series: Vec<(f64, f64)> = match name {
                "norm_xdot" => traj.series(|s| s.norm_xdot()),
                "norm_Ax" => traj.series(|s| s.norm_ax()),
                _ => match &path_x {
                    Some(px) => traj.samples.iter().zip(px).map(|(s, x)| (s.t, dist(&s.x, x))).collect(),
                    None => continue,
                },
            };
            match fit_rate(name, &series, (window[0], window[1]), a.max(b)) {
                Ok(fit) => rates.push(fit),
                Err(Error::AllZero { .. }) => warnings.push(format!("{name} is identically zero on the window")),
                Err(e) => return Err(e),
            }
            let entry = stability_entry(name, &series, window, a, b);
            // the distance to the path is reported but not gated
            if name != "dist_to_xt" {
                ok &= entry.pass;
            }
            ratios.push(entry);
        }
        checks.push(CheckResult {
            name: "rates".into(),
            pass: ok,
            detail: "sup-ratios of norm_xdot and norm_Ax grow < 10% when the window is extended a decade".into(),
        });
        artifacts.push(("rates.csv".into(), String::new()));
    }

    if cfg.diagnostics.energy {
        let px = path_x.as_ref().expect("c > 0 checked");
        let mut min_u = f64::INFINITY;
        let mut series = Vec::with_capacity(traj.samples.len());
        for (s, x) in traj.samples.iter().zip(px) {
            let e = energy(s, x, &p, p.alpha)?;
            min_u = min_u.min(e.u);
            series.push((s.t, e.energy));
        }
        let lo = (window[1] / 100.0).max(p.t0);
        let entry = {
            let mut e = stability_entry("energy", &series, [lo, window[1]], 2.0 * p.q + 2.0 * p.s - 2.0, -p.s);
            e.envelope = format!("t^{} + t^{}", crate::fmt17(2.0 * p.q + 2.0 * p.s - 2.0), crate::fmt17(-p.s));
            e
        };
        let pass = entry.pass && min_u >= -1e-10;
        checks.push(CheckResult {
            name: "energy".into(),
            pass,
            detail: format!(
                "min u = {}, envelope ratio growth over the final decade = {}",
                crate::fmt17(min_u),
                crate::fmt17(entry.growth)
            ),
        });
        ratios.push(entry);
    }

    if cfg.diagnostics.path_checks {
        match &x_star {
            Some(xs) => {
                let rep = path_checks(&op, &p, &log_space(p.t0, cfg.t_end(), 50), xs, &PathCheckOptions::default(), exec)?;
                warnings.extend(rep.warnings.iter().cloned());
                checks.push(CheckResult {
                    name: "path_checks".into(),
                    pass: rep.pass(),
                    detail: format!(
                        "norm bound {}, derivative bound {}, monotone norm {}",
                        rep.norm_bound_pass, rep.derivative_pass, rep.monotone_pass
                    ),
                });
            }
            None => checks.push(CheckResult { name: "path_checks".into(), pass: false, detail: "no minimal-norm solution".into() }),
        }
    }

    if cfg.diagnostics.certify {
        match build_certificate(cfg, &p, exec) {
            Ok(cert) => {
                checks.push(CheckResult {
                    name: "certify".into(),
                    pass: cert.certified,
                    detail: format!("T* = {}", cert.t_star.map_or("none".into(), crate::fmt17)),
                });
                artifacts.push(("certificate.txt".into(), cert.report()));
            }
            Err(e @ Error::InfeasibleConstants(_)) => {
                checks.push(CheckResult { name: "certify".into(), pass: false, detail: e.to_string() });
                artifacts.push(("certificate.txt".into(), format!("[certificate]\nstatus = not_certified\nreason = {e}\n")));
            }
            Err(e) => return Err(e),
        }
    }

    if let Structure::Saddle(sd) = op.structure() {
        let saddle = kkt_oracle(&sd.problem).ok();
        let metrics: Vec<PdMetric> = pd_metrics(&sd.problem, &traj, saddle.as_ref());
        artifacts.push(("pd_metrics.csv".into(), metrics_csv(&metrics)));
        if let Some(sp) = &saddle {
            let rep = gap_bound_check(&metrics, sp, (window[0], window[1]));
            checks.push(CheckResult {
                name: "pd_gap_bound".into(),
                pass: rep.pass,
                detail: format!("M1 = {}, M2 = {}, {} samples", crate::fmt17(rep.m1), crate::fmt17(rep.m2), rep.samples),
            });
        }
        if cfg.diagnostics.rates {
            let (_, a, b) = envelopes[1];
            let feas: Vec<(f64, f64)> = metrics.iter().map(|m| (m.t, m.feasibility)).collect();
            let gap: Vec<(f64, f64)> = metrics.iter().map(|m| (m.t, m.gap.abs())).collect();
            let mut ok = true;
            for (name, series) in [("feasibility", feas), ("gap", gap)] {
                if series.iter().any(|(_, v)| v.is_nan()) {
                    continue;
                }
                match fit_rate(name, &series, (window[0], window[1]), a.max(b)) {
                    Ok(fit) => rates.push(fit),
                    Err(Error::AllZero { .. }) => warnings.push(format!("{name} is identically zero on the window")),
                    Err(e) => return Err(e),
                }
                let entry = stability_entry(name, &series, window, a, b);
                ok &= entry.pass;
                ratios.push(entry);
            }
            checks.push(CheckResult { name: "pd_rates".into(), pass: ok, detail: "feasibility and gap sup-ratios stable".into() });
        }
    }

    if cfg.diagnostics.probe {
        let rep = monotonicity_probe(&op, &PointSampler::new(cfg.seed, op.dim(), 10.0), 1000, 1e-10, exec)?;
        checks.push(CheckResult {
            name: "monotonicity_probe".into(),
            pass: rep.pass,
            detail: format!("min inner product {}", crate::fmt17(rep.min_inner_product)),
        });
    }

    if let Some(slot) = artifacts.iter_mut().find(|(n, _)| n == "rates.csv") {
        slot.1 = rates_csv(&rates);
    }
    let table = CsvTable::parse(&traj_csv)?;
    let mut y = vec!["norm_xdot".to_string(), "norm_Ax".to_string()];
    if x_star.is_some() {
        y.push("dist_to_xstar".into());
    }
    let spec = PlotSpec {
        x: "t".into(),
        y,
        loglog: true,
        reference_slopes: vec![envelopes[0].1.max(envelopes[0].2), envelopes[1].1.max(envelopes[1].2)],
        title: Some(format!("{} trajectory", op.label())),
    };
    artifacts.push(("trajectory.svg".into(), render_svg(&table, &spec)?));

    let last = traj.last();
    let final_state = FinalState {
        t: last.t,
        x: last.x.clone(),
        norm_xdot: last.norm_xdot(),
        norm_ax: last.norm_ax(),
        dist_to_xstar: x_star.as_ref().map(|xs| dist(&last.x, xs)),
        dist_to_xt: path_x.as_ref().map(|px| dist(&last.x, px.last().unwrap())),
    };
    let mut files: Vec<String> = artifacts.iter().map(|(n, _)| n.clone()).collect();
    files.push("report.json".into());
    let report = RunReport { config: cfg.clone(), checks, rates, ratios, x_star, final_state, integrator: traj.stats, warnings, files };
    artifacts.push(("report.json".into(), to_json(&report)?));
    Ok(RunOutput { report, artifacts })
}

/// Writes every artifact atomically into `dir`.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, contents) in &out.artifacts {
        let path = dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Trajectory of a config without diagnostics; used by tests and benches.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(MonotoneOperator, Trajectory)> {
    let p = cfg.validate()?;
    let (op, _) = cfg.build_problem()?;
    let init = cfg.initial_conditions(op.dim())?;
    let traj = integrate(&op, &p, &init, &log_schedule(p.t0, cfg.t_end(), cfg.schedule.per_decade), &cfg.integrator_config())?;
    Ok((op, traj))
}
