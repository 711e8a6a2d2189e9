use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{validate_params, FlowParams, InitialConditions, IntegratorConfig, Tolerances};
use crate::error::{Error, Result};
use crate::operators::{builtin, MonotoneOperator, ProblemFile, SolutionSet};
use crate::vector::VectorPoint;

/// A single experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub params: FlowParams,
    /// Permit `c = 0` and skip the bound on `c`.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub initial: InitialSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Drives monotonicity probes and random initial positions only.
    #[serde(default)]
    pub seed: u64,
}

/// Exactly one of `builtin`, `file` or `inline`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<ProblemFile>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Drawn uniformly from `[−random_radius, random_radius]ⁿ` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub t_end: f64,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

fn default_rtol() -> f64 {
    Tolerances::default().rel
}

fn default_atol() -> f64 {
    Tolerances::default().abs
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self { rtol: default_rtol(), atol: default_atol(), max_steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub energy: bool,
    #[serde(default)]
    pub certify: bool,
    #[serde(default)]
    pub rates: bool,
    #[serde(default)]
    pub path_checks: bool,
    #[serde(default)]
    pub probe: bool,
    /// Window `[lo, hi]` for rate fits; defaults to the last two decades.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_window: Option<[f64; 2]>,
    /// Last point of the certification grid (default `max(1e6, t_end)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify_grid_end: Option<f64>,
    /// Replaces the selected `K` before certification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_override: Option<f64>,
    /// Replaces the selected `s5` before certification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s5_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Reads a config; a relative problem file is resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(file) = &cfg.problem.file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.problem.file = Some(base.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validated_params(&self) -> Result<FlowParams> {
        validate_params(self.params, self.baseline)
    }

    pub fn t_end(&self) -> f64 {
        self.schedule.t_end
    }

    pub fn rate_window(&self) -> [f64; 2] {
        self.diagnostics.rate_window.unwrap_or([(self.t_end() / 100.0).max(self.params.t0), self.t_end()])
    }

    /// Checks everything that does not need a simulation.
    pub fn validate(&self) -> Result<FlowParams> {
        let p = self.validated_params()?;
        let s = &self.schedule;
        if !(s.t_end > p.t0) || !s.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("schedule.t_end = {} must exceed t0 = {}", s.t_end, p.t0)));
        }
        if s.per_decade == 0 {
            return Err(Error::InvalidArgument("schedule.per_decade must be >= 1".into()));
        }
        if !(self.integrator.rtol > 0.0 && self.integrator.atol > 0.0) {
            return Err(Error::InvalidArgument("integrator tolerances must be positive".into()));
        }
        if self.diagnostics.rates || self.diagnostics.energy {
            let [lo, hi] = self.rate_window();
            if !(lo < hi) || lo < p.t0 || hi > s.t_end {
                return Err(Error::EmptyWindow { lo, hi, needed: crate::diagnostics::MIN_WINDOW_SAMPLES });
            }
        }
        if (self.diagnostics.certify || self.diagnostics.path_checks) && p.c <= 0.0 {
            return Err(Error::InvalidArgument("certify and path_checks require c > 0".into()));
        }
        Ok(p)
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::with_tolerances(Tolerances { rel: self.integrator.rtol, abs: self.integrator.atol });
        if let Some(m) = self.integrator.max_steps {
            cfg.max_steps = m;
        }
        cfg
    }

    pub fn build_problem(&self) -> Result<(MonotoneOperator, Option<SolutionSet>)> {
        let p = &self.problem;
        match (&p.builtin, &p.file, &p.inline) {
            (Some(name), None, None) => builtin(name),
            (None, Some(file), None) => ProblemFile::load(file)?.build(),
            (None, None, Some(inline)) => inline.build(),
            _ => Err(Error::InvalidArgument("problem needs exactly one of builtin, file, inline".into())),
        }
    }

    pub fn initial_conditions(&self, dim: usize) -> Result<InitialConditions> {
        let u0 = match &self.initial.u0 {
            Some(u) => u.clone(),
            None => {
                let radius = self.initial.random_radius.unwrap_or(1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..dim).map(|_| radius * rng.gen_range(-1.0..=1.0)).collect()
            }
        };
        let v0 = self.initial.v0.clone().unwrap_or_else(|| vec![0.0; dim]);
        if u0.len() != dim || v0.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: if u0.len() != dim { u0.len() } else { v0.len() } });
        }
        Ok(InitialConditions { u0: VectorPoint::new(u0)?, v0: VectorPoint::new(v0)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) const TEXT: &str = r#"
seed = 3
[problem]
builtin = "rankdef"
[params]
alpha = 2.0
q = 0.75
s = 0.16666666666666666
beta = 0.5
gamma = 1.0
c = 0.25
[initial]
u0 = [2.0, -1.0, 3.0, -2.0]
[schedule]
t_end = 1e4
[diagnostics]
rates = true
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        assert_eq!(cfg.schedule.per_decade, 20);
        assert_eq!(cfg.params.t0, 1.0);
        assert_eq!(cfg.rate_window(), [100.0, 1e4]);
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_windows() {
        assert!(ExperimentConfig::from_toml(&format!("{TEXT}\nbogus = 1\n")).is_err());
        let mut cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        cfg.diagnostics.rate_window = Some([1e3, 1e5]);
        assert!(matches!(cfg.validate(), Err(Error::EmptyWindow { .. })));
        cfg.params.c = 5.0;
        assert!(matches!(cfg.validate(), Err(Error::TikhonovBound { .. })));
    }

    #[test]
    fn random_initial_position_is_seeded() {
        let mut cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        cfg.initial.u0 = None;
        cfg.initial.random_radius = Some(5.0);
        let a = cfg.initial_conditions(4).unwrap();
        let b = cfg.initial_conditions(4).unwrap();
        assert_eq!(a, b);
        assert!(a.u0.as_slice().iter().all(|v| v.abs() <= 5.0));
        cfg.seed = 4;
        assert_ne!(cfg.initial_conditions(4).unwrap(), a);
    }

    #[test]
    fn problem_choice_is_exclusive() {
        let mut cfg = ExperimentConfig::from_toml(TEXT).unwrap();
        cfg.problem.file = Some("x.json".into());
        assert!(cfg.build_problem().is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn toml_echo_round_trips(
            alpha in 1.01f64..10.0,
            q in 0.01f64..0.9,
            frac in 0.01f64..0.99,
            beta in 0.0f64..4.0,
            c in 0.0f64..2.0,
            t_end in 2.0f64..1e6,
            seed in any::<u64>(),
        ) {
            let mut cfg = ExperimentConfig::from_toml(tests::TEXT).unwrap();
            cfg.params = FlowParams { alpha, q, s: frac * (1.0 - q), beta, gamma: 1.0, c, t0: 1.0 };
            cfg.schedule.t_end = t_end;
            cfg.seed = seed;
            prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }
}
