//! TOML experiment configuration.
//!
//! ```toml
//! seed = 1
//! output = "out/ct-desk"
//!
//! [problem]
//! kind = "ct"           # or "schlieren" with `directions`
//! n = 64
//! angles = 45           # a count, or a list of degrees
//! lines = 64
//!
//! [noise]
//! model = "gaussian"    # "uniform" (delta_rel) or "salt-pepper" (kappa)
//! delta_rel = 0.05
//! levels = "a-priori"   # or "realized"
//!
//! [penalty]
//! kind = "nonneg"       # "quadratic", or "tv" with `beta`
//!
//! [solver]
//! mu0 = 0.18
//! batch_size = 32
//! max_iters = 5000
//!
//! [[methods]]
//! step = "adaptive-dp"  # "adaptive-ndp", "decaying" (t0, alpha), "constant-gated" (t_bar)
//! ```
//!
//! Every `[[methods]]` entry may override `mu0`, `tau`, `batch_size` and
//! `max_iters`, and choose `method = "sgd" | "landweber" | "kaczmarz"` and
//! `stop = "max-iters" | "discrepancy"`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgd_theta::operators::{equally_spaced_angles, PoissonSolveConfig};
use sgd_theta::penalty::{Grid, PdhgConfig, PenaltySpec};
use sgd_theta::problems::{CtSetup, SchlierenSetup};
use sgd_theta::sampling::{NoiseLevelSource, NoiseModel, NoiseSpec};
use sgd_theta::solver::{Method, SolverConfig, StepRule, StopRule};

#[derive(Debug)]
pub enum ConfigError {
    /// TOML syntax or schema error; the message carries line and column.
    Parse(String),
    Field { field: String, message: String },
    Io(std::io::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Field { field, message } => write!(f, "config field `{field}`: {message}"),
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn field_err(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field { field: field.into(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub problem: ProblemConfig,
    pub noise: NoiseConfig,
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub solver: SolverSection,
    pub methods: Vec<MethodConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Ct { n: usize, angles: AngleSpec, lines: usize },
    Schlieren {
        n: usize,
        directions: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cg_tol: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Count(usize),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    SaltPepper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelSource {
    #[default]
    APriori,
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub model: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Defaults to the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub levels: LevelSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PenaltyConfig {
    Quadratic,
    Nonneg,
    Tv { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mu0: f64,
    pub mu1: f64,
    pub tau: f64,
    pub r: f64,
    pub eta: f64,
    pub batch_size: usize,
    pub max_iters: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telemetry_stride: Option<u64>,
    pub metrics_stride: u64,
    pub history_stride: u64,
    pub timing: bool,
    /// Constant initial dual iterate.
    pub xi0: f64,
    pub pdhg: PdhgSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mu0: d.mu0,
            mu1: d.mu1,
            tau: d.tau,
            r: d.r,
            eta: d.eta,
            batch_size: d.batch_size,
            max_iters: d.max_iters,
            telemetry_stride: None,
            metrics_stride: d.metrics_stride,
            history_stride: d.history_stride,
            timing: false,
            xi0: 0.0,
            pdhg: PdhgSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdhgSection {
    pub max_iters: usize,
    pub gap_tol: f64,
}

impl Default for PdhgSection {
    fn default() -> Self {
        let d = PdhgConfig::default();
        Self { max_iters: d.max_iters, gap_tol: d.gap_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    #[default]
    Sgd,
    Landweber,
    Kaczmarz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    AdaptiveDp,
    AdaptiveNdp,
    Decaying,
    ConstantGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopKind {
    #[default]
    MaxIters,
    Discrepancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// Used for artifact names; defaults to a name derived from the step rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub method: MethodKind,
    pub step: StepKind,
    #[serde(default)]
    pub stop: StopKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
}

impl MethodConfig {
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match (self.method, self.step) {
            (MethodKind::Landweber, _) => "landweber".into(),
            (MethodKind::Kaczmarz, _) => "kaczmarz".into(),
            (MethodKind::Sgd, StepKind::AdaptiveDp) => "sgd-theta".into(),
            (MethodKind::Sgd, StepKind::AdaptiveNdp) => "sgd-ndp".into(),
            (MethodKind::Sgd, StepKind::Decaying) => "sgd-decaying".into(),
            (MethodKind::Sgd, StepKind::ConstantGated) => "sgd-constant".into(),
        }
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodKind::Sgd => Method::SgdTheta,
            MethodKind::Landweber => Method::Landweber,
            MethodKind::Kaczmarz => Method::Kaczmarz,
        }
    }
}

/// The shipped desk-scale CT comparison.
pub const SHIPPED_CT: &str = include_str!("../configs/ct-desk.toml");
/// The shipped desk-scale schlieren comparison.
pub const SHIPPED_SCHLIEREN: &str = include_str!("../configs/schlieren-desk.toml");

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every parameter against the invariants of the library types
    /// it feeds, reporting the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.problem {
            ProblemConfig::Ct { n, angles, lines } => {
                if *n < 16 {
                    return Err(field_err("problem.n", format!("CT grid must be at least 16, got {n}")));
                }
                if *lines == 0 {
                    return Err(field_err("problem.lines", "need at least one detector line"));
                }
                match angles {
                    AngleSpec::Count(0) => return Err(field_err("problem.angles", "need at least one angle")),
                    AngleSpec::List(list) if list.is_empty() => {
                        return Err(field_err("problem.angles", "angle list is empty"))
                    }
                    AngleSpec::List(list) if list.iter().any(|a| !a.is_finite()) => {
                        return Err(field_err("problem.angles", "angles must be finite"))
                    }
                    _ => {}
                }
            }
            ProblemConfig::Schlieren { n, directions, cg_tol } => {
                if *n < 3 {
                    return Err(field_err("problem.n", format!("schlieren grid must be at least 3, got {n}")));
                }
                if *directions == 0 {
                    return Err(field_err("problem.directions", "need at least one direction"));
                }
                if let Some(tol) = cg_tol {
                    PoissonSolveConfig { cg_tol: *tol, ..Default::default() }
                        .validate()
                        .map_err(|e| field_err("problem.cg_tol", e))?;
                }
            }
        }
        match self.noise.model {
            NoiseKind::Gaussian | NoiseKind::Uniform if self.noise.delta_rel.is_none() => {
                return Err(field_err("noise.delta_rel", "required for gaussian and uniform noise"))
            }
            NoiseKind::SaltPepper if self.noise.kappa.is_none() => {
                return Err(field_err("noise.kappa", "required for salt-pepper noise"))
            }
            _ => {}
        }
        self.noise_spec().validate().map_err(|e| field_err("noise", e))?;
        if let PenaltyConfig::Tv { beta } = self.penalty {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(field_err("penalty.beta", format!("must be positive, got {beta}")));
            }
        }
        if !self.solver.xi0.is_finite() {
            return Err(field_err("solver.xi0", "must be finite"));
        }
        if self.methods.is_empty() {
            return Err(field_err("methods", "at least one [[methods]] entry is required"));
        }
        let mut labels = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            let at = |f: &str| format!("methods[{i}].{f}");
            match m.step {
                StepKind::Decaying if m.t0.is_none() => return Err(field_err(at("t0"), "required for decaying steps")),
                StepKind::Decaying => {}
                _ if m.t0.is_some() || m.alpha.is_some() => {
                    return Err(field_err(at("t0"), "t0 and alpha only apply to decaying steps"))
                }
                _ => {}
            }
            if m.t_bar.is_some() && m.step != StepKind::ConstantGated {
                return Err(field_err(at("t_bar"), "only applies to constant-gated steps"));
            }
            let label = m.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(field_err(at("name"), format!("`{label}` is not a usable file name")));
            }
            if labels.contains(&label) {
                return Err(field_err(at("name"), format!("duplicate method name `{label}`")));
            }
            labels.push(label);
            self.solver_config(i, self.seed).validate().map_err(|e| field_err(format!("methods[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let model = match self.noise.model {
            NoiseKind::Gaussian => NoiseModel::Gaussian { delta_rel: self.noise.delta_rel.unwrap_or(0.0) },
            NoiseKind::Uniform => NoiseModel::Uniform { delta_rel: self.noise.delta_rel.unwrap_or(0.0) },
            NoiseKind::SaltPepper => NoiseModel::SaltPepper { kappa: self.noise.kappa.unwrap_or(0.0) },
        };
        NoiseSpec { model, r: self.solver.r, seed: self.noise.seed.unwrap_or(self.seed) }
    }

    pub fn level_source(&self) -> NoiseLevelSource {
        match self.noise.levels {
            LevelSource::APriori => NoiseLevelSource::APriori,
            LevelSource::Realized => NoiseLevelSource::Realized,
        }
    }

    pub fn ct_setup(&self) -> Option<CtSetup> {
        match &self.problem {
            ProblemConfig::Ct { n, angles, lines } => {
                let angles = match angles {
                    AngleSpec::Count(k) => equally_spaced_angles(*k),
                    AngleSpec::List(list) => list.clone(),
                };
                Some(CtSetup { n: *n, angles, lines: *lines })
            }
            ProblemConfig::Schlieren { .. } => None,
        }
    }

    pub fn schlieren_setup(&self) -> Option<SchlierenSetup> {
        match &self.problem {
            ProblemConfig::Schlieren { n, directions, cg_tol } => {
                let mut poisson = PoissonSolveConfig::default();
                if let Some(tol) = cg_tol {
                    poisson.cg_tol = *tol;
                }
                Some(SchlierenSetup { n: *n, directions: *directions, poisson })
            }
            ProblemConfig::Ct { .. } => None,
        }
    }

    pub fn grid_side(&self) -> usize {
        match &self.problem {
            ProblemConfig::Ct { n, .. } | ProblemConfig::Schlieren { n, .. } => *n,
        }
    }

    pub fn penalty_spec(&self) -> sgd_theta::Result<PenaltySpec> {
        let n = self.grid_side();
        match self.penalty {
            PenaltyConfig::Quadratic => PenaltySpec::quadratic(n * n),
            PenaltyConfig::Nonneg => PenaltySpec::quadratic_nonneg(n * n),
            PenaltyConfig::Tv { beta } => PenaltySpec::quadratic_tv(beta, Grid::square(n)?),
        }
    }

    /// Solver settings of method `index`, with the sampler seeded at
    /// `base_seed + index`.
    pub fn solver_config(&self, index: usize, base_seed: u64) -> SolverConfig {
        let s = &self.solver;
        let m = &self.methods[index];
        let step_rule = match m.step {
            StepKind::AdaptiveDp => StepRule::AdaptiveDP,
            StepKind::AdaptiveNdp => StepRule::AdaptiveNDP,
            StepKind::Decaying => StepRule::Decaying { t0: m.t0.unwrap_or(f64::NAN), alpha: m.alpha.unwrap_or(0.51) },
            StepKind::ConstantGated => StepRule::ConstantGated { t_bar: m.t_bar },
        };
        SolverConfig {
            mu0: m.mu0.unwrap_or(s.mu0),
            mu1: s.mu1,
            tau: m.tau.unwrap_or(s.tau),
            p: 2.0,
            r: s.r,
            eta: s.eta,
            batch_size: m.batch_size.unwrap_or(s.batch_size),
            max_iters: m.max_iters.unwrap_or(s.max_iters),
            seed: base_seed.wrapping_add(index as u64),
            step_rule,
            stop_rule: match m.stop {
                StopKind::MaxIters => StopRule::APrioriMaxIters,
                StopKind::Discrepancy => StopRule::APosterioriDiscrepancy,
            },
            telemetry_stride: s.telemetry_stride,
            metrics_stride: s.metrics_stride,
            history_stride: s.history_stride,
            timing: s.timing,
            pdhg: PdhgConfig { max_iters: s.pdhg.max_iters, gap_tol: s.pdhg.gap_tol, ..PdhgConfig::default() },
        }
    }
}
