//! Subcommand implementations. Each takes parsed arguments and returns data;
//! the file-writing wrappers are thin shells around them.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sgd_theta::operators::build_parallel_tomo;
use sgd_theta::penalty::{tv_denoise_pdhg, Grid, PdhgConfig, PenaltySpec};
use sgd_theta::problems::{ct_problem, schlieren_problem, CtSetup, Problem};
use sgd_theta::sampling::{read_array, shepp_logan, write_array, write_pgm, ArrayHeader, NoiseLevelSource, NoiseModel, NoiseSpec};
use sgd_theta::solver::{check_admissibility, run, AdmissibilityReport, RunHistory, StopReason};
use sgd_theta::spaces::{DualVector, Vector};
use sgd_theta::verify::{self, Check};

use crate::config::{ConfigError, ExperimentConfig, SHIPPED_CT};

/// Overrides the output directory named in the config.
pub const OUT_ENV: &str = "SGD_THETA_OUT";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(sgd_theta::Error),
    /// At least one method fails its step-size admissibility test.
    Inadmissible(Vec<String>),
    /// A solver run failed; artifacts written so far are kept.
    Solver { method: String, source: sgd_theta::Error },
    Io(std::io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Core(e) => e.fmt(f),
            CliError::Inadmissible(lines) => {
                writeln!(f, "step-size parameters are not admissible (rerun with --force to override):")?;
                for line in lines {
                    writeln!(f, "  {line}")?;
                }
                Ok(())
            }
            CliError::Solver { method, source } => write!(f, "method `{method}` failed: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<sgd_theta::Error> for CliError {
    fn from(e: sgd_theta::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stride: Option<u64>,
}

/// `--out`, then `$SGD_THETA_OUT`, then the config's `output`, then `out`.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    pub seed: u64,
    pub iterations: u64,
    pub stop: StopReason,
    pub final_rel_error: Option<f64>,
    pub final_total_sq_residual: Option<f64>,
    pub history: RunHistory,
    /// Final primal iterate.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub methods: Vec<MethodSummary>,
    pub admissibility: Vec<AdmissibilityReport>,
}

/// Applies `--seed` and `--stride`, then validates.
pub fn effective_config(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(stride) = opts.stride {
        cfg.solver.telemetry_stride = Some(stride);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn build_problem(cfg: &ExperimentConfig) -> sgd_theta::Result<Problem> {
    let noise = cfg.noise_spec();
    match (cfg.ct_setup(), cfg.schlieren_setup()) {
        (Some(ct), _) => ct_problem(&ct, &noise, cfg.level_source()),
        (None, Some(sch)) => schlieren_problem(&sch, &noise, cfg.level_source()),
        (None, None) => unreachable!("a problem is either CT or schlieren"),
    }
}

/// Admissibility of every method, in config order.
pub fn admissibility(cfg: &ExperimentConfig, penalty: &PenaltySpec) -> sgd_theta::Result<Vec<AdmissibilityReport>> {
    (0..cfg.methods.len()).map(|i| check_admissibility(&cfg.solver_config(i, cfg.seed), penalty.sigma())).collect()
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::MaxIters => "max-iters",
        StopReason::Discrepancy => "discrepancy",
    }
}

fn report_json(label: &str, rep: &AdmissibilityReport) -> Value {
    json!({
        "method": label,
        "rule": rep.rule,
        "c0": rep.c0,
        "c1": rep.c1,
        "c3": rep.c3,
        "mu0_bound": rep.mu0_bound,
        "passed": rep.passed,
    })
}

fn write_image(dir: &Path, stem: &str, x: &[f64], n: usize, extra: &[(&str, String)]) -> sgd_theta::Result<()> {
    let mut header = ArrayHeader::new(vec![n, n]);
    for (k, v) in extra {
        header = header.with(*k, v);
    }
    write_array(&dir.join(format!("{stem}.bin")), x, &header)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), x, n, n)
}

/// Runs every configured method and writes
///
/// * `{label}.csv`: the run history,
/// * `{label}.bin` (+ `.hdr`) and `{label}.pgm`: the final reconstruction,
/// * `truth.bin` and `truth.pgm`,
/// * `manifest.json`: config echo, noise levels, admissibility, versions and
///   per-method results.
///
/// Methods run in order; method `i` samples with seed `seed + i`. When a
/// method fails, its partial history and the manifest so far are written
/// before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentSummary, CliError> {
    let cfg = effective_config(cfg, opts)?;
    let penalty = cfg.penalty_spec()?;
    let reports = admissibility(&cfg, &penalty)?;
    let failing: Vec<String> = cfg
        .methods
        .iter()
        .zip(&reports)
        .filter(|(_, r)| !r.passed)
        .map(|(m, r)| format!("{}: {r}", m.label()))
        .collect();
    if !failing.is_empty() && !opts.force {
        return Err(CliError::Inadmissible(failing));
    }

    let problem = build_problem(&cfg)?;
    let dir = output_dir(&cfg, opts);
    std::fs::create_dir_all(&dir)?;
    let n = cfg.grid_side();
    write_image(&dir, "truth", &problem.truth, n, &[])?;

    let mut manifest = json!({
        "versions": { "sgd-theta": sgd_theta::VERSION, "sgd-theta-cli": env!("CARGO_PKG_VERSION") },
        "config": serde_json::to_value(&cfg).expect("config converts to json"),
        "forced": opts.force && !failing.is_empty(),
        "equations": problem.system.len(),
        "unknowns": problem.system.dim(),
        "delta": {
            "source": match cfg.level_source() { NoiseLevelSource::APriori => "a-priori", NoiseLevelSource::Realized => "realized" },
            "a_priori": problem.dataset.delta_apriori(),
            "realized": problem.dataset.delta_realized(),
        },
        "admissibility": cfg.methods.iter().zip(&reports).map(|(m, r)| report_json(&m.label(), r)).collect::<Vec<_>>(),
        "methods": [],
    });
    let write_manifest = |manifest: &Value| -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    };

    let xi0 = DualVector::constant(problem.system.dim(), cfg.solver.xi0)?;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for (i, method) in cfg.methods.iter().enumerate() {
        let label = method.label();
        let solver = cfg.solver_config(i, cfg.seed);
        let csv = dir.join(format!("{label}.csv"));
        let outcome = run(&problem.system, &solver, &penalty, method.method(), xi0.clone(), Some(problem.truth.as_slice()));
        let outcome = match outcome {
            Ok(o) => o,
            Err(failure) => {
                failure.history.write_csv(&csv)?;
                manifest["methods"].as_array_mut().unwrap().push(json!({
                    "name": label,
                    "seed": solver.seed,
                    "csv": format!("{label}.csv"),
                    "error": failure.error.to_string(),
                }));
                write_manifest(&manifest)?;
                return Err(CliError::Solver { method: label, source: failure.error });
            }
        };
        outcome.history.write_csv(&csv)?;
        write_image(&dir, &label, outcome.state.x(), n, &[("method", label.clone()), ("seed", solver.seed.to_string())])?;
        let last = outcome.history.last();
        let final_rel_error = last.and_then(|r| r.rel_error);
        let final_total_sq = last.and_then(|r| r.total_sq_residual);
        let t_bar = match outcome.config.step_rule {
            sgd_theta::solver::StepRule::ConstantGated { t_bar } => t_bar,
            _ => None,
        };
        manifest["methods"].as_array_mut().unwrap().push(json!({
            "name": label,
            "method": format!("{:?}", method.method).to_lowercase(),
            "step": outcome.config.step_rule.name(),
            "t_bar": t_bar,
            "seed": solver.seed,
            "iterations": outcome.state.n(),
            "stop": stop_name(outcome.stop),
            "converged": outcome.converged(),
            "final_rel_error": final_rel_error,
            "final_total_sq_residual": final_total_sq,
            "discrepancy_threshold": problem.system.discrepancy_threshold(solver.tau),
            "csv": format!("{label}.csv"),
            "image": format!("{label}.bin"),
        }));
        methods.push(MethodSummary {
            label,
            seed: solver.seed,
            iterations: outcome.state.n(),
            stop: outcome.stop,
            final_rel_error,
            final_total_sq_residual: final_total_sq,
            x: outcome.state.x().to_vec(),
            history: outcome.history,
        });
    }
    write_manifest(&manifest)?;
    Ok(ExperimentSummary { out_dir: dir, methods, admissibility: reports })
}

pub fn cmd_run(config: &Path, opts: &RunOptions) -> Result<ExperimentSummary, CliError> {
    let cfg = ExperimentConfig::from_path(config)?;
    run_experiment(&cfg, opts)
}

/// Rejecting a deliberately transposed matrix: the check passes when the
/// inner adjoint test fails.
pub fn negative_control(seed: u64) -> sgd_theta::Result<Check> {
    // 8 angles × 8 lines on an 8 × 8 grid is square, so `A` itself has the
    // shape of its adjoint.
    let a = build_parallel_tomo(8, &sgd_theta::operators::equally_spaced_angles(8), 8)?;
    let inner = verify::matrix_adjoint(&a, &a, 5, seed, 1e-12)?;
    Ok(Check {
        name: "negative control: non-adjoint matrix is rejected".into(),
        measured: inner.measured,
        tolerance: inner.tolerance,
        passed: !inner.passed,
        detail: "expects the adjoint check to fail".into(),
    })
}

/// `c₀` of the first method of the shipped CT config.
pub fn shipped_ct_c0() -> Result<Check, CliError> {
    let cfg = ExperimentConfig::from_toml_str(SHIPPED_CT)?;
    let penalty = cfg.penalty_spec()?;
    let rep = check_admissibility(&cfg.solver_config(0, cfg.seed), penalty.sigma())?;
    let c0 = rep.c0.unwrap_or(f64::NAN);
    let want = 1.0 - 1.0 / 1.1 - 0.09;
    Ok(Check {
        name: "admissibility c0 of the shipped CT config".into(),
        measured: c0,
        tolerance: 1e-12,
        passed: rep.passed && (c0 - want).abs() <= 1e-12,
        detail: format!("expected {want:.6e}; {rep}"),
    })
}

/// The verification batteries. Every check is deterministic given `seed`.
pub fn cmd_check(seed: u64) -> Result<Vec<Check>, CliError> {
    let ct = CtSetup::equally_spaced(32, 30, 32).matrix()?;
    let tight = PdhgConfig { max_iters: 20_000, gap_tol: 1e-8, ..PdhgConfig::default() };
    let noise = NoiseSpec { model: NoiseModel::Gaussian { delta_rel: 0.05 }, r: 2.0, seed };
    let problem = ct_problem(&CtSetup::equally_spaced(32, 30, 32), &noise, NoiseLevelSource::Realized)?;
    let penalty = PenaltySpec::quadratic_nonneg(problem.system.dim())?;
    let mono_cfg = sgd_theta::solver::SolverConfig { max_iters: 2000, ..Default::default() };
    Ok(vec![
        verify::duality_identities(100, 50, &[1.1, 1.5, 2.0, 3.0], seed, 1e-10)?,
        verify::matrix_adjoint(&ct, &ct.transpose(), 20, seed, 1e-12)?,
        negative_control(seed)?,
        verify::schlieren_adjoint(32, 20, seed, 1e-8)?,
        verify::schlieren_derivative(32, 10, 1e-5, seed, 1e-5)?,
        verify::tv_prox_1d(50, 5, &tight, seed, 1e-3)?,
        verify::bregman_monotonicity(&problem.system, &problem.truth, &penalty, &mono_cfg, 5, 1e-12)?,
        shipped_ct_c0()?,
    ])
}

pub fn cmd_phantom(n: usize) -> sgd_theta::Result<Vector> {
    shepp_logan(n)
}

/// Sinogram of an `n × n` image, one row per angle.
pub fn cmd_project(image: &[f64], n: usize, angles: &[f64], lines: usize) -> sgd_theta::Result<Vector> {
    build_parallel_tomo(n, angles, lines)?.apply(image)
}

pub fn cmd_denoise_tv(image: &Vector, grid: Grid, beta: f64, pdhg: &PdhgConfig) -> sgd_theta::Result<Vector> {
    tv_denoise_pdhg(image, grid, beta, pdhg)
}

fn square_side(path: &Path, dims: &[usize]) -> Result<usize, CliError> {
    match dims {
        [r, c] if r == c => Ok(*r),
        _ => Err(CliError::Usage(format!("{} is not a square image (dims {dims:?})", path.display()))),
    }
}

/// Writes `path` (+ `.hdr`) and a `.pgm` preview next to it.
pub fn write_phantom(path: &Path, n: usize) -> Result<(), CliError> {
    let x = cmd_phantom(n)?;
    write_array(path, &x, &ArrayHeader::new(vec![n, n]).with("phantom", "modified-shepp-logan"))?;
    write_pgm(&path.with_extension("pgm"), &x, n, n)?;
    Ok(())
}

pub fn project_file(input: &Path, output: &Path, angles: &[f64], lines: usize) -> Result<(), CliError> {
    let (image, header) = read_array(input)?;
    let n = square_side(input, &header.dims)?;
    let sino = cmd_project(&image, n, angles, lines)?;
    write_array(output, &sino, &ArrayHeader::new(vec![angles.len(), lines]))?;
    write_pgm(&output.with_extension("pgm"), &sino, angles.len(), lines)?;
    Ok(())
}

pub fn denoise_file(input: &Path, output: &Path, beta: f64, pdhg: &PdhgConfig) -> Result<(), CliError> {
    let (image, header) = read_array(input)?;
    let grid = match header.dims.as_slice() {
        [r, c] => Grid::new(*r, *c)?,
        [len] => Grid::new(1, *len)?,
        dims => return Err(CliError::Usage(format!("{}: expected a 1-D or 2-D array, got dims {dims:?}", input.display()))),
    };
    let out = cmd_denoise_tv(&Vector::new(image)?, grid, beta, pdhg)?;
    write_array(output, &out, &ArrayHeader::new(header.dims.clone()).with("beta", beta))?;
    if let [r, c] = header.dims.as_slice() {
        write_pgm(&output.with_extension("pgm"), &out, *r, *c)?;
    }
    Ok(())
}
