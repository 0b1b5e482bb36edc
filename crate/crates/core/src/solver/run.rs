//! The iteration loop with stopping rules and telemetry.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::penalty::{bregman_distance, PenaltySpec};
use crate::sampling::rng::mix64;
use crate::sampling::IndexSampler;
use crate::solver::config::{SolverConfig, StepRule, StopRule};
use crate::solver::step::{kaczmarz_step, landweber_step, resolve_step_rule, sgd_theta_step, IterationState, StepReport};
use crate::solver::system::EquationSystem;
use crate::spaces::{norm2, DualVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Random batches from the seeded sampler.
    SgdTheta,
    /// All equations every iteration.
    Landweber,
    /// Cyclic equation blocks.
    Kaczmarz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    /// Iteration count after the step; record 0 describes the initial iterate.
    pub n: u64,
    pub indices: Vec<usize>,
    pub step: f64,
    pub batch_residual: f64,
    /// `Σ_i ‖F_i(x_n) − y_i^δ‖²`, at telemetry points.
    pub total_sq_residual: Option<f64>,
    /// Whether `‖F_i(x_n) − y_i^δ‖ ≤ τ δ_i` for every `i`, at telemetry points.
    pub all_within_discrepancy: Option<bool>,
    /// `‖x_n − x†‖₂ / ‖x†‖₂`.
    pub rel_error: Option<f64>,
    /// `D_{ξ_n}θ(x†, x_n)`.
    pub bregman: Option<f64>,
    pub iterate_hash: u64,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunHistory {
    pub seed: u64,
    pub records: Vec<HistoryRecord>,
}

pub const CSV_HEADER: &str = "iter,step,batch_residual,total_sq_residual,rel_error,bregman,seed_hash,wall_ms";

impl RunHistory {
    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    /// CSV export; fields not computed for a record are left empty. Floats
    /// use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let seed_hash = format!("{:016x}", mix64(self.seed));
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.step,
                r.batch_residual,
                opt(r.total_sq_residual),
                opt(r.rel_error),
                opt(r.bregman),
                seed_hash,
                opt(r.wall_ms)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    Discrepancy,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: RunHistory,
    pub state: IterationState,
    pub stop: StopReason,
    /// The configuration actually used (with any data-dependent constant
    /// filled in).
    pub config: SolverConfig,
}

impl RunOutcome {
    /// False when the discrepancy rule was requested but never met.
    pub fn converged(&self) -> bool {
        self.config.stop_rule != StopRule::APosterioriDiscrepancy || self.stop == StopReason::Discrepancy
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub history: RunHistory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} history records)", self.error, self.history.records.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Telemetry {
    total_sq: f64,
    all_within: bool,
}

fn full_residual(system: &EquationSystem, cfg: &SolverConfig, x: &[f64]) -> Result<Telemetry> {
    let norms = system.residual_norms(x)?;
    let total_sq = norms.iter().map(|v| v * v).sum();
    let all_within = norms.iter().zip(system.levels()).all(|(r, d)| *r <= cfg.tau * d);
    Ok(Telemetry { total_sq, all_within })
}

/// Runs `method` from `ξ₀` until the stop rule fires.
///
/// `truth` enables relative-error and Bregman-distance telemetry.
pub fn run(
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
    method: Method,
    xi0: DualVector,
    truth: Option<&[f64]>,
) -> std::result::Result<RunOutcome, RunFailure> {
    let mut history = RunHistory { seed: cfg.seed, records: Vec::new() };
    match run_inner(system, cfg, penalty, method, xi0, truth, &mut history) {
        Ok((state, stop, config)) => Ok(RunOutcome { history, state, stop, config }),
        Err(error) => Err(RunFailure { error, history }),
    }
}

fn run_inner(
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
    method: Method,
    xi0: DualVector,
    truth: Option<&[f64]>,
    history: &mut RunHistory,
) -> Result<(IterationState, StopReason, SolverConfig)> {
    cfg.validate()?;
    Error::check_dim(system.dim(), penalty.dim())?;
    Error::check_dim(system.dim(), xi0.len())?;
    if let Some(t) = truth {
        Error::check_dim(system.dim(), t.len())?;
    }
    if (cfg.p - penalty.p()).abs() > 0.0 {
        return Err(Error::invalid(format!("solver p = {} differs from the penalty's p = {}", cfg.p, penalty.p())));
    }
    if (cfg.r - system.r()).abs() > 0.0 {
        return Err(Error::invalid(format!("solver r = {} differs from the data space r = {}", cfg.r, system.r())));
    }
    let batch_size = match method {
        Method::Landweber => system.len(),
        _ => cfg.batch_size,
    };
    let sampler = IndexSampler::new(cfg.seed, system.len(), batch_size)?;
    let mut state = IterationState::new(penalty, xi0, sampler, cfg)?;
    let cfg = resolve_step_rule(system, cfg, state.x())?;
    let stride = cfg.telemetry_stride.unwrap_or_else(|| system.len().div_ceil(batch_size) as u64);
    let truth_norm = truth.map(norm2);
    let started = Instant::now();

    let mut record = |state: &mut IterationState, report: Option<StepReport>, force: bool| -> Result<bool> {
        let n = state.n();
        let telemetry_due = n % stride == 0 || n == cfg.max_iters || force;
        let keep = telemetry_due || n % cfg.history_stride == 0;
        let mut stop = false;
        let mut tele = None;
        if telemetry_due {
            let t = full_residual(system, &cfg, state.x())?;
            if matches!(cfg.step_rule, StepRule::ConstantGated { .. }) {
                state.set_gate(t.total_sq > system.discrepancy_threshold(cfg.tau));
            }
            stop = cfg.stop_rule == StopRule::APosterioriDiscrepancy
                && t.total_sq <= system.discrepancy_threshold(cfg.tau);
            tele = Some(t);
        }
        if keep {
            let metrics_due = telemetry_due || n % cfg.metrics_stride == 0;
            let (mut rel_error, mut bregman) = (None, None);
            if let (true, Some(t)) = (metrics_due, truth) {
                let diff: Vec<f64> = state.x().iter().zip(t).map(|(a, b)| a - b).collect();
                let tn = truth_norm.unwrap_or(0.0);
                rel_error = Some(if tn > 0.0 { norm2(&diff) / tn } else { norm2(&diff) });
                bregman = match bregman_distance(penalty, t, state.pair()) {
                    Ok(d) => Some(d),
                    Err(Error::InfeasibleTarget) => None,
                    Err(e) => return Err(e),
                };
            }
            let (indices, step, batch_residual) = match report {
                Some(r) => (r.indices, r.step, r.batch_residual),
                None => (Vec::new(), 0.0, 0.0),
            };
            history.records.push(HistoryRecord {
                n,
                indices,
                step,
                batch_residual,
                total_sq_residual: tele.as_ref().map(|t| t.total_sq),
                all_within_discrepancy: tele.as_ref().map(|t| t.all_within),
                rel_error,
                bregman,
                iterate_hash: state.iterate_hash(),
                wall_ms: cfg.timing.then(|| started.elapsed().as_secs_f64() * 1e3),
            });
        }
        Ok(stop)
    };

    if record(&mut state, None, true)? {
        return Ok((state, StopReason::Discrepancy, cfg));
    }
    while state.n() < cfg.max_iters {
        let report = match method {
            Method::SgdTheta => sgd_theta_step(&mut state, system, &cfg, penalty)?,
            Method::Landweber => landweber_step(&mut state, system, &cfg, penalty)?,
            Method::Kaczmarz => kaczmarz_step(&mut state, system, &cfg, penalty)?,
        };
        if record(&mut state, Some(report), false)? {
            return Ok((state, StopReason::Discrepancy, cfg));
        }
    }
    Ok((state, StopReason::MaxIters, cfg))
}
