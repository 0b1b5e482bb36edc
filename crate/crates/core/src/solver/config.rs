//! Solver parameters and the admissibility constants of the step rules.

use crate::error::{Error, Result};
use crate::penalty::PdhgConfig;
use crate::spaces::check_exponent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `t = t̃ ‖res‖^{p−r}` while `‖res‖ > τ δ_batch`, else 0, with
    /// `t̃ = min{μ₀ ‖res‖^{p(r−1)} / ‖g‖^p, μ₁}`.
    AdaptiveDP,
    /// The same step without the discrepancy gate.
    AdaptiveNDP,
    /// `t = t₀ n^{−α}` with `n ≥ 1`.
    Decaying { t0: f64, alpha: f64 },
    /// `t = t̄` while the full residual exceeds the discrepancy level, else
    /// 0. `None` picks `t̄` from a presampling sweep at the initial iterate.
    ConstantGated { t_bar: Option<f64> },
}

impl StepRule {
    pub fn name(&self) -> &'static str {
        match self {
            StepRule::AdaptiveDP => "adaptive-dp",
            StepRule::AdaptiveNDP => "adaptive-ndp",
            StepRule::Decaying { .. } => "decaying",
            StepRule::ConstantGated { .. } => "constant-gated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    APrioriMaxIters,
    /// Stop at the first telemetry point where
    /// `Σ ‖F_i(x) − y_i^δ‖² ≤ Σ (τ δ_i)²`.
    APosterioriDiscrepancy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mu0: f64,
    pub mu1: f64,
    pub tau: f64,
    /// Convexity order of the penalty.
    pub p: f64,
    /// Data-space exponent.
    pub r: f64,
    /// Assumed tangential-cone constant.
    pub eta: f64,
    pub batch_size: usize,
    pub max_iters: u64,
    pub seed: u64,
    pub step_rule: StepRule,
    pub stop_rule: StopRule,
    /// Full-residual evaluations every this many iterations; `None` means
    /// once per epoch `⌈N / N_b⌉`.
    pub telemetry_stride: Option<u64>,
    /// Ground-truth metrics every this many iterations.
    pub metrics_stride: u64,
    /// Keep a history record every this many iterations (telemetry points
    /// and the final iterate are always kept).
    pub history_stride: u64,
    /// Record wall-clock time. Off by default so histories are
    /// reproducible byte for byte.
    pub timing: bool,
    pub pdhg: PdhgConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu0: 0.18,
            mu1: 1e4,
            tau: 1.1,
            p: 2.0,
            r: 2.0,
            eta: 0.0,
            batch_size: 1,
            max_iters: 1000,
            seed: 0,
            step_rule: StepRule::AdaptiveDP,
            stop_rule: StopRule::APrioriMaxIters,
            telemetry_stride: None,
            metrics_stride: 1,
            history_stride: 1,
            timing: false,
            pdhg: PdhgConfig::default(),
        }
    }
}

impl SolverConfig {
    /// Checks parameter ranges (not admissibility; see
    /// [`check_admissibility`]).
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("mu0", self.mu0)?;
        positive("mu1", self.mu1)?;
        check_exponent(self.r)?;
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidExponent(self.p));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1), got {}", self.eta)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.metrics_stride == 0 || self.history_stride == 0 || self.telemetry_stride == Some(0) {
            return Err(Error::invalid("strides must be at least 1"));
        }
        let gated = matches!(self.step_rule, StepRule::AdaptiveDP | StepRule::ConstantGated { .. })
            || self.stop_rule == StopRule::APosterioriDiscrepancy;
        if gated && !(self.tau > 1.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must exceed 1, got {}", self.tau)));
        }
        match self.step_rule {
            StepRule::Decaying { t0, alpha } => {
                positive("t0", t0)?;
                if !(alpha > 0.5 && alpha < 1.0) {
                    return Err(Error::invalid(format!("alpha must lie in (1/2, 1), got {alpha}")));
                }
            }
            StepRule::ConstantGated { t_bar } => {
                if self.r != 2.0 {
                    return Err(Error::invalid("the constant gated step requires r = 2"));
                }
                if let Some(t) = t_bar {
                    positive("t_bar", t)?;
                }
            }
            _ => {}
        }
        self.pdhg.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub rule: &'static str,
    /// `1 − η − (1+η)/τ − ((p−1)/p)(μ₀/2σ)^{1/(p−1)}`; only meaningful for
    /// the gated adaptive rule.
    pub c0: Option<f64>,
    /// `c₀` without the `τ` term, reported for every rule.
    pub c1: f64,
    /// `1 − η − μ₀/(4σ) − (1+η)/2 − (1+η)/(2τ²)`; constant gated rule only.
    pub c3: Option<f64>,
    /// Largest `μ₀` keeping `c₀ > 0` for the given `τ, η, p, σ`.
    pub mu0_bound: Option<f64>,
    pub passed: bool,
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
        write!(
            f,
            "rule={} c0={} c1={:.6e} c3={} mu0_bound={} {}",
            self.rule,
            opt(self.c0),
            self.c1,
            opt(self.c3),
            opt(self.mu0_bound),
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

fn mu0_term(cfg: &SolverConfig, sigma: f64) -> f64 {
    ((cfg.p - 1.0) / cfg.p) * (cfg.mu0 / (2.0 * sigma)).powf(1.0 / (cfg.p - 1.0))
}

/// Admissibility constants for `cfg` with penalty convexity modulus `sigma`.
pub fn check_admissibility(cfg: &SolverConfig, sigma: f64) -> Result<AdmissibilityReport> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let eta = cfg.eta;
    let c1 = 1.0 - eta - mu0_term(cfg, sigma);
    let mut report = AdmissibilityReport {
        rule: cfg.step_rule.name(),
        c0: None,
        c1,
        c3: None,
        mu0_bound: None,
        passed: true,
    };
    match cfg.step_rule {
        StepRule::AdaptiveDP => {
            let c0 = c1 - (1.0 + eta) / cfg.tau;
            let slack = 1.0 - eta - (1.0 + eta) / cfg.tau;
            report.c0 = Some(c0);
            report.mu0_bound = Some(if slack > 0.0 {
                2.0 * sigma * (cfg.p / (cfg.p - 1.0) * slack).powf(cfg.p - 1.0)
            } else {
                0.0
            });
            report.passed = c0 > 0.0;
        }
        StepRule::ConstantGated { .. } => {
            let c3 = 1.0 - eta - cfg.mu0 / (4.0 * sigma) - (1.0 + eta) / 2.0 - (1.0 + eta) / (2.0 * cfg.tau * cfg.tau);
            report.c3 = Some(c3);
            report.passed = c3 > 0.0;
        }
        StepRule::AdaptiveNDP | StepRule::Decaying { .. } => {}
    }
    Ok(report)
}
