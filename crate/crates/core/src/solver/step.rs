//! Single iterations: SGD-θ on a random batch, Landweber on all equations,
//! and cyclic Kaczmarz.

use crate::error::{Error, Result};
use crate::penalty::{mirror_step_warm, BregmanPair, PdhgWarmStart, PenaltySpec};
use crate::sampling::rng::mix64;
use crate::sampling::IndexSampler;
use crate::solver::config::{SolverConfig, StepRule};
use crate::solver::system::EquationSystem;
use crate::spaces::{duality_map_into, lr_norm_unchecked, DualVector};

/// Iterate pair, counter, sampler and PDHG warm start of a run.
#[derive(Debug, Clone)]
pub struct IterationState {
    pair: BregmanPair,
    n: u64,
    sampler: IndexSampler,
    warm: PdhgWarmStart,
    gate_open: bool,
}

impl IterationState {
    /// Starts from `ξ₀` with `x₀` its mirror image.
    pub fn new(penalty: &PenaltySpec, xi0: DualVector, sampler: IndexSampler, cfg: &SolverConfig) -> Result<Self> {
        let mut warm = PdhgWarmStart::new();
        let (pair, _) = mirror_step_warm(penalty, &xi0, &cfg.pdhg, &mut warm)?;
        Ok(Self { pair, n: 0, sampler, warm, gate_open: true })
    }

    pub fn pair(&self) -> &BregmanPair {
        &self.pair
    }

    pub fn x(&self) -> &[f64] {
        self.pair.x()
    }

    pub fn xi(&self) -> &[f64] {
        self.pair.xi()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sampler(&self) -> &IndexSampler {
        &self.sampler
    }

    /// Cached outcome of the full discrepancy test used by the constant
    /// gated step.
    pub fn gate_open(&self) -> bool {
        self.gate_open
    }

    pub fn set_gate(&mut self, open: bool) {
        self.gate_open = open;
    }

    /// Order-sensitive hash of the bits of `x`.
    pub fn iterate_hash(&self) -> u64 {
        self.x().iter().fold(0x243F_6A88_85A3_08D3, |h, v| mix64(h ^ v.to_bits()))
    }
}

/// Stacked residual and gradient of a batch at one iterate.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// `(Σ_{i∈batch} ‖F_i(x) − y_i^δ‖^r)^{1/r}`.
    pub residual_norm: f64,
    /// `Σ_{i∈batch} F_i'(x)* J_r(F_i(x) − y_i^δ)`, summed in ascending index
    /// order.
    pub gradient: Vec<f64>,
    /// `‖gradient‖_{p*}`.
    pub gradient_norm: f64,
}

/// Evaluates the stacked quantities for `batch`, which must be sorted.
pub fn batch_gradient(system: &EquationSystem, x: &[f64], batch: &[usize], p: f64) -> Result<BatchGradient> {
    Error::check_dim(system.dim(), x.len())?;
    if batch.is_empty() || batch.iter().any(|i| *i >= system.len()) {
        return Err(Error::InvalidBatch { batch: batch.len(), equations: system.len() });
    }
    let r = system.r();
    let riesz = system.operator(batch[0]).riesz_map();
    let shared = riesz.is_some() && batch.iter().all(|i| system.operator(*i).riesz_map() == riesz);
    let mut gradient = vec![0.0; system.dim()];
    let mut norm_pow = 0.0;
    let mut j = Vec::new();
    for &i in batch {
        let res = system.residual(i, x)?;
        norm_pow += system.space(i).norm_pow(&res);
        j.resize(res.len(), 0.0);
        duality_map_into(&res, r, &mut j);
        let op = system.operator(i);
        if shared {
            op.derivative_adjoint_source_accumulate(x, &j, 1.0, &mut gradient)?;
        } else {
            op.derivative_adjoint_accumulate(x, &j, 1.0, &mut gradient)?;
        }
    }
    let gradient_norm = match (shared, riesz) {
        (true, Some(map)) => {
            gradient = map.solve(&gradient)?.into_inner();
            map.norm(&gradient)?
        }
        _ => lr_norm_unchecked(&gradient, None, p / (p - 1.0)),
    };
    Ok(BatchGradient { residual_norm: norm_pow.powf(1.0 / r), gradient, gradient_norm })
}

/// The adaptive step `t̃ ‖res‖^{p−r}` with
/// `t̃ = min{μ₀ ‖res‖^{p(r−1)} / ‖g‖^p, μ₁}` (`t̃ = μ₁` when `g = 0`).
pub fn adaptive_step(cfg: &SolverConfig, residual_norm: f64, gradient_norm: f64) -> f64 {
    if residual_norm == 0.0 {
        return 0.0;
    }
    let (p, r) = (cfg.p, cfg.r);
    let t_tilde = if gradient_norm == 0.0 {
        cfg.mu1
    } else {
        (cfg.mu0 * residual_norm.powf(p * (r - 1.0)) / gradient_norm.powf(p)).min(cfg.mu1)
    };
    t_tilde * residual_norm.powf(p - r)
}

/// Step size `t_n` for iteration `n` (counted from 0).
///
/// `gate_open` is the cached full-residual test consulted by the constant
/// gated rule.
pub fn step_size(
    cfg: &SolverConfig,
    n: u64,
    residual_norm: f64,
    gradient_norm: f64,
    delta_batch: f64,
    gate_open: bool,
) -> Result<f64> {
    Ok(match cfg.step_rule {
        StepRule::AdaptiveDP => {
            if residual_norm > cfg.tau * delta_batch {
                adaptive_step(cfg, residual_norm, gradient_norm)
            } else {
                0.0
            }
        }
        StepRule::AdaptiveNDP => adaptive_step(cfg, residual_norm, gradient_norm),
        StepRule::Decaying { t0, alpha } => t0 * ((n + 1) as f64).powf(-alpha),
        StepRule::ConstantGated { t_bar } => {
            let t = t_bar.ok_or_else(|| {
                Error::invalid("constant step t_bar is unresolved; call resolve_step_rule first")
            })?;
            if gate_open {
                t
            } else {
                0.0
            }
        }
    })
}

/// Outcome of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Equations used, ascending.
    pub indices: Vec<usize>,
    pub step: f64,
    pub batch_residual: f64,
}

fn step_on_batch(
    state: &mut IterationState,
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
    mut batch: Vec<usize>,
) -> Result<StepReport> {
    batch.sort_unstable();
    let n = state.n;
    let eval = batch_gradient(system, state.x(), &batch, cfg.p)?;
    let delta = system.batch_level(&batch);
    let t = step_size(cfg, n, eval.residual_norm, eval.gradient_norm, delta, state.gate_open)?;
    if !t.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite step size at iteration {n}")));
    }
    if t != 0.0 {
        let xi: Vec<f64> = state.xi().iter().zip(&eval.gradient).map(|(a, g)| a - t * g).collect();
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite dual iterate at iteration {n}")));
        }
        let (pair, _) = mirror_step_warm(penalty, &DualVector::from_raw(xi), &cfg.pdhg, &mut state.warm)
            .map_err(|e| Error::NumericalFailure(format!("mirror step failed at iteration {n}: {e}")))?;
        state.pair = pair;
    }
    state.n += 1;
    Ok(StepReport { indices: batch, step: t, batch_residual: eval.residual_norm })
}

/// One SGD-θ iteration on the sampler's next batch.
pub fn sgd_theta_step(
    state: &mut IterationState,
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
) -> Result<StepReport> {
    if state.sampler.equations() != system.len() {
        return Err(Error::InvalidBatch { batch: state.sampler.batch_size(), equations: system.len() });
    }
    let batch = state.sampler.next_batch();
    step_on_batch(state, system, cfg, penalty, batch)
}

/// One iteration on all equations stacked.
pub fn landweber_step(
    state: &mut IterationState,
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
) -> Result<StepReport> {
    step_on_batch(state, system, cfg, penalty, (0..system.len()).collect())
}

/// One iteration on the cyclic block `{(n·N_b + k) mod N : k < N_b}`; with
/// `N_b = 1` the index is `n mod N`.
pub fn kaczmarz_step(
    state: &mut IterationState,
    system: &EquationSystem,
    cfg: &SolverConfig,
    penalty: &PenaltySpec,
) -> Result<StepReport> {
    let big_n = system.len() as u64;
    let nb = cfg.batch_size.min(system.len()) as u64;
    let start = (state.n % big_n) * nb;
    let mut batch: Vec<usize> = (0..nb).map(|k| ((start + k) % big_n) as usize).collect();
    batch.dedup();
    step_on_batch(state, system, cfg, penalty, batch)
}

const PRESAMPLE_DOMAIN: u64 = 0x7072_6573_616D_706C;

/// Fills in a data-dependent constant step: for `ConstantGated { t_bar:
/// None }`, `t̄` becomes the minimum of `min{μ₀ ‖res‖² / ‖g‖², μ₁}` over one
/// epoch of batches drawn at `x0` from a stream separate from the run's.
pub fn resolve_step_rule(system: &EquationSystem, cfg: &SolverConfig, x0: &[f64]) -> Result<SolverConfig> {
    let StepRule::ConstantGated { t_bar: None } = cfg.step_rule else {
        return Ok(*cfg);
    };
    let sampler = IndexSampler::new(cfg.seed ^ PRESAMPLE_DOMAIN, system.len(), cfg.batch_size)?;
    let epoch = system.len().div_ceil(cfg.batch_size) as u64;
    let mut t_bar = cfg.mu1;
    for k in 0..epoch {
        let mut batch = sampler.sample_batch(k);
        batch.sort_unstable();
        let eval = batch_gradient(system, x0, &batch, cfg.p)?;
        let bound = if eval.gradient_norm == 0.0 {
            cfg.mu1
        } else {
            (cfg.mu0 * eval.residual_norm.powi(2) / eval.gradient_norm.powi(2)).min(cfg.mu1)
        };
        t_bar = t_bar.min(bound);
    }
    Ok(SolverConfig { step_rule: StepRule::ConstantGated { t_bar: Some(t_bar) }, ..*cfg })
}
