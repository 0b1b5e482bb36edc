//! Numerical self-checks: duality-map identities, adjoint and derivative
//! tests for the forward operators, a brute-force oracle for 1D TV
//! denoising, and per-path Bregman monotonicity.
//!
//! Each check returns a [`Check`] with the worst measured error so callers
//! can print a report or assert on it.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{CsrMatrix, ForwardOperator, PoissonSolveConfig, SchlierenGeometry, SchlierenOperator};
use crate::penalty::{tv_denoise_pdhg, Grid, PdhgConfig, PenaltySpec};
use crate::sampling::CounterRng;
use crate::solver::{run, EquationSystem, Method, SolverConfig};
use crate::spaces::{dot, duality_map, lr_norm, norm2, DualVector, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst error observed.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured <= tolerance, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: measured {:.3e}, tolerance {:.1e}",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn random_vec(rng: &mut CounterRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `⟨J_r(y), y⟩ = ‖y‖_r^r` and `‖J_r(y)‖_{r*} = ‖y‖_r^{r−1}` on random
/// vectors, for every exponent in `exponents`.
pub fn duality_identities(samples: usize, dim: usize, exponents: &[f64], seed: u64, tol: f64) -> Result<Check> {
    let mut worst = 0.0f64;
    for (k, &r) in exponents.iter().enumerate() {
        let r_star = r / (r - 1.0);
        let mut rng = CounterRng::new(seed, k as u64);
        for _ in 0..samples {
            let y = random_vec(&mut rng, dim);
            let j = duality_map(&y, r)?;
            let norm = lr_norm(&y, r)?;
            worst = worst.max(rel_gap(dot(&j, &y), norm.powf(r)));
            worst = worst.max(rel_gap(lr_norm(&j, r_star)?, norm.powf(r - 1.0)));
        }
    }
    Ok(Check::new(
        "duality-map identities",
        worst,
        tol,
        format!("{samples} vectors of dim {dim}, r in {exponents:?}"),
    ))
}

/// `⟨Fx, y⟩ = ⟨x, Gy⟩` for random `x, y`, where `adjoint` is the claimed
/// transpose `G` of `forward`.
pub fn matrix_adjoint(forward: &CsrMatrix, adjoint: &CsrMatrix, pairs: usize, seed: u64, tol: f64) -> Result<Check> {
    if adjoint.rows() != forward.cols() || adjoint.cols() != forward.rows() {
        return Err(Error::invalid(format!(
            "claimed adjoint is {}x{}, expected {}x{}",
            adjoint.rows(),
            adjoint.cols(),
            forward.cols(),
            forward.rows()
        )));
    }
    let mut rng = CounterRng::new(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = random_vec(&mut rng, forward.cols());
        let y = random_vec(&mut rng, forward.rows());
        let lhs = dot(&forward.apply(&x)?, &y);
        let rhs = dot(&x, &adjoint.apply(&y)?);
        worst = worst.max(rel_gap(lhs, rhs));
    }
    Ok(Check::new(
        "sparse adjoint",
        worst,
        tol,
        format!("{pairs} pairs, {}x{} matrix", forward.rows(), forward.cols()),
    ))
}

fn random_schlieren(geo: &Arc<SchlierenGeometry>, rng: &mut CounterRng) -> Result<SchlierenOperator> {
    let phi = rng.uniform_in(0.0, 2.0 * std::f64::consts::PI);
    SchlierenOperator::new(Arc::clone(geo), phi, PoissonSolveConfig::default())
}

/// `⟨F'(f)h, g⟩_ω = ⟨h, F'(f)* g⟩_{H¹}` for random directions and random
/// `f, h, g` on an `n × n` grid.
pub fn schlieren_adjoint(n: usize, pairs: usize, seed: u64, tol: f64) -> Result<Check> {
    let geo = Arc::new(SchlierenGeometry::new(n)?);
    let mut rng = CounterRng::new(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let op = random_schlieren(&geo, &mut rng)?;
        let f = random_vec(&mut rng, op.in_dim());
        let h = random_vec(&mut rng, op.in_dim());
        let g = random_vec(&mut rng, op.out_dim());
        let fh = op.derivative_apply(&f, &h)?;
        let lhs: f64 = fh.iter().zip(&g).zip(geo.weights().iter()).map(|((a, b), w)| a * b * w).sum();
        let rhs = geo.h1_inner(&h, &op.derivative_adjoint(&f, &g)?)?;
        worst = worst.max(rel_gap(lhs, rhs));
    }
    Ok(Check::new("schlieren H1 adjoint", worst, tol, format!("{pairs} pairs, {n}x{n} grid")))
}

/// Central differences `(F(f+εh) − F(f−εh)) / 2ε` against `F'(f)h`, as a
/// relative error in the Euclidean norm.
pub fn schlieren_derivative(n: usize, pairs: usize, eps: f64, seed: u64, tol: f64) -> Result<Check> {
    let geo = Arc::new(SchlierenGeometry::new(n)?);
    let mut rng = CounterRng::new(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let op = random_schlieren(&geo, &mut rng)?;
        let f = random_vec(&mut rng, op.in_dim());
        let h = random_vec(&mut rng, op.in_dim());
        let plus: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a - eps * b).collect();
        let (fp, fm) = (op.apply(&plus)?, op.apply(&minus)?);
        let exact = op.derivative_apply(&f, &h)?;
        let diff: Vec<f64> = fp.iter().zip(fm.iter()).zip(exact.iter()).map(|((p, m), e)| (p - m) / (2.0 * eps) - e).collect();
        worst = worst.max(norm2(&diff) / norm2(&exact).max(f64::MIN_POSITIVE));
    }
    Ok(Check::new("schlieren finite differences", worst, tol, format!("{pairs} pairs, eps {eps:e}")))
}

/// Exact minimizer of `1/(2β)‖z − g‖² + Σ_j |z_{j+1} − z_j|` for short
/// signals.
///
/// The minimizer is piecewise constant. For a fixed partition into runs and
/// fixed jump signs `s_j` between consecutive runs, stationarity gives each
/// run the value `mean_j − β(s_{j−1} − s_j)/|S_j|`. Every candidate is a
/// feasible point, so the best objective among all partitions and sign
/// patterns is the global minimum. Cost grows like `3^L`.
pub fn tv_prox_1d_oracle(g: &[f64], beta: f64) -> Result<Vec<f64>> {
    let len = g.len();
    if len == 0 || len > 12 {
        return Err(Error::invalid(format!("brute-force TV oracle needs 1..=12 samples, got {len}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("TV weight beta must be positive"));
    }
    let objective = |z: &[f64]| {
        let fit: f64 = z.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let tv: f64 = z.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        fit / (2.0 * beta) + tv
    };
    let mut best = (f64::INFINITY, Vec::new());
    let mut z = vec![0.0; len];
    // Bit k of `cuts` set: a run ends after sample k.
    for cuts in 0u32..(1 << (len - 1)) {
        let mut bounds = vec![0];
        for k in 0..len - 1 {
            if cuts & (1 << k) != 0 {
                bounds.push(k + 1);
            }
        }
        bounds.push(len);
        let runs = bounds.len() - 1;
        for signs in 0u32..(1 << (runs - 1)) {
            let sign = |j: usize| -> f64 {
                // Jump between run j−1 and run j, for 1 ≤ j < runs.
                if j == 0 || j == runs {
                    0.0
                } else if signs & (1 << (j - 1)) != 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            for j in 0..runs {
                let (a, b) = (bounds[j], bounds[j + 1]);
                let size = (b - a) as f64;
                let mean = g[a..b].iter().sum::<f64>() / size;
                let value = mean - beta * (sign(j) - sign(j + 1)) / size;
                z[a..b].iter_mut().for_each(|v| *v = value);
            }
            let obj = objective(&z);
            if obj < best.0 {
                best = (obj, z.clone());
            }
        }
    }
    Ok(best.1)
}

/// PDHG on a `1 × L` grid against [`tv_prox_1d_oracle`] for random signals
/// of length `1..=max_len` and random `β ∈ [0.05, 1]`.
pub fn tv_prox_1d(signals: usize, max_len: usize, cfg: &PdhgConfig, seed: u64, tol: f64) -> Result<Check> {
    let mut rng = CounterRng::new(seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..signals {
        let len = 1 + rng.below(max_len as u64) as usize;
        let g = random_vec(&mut rng, len);
        let beta = rng.uniform_in(0.05, 1.0);
        let want = tv_prox_1d_oracle(&g, beta)?;
        let got = tv_denoise_pdhg(&Vector::new(g)?, Grid::new(1, len)?, beta, cfg)?;
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::new(
        "TV prox vs 1D oracle",
        worst,
        tol,
        format!("{signals} signals of length <= {max_len}, {} PDHG iterations max", cfg.max_iters),
    ))
}

/// Per-path monotonicity of `D_{ξ_n}θ(x†, x_n)` for SGD-θ runs with seeds
/// `0..seeds`. Every iteration must be recorded, so the metric and history
/// strides of `cfg` are overridden to 1.
pub fn bregman_monotonicity(
    system: &EquationSystem,
    truth: &[f64],
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    seeds: u64,
    tol: f64,
) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for seed in 0..seeds {
        let cfg = SolverConfig { seed, metrics_stride: 1, history_stride: 1, ..*cfg };
        let out = run(system, &cfg, penalty, Method::SgdTheta, DualVector::zeros(system.dim()), Some(truth))
            .map_err(|f| f.error)?;
        let b: Vec<f64> = out.history.records.iter().filter_map(|r| r.bregman).collect();
        for w in b.windows(2) {
            let rise = w[1] - w[0];
            worst = worst.max(rise);
            if rise > tol {
                violations += 1;
            }
        }
    }
    Ok(Check::new(
        "Bregman monotonicity",
        worst,
        tol,
        format!("{seeds} seeds x {} iterations, {violations} violations", cfg.max_iters),
    ))
}
