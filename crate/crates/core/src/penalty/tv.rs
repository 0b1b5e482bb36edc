//! Isotropic discrete total variation and its proximal map via PDHG.
//!
//! The discrete gradient uses forward differences on a unit-spaced grid with
//! replicate (Neumann) boundary: the difference across the last row or column
//! is zero. The proximal problem
//!
//! ```text
//! min_z  1/(2β) ‖z − g‖² + Σ_k |(∇z)_k|
//! ```
//!
//! is solved with the primal-dual hybrid gradient method (Chambolle–Pock form
//! with primal extrapolation) on the saddle problem
//! `min_z max_{|p|≤1} ⟨∇z, p⟩ + 1/(2β)‖z − g‖²`. The dual objective is
//! `D(p) = −⟨g, div p⟩ − β/2 ‖div p‖²`, and iterations stop once the relative
//! duality gap `(P(z) − D(p)) / max(1, |P(z)|)` drops below the tolerance.

use crate::error::{Error, Result};
use crate::spaces::Vector;

/// Row-major 2D grid shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        Ok(Self { rows, cols })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Upper bound on `‖∇‖` for forward differences on a unit grid.
pub const GRADIENT_NORM_BOUND: f64 = 2.828_427_124_746_190_1; // √8

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdhgConfig {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub tau_primal: f64,
    pub sigma_dual: f64,
}

impl Default for PdhgConfig {
    fn default() -> Self {
        let s = 1.0 / GRADIENT_NORM_BOUND;
        Self { max_iters: 200, gap_tol: 1e-3, tau_primal: s, sigma_dual: s }
    }
}

impl PdhgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("PDHG max_iters must be positive"));
        }
        if self.gap_tol.is_nan() || self.gap_tol < 0.0 {
            return Err(Error::invalid("PDHG gap tolerance must be nonnegative"));
        }
        if !(self.tau_primal > 0.0 && self.sigma_dual > 0.0) {
            return Err(Error::invalid("PDHG step sizes must be positive"));
        }
        let product = self.tau_primal * self.sigma_dual * GRADIENT_NORM_BOUND * GRADIENT_NORM_BOUND;
        if product > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "PDHG step sizes violate tau*sigma*L^2 <= 1 (got {product})"
            )));
        }
        Ok(())
    }
}

/// Dual variable carried between successive proximal solves.
#[derive(Debug, Clone, Default)]
pub struct PdhgWarmStart {
    dual: Option<Vec<f64>>,
}

impl PdhgWarmStart {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.dual = None;
    }

    pub fn is_primed(&self) -> bool {
        self.dual.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdhgStats {
    pub iterations: usize,
    pub relative_gap: f64,
}

/// Writes forward differences of `z` into `out = [dx | dy]`.
pub(crate) fn gradient(z: &[f64], grid: Grid, out: &mut [f64]) {
    let (rows, cols) = (grid.rows, grid.cols);
    let n = grid.len();
    let (dx, dy) = out.split_at_mut(n);
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            dx[k] = if j + 1 < cols { z[k + 1] - z[k] } else { 0.0 };
            dy[k] = if i + 1 < rows { z[k + cols] - z[k] } else { 0.0 };
        }
    }
}

/// `div = −∇ᵀ`.
pub(crate) fn divergence(p: &[f64], grid: Grid, out: &mut [f64]) {
    let (rows, cols) = (grid.rows, grid.cols);
    let n = grid.len();
    let (px, py) = p.split_at(n);
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            let mut v = 0.0;
            if j + 1 < cols {
                v += px[k];
            }
            if j > 0 {
                v -= px[k - 1];
            }
            if i + 1 < rows {
                v += py[k];
            }
            if i > 0 {
                v -= py[k - cols];
            }
            out[k] = v;
        }
    }
}

/// Isotropic total variation `Σ sqrt(dx² + dy²)`.
pub fn tv_value(z: &[f64], grid: Grid) -> Result<f64> {
    Error::check_dim(grid.len(), z.len())?;
    let mut buf = vec![0.0; 2 * grid.len()];
    Ok(tv_value_with(z, grid, &mut buf))
}

fn tv_value_with(z: &[f64], grid: Grid, buf: &mut [f64]) -> f64 {
    gradient(z, grid, buf);
    let n = grid.len();
    let mut acc = 0.0;
    for k in 0..n {
        acc += buf[k].hypot(buf[n + k]);
    }
    acc
}

fn prox_objective(z: &[f64], g: &[f64], beta: f64, grid: Grid, buf: &mut [f64]) -> f64 {
    let mut fit = 0.0;
    for (a, b) in z.iter().zip(g) {
        fit += (a - b) * (a - b);
    }
    fit / (2.0 * beta) + tv_value_with(z, grid, buf)
}

/// Objective `1/(2β)‖z − g‖² + TV(z)` of the proximal problem.
pub fn tv_prox_objective(z: &[f64], g: &[f64], beta: f64, grid: Grid) -> Result<f64> {
    Error::check_dim(grid.len(), z.len())?;
    Error::check_dim(grid.len(), g.len())?;
    let mut buf = vec![0.0; 2 * grid.len()];
    Ok(prox_objective(z, g, beta, grid, &mut buf))
}

/// Approximately solves `argmin_z 1/(2β)‖z − g‖² + TV(z)` by PDHG, starting
/// from a zero dual variable.
pub fn tv_denoise_pdhg(g: &Vector, grid: Grid, beta: f64, cfg: &PdhgConfig) -> Result<Vector> {
    let mut warm = PdhgWarmStart::new();
    tv_prox(g, grid, beta, cfg, &mut warm).map(|(z, _)| z)
}

/// PDHG solve that reads and updates a warm-start handle. The primal
/// variable starts at `g + β div p`, which keeps the iterate mean equal to the
/// mean of `g`.
pub fn tv_prox(
    g: &[f64],
    grid: Grid,
    beta: f64,
    cfg: &PdhgConfig,
    warm: &mut PdhgWarmStart,
) -> Result<(Vector, PdhgStats)> {
    cfg.validate()?;
    Error::check_dim(grid.len(), g.len())?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("TV weight beta must be positive"));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("TV denoising input"));
    }
    let n = grid.len();
    let mut p = match warm.dual.take() {
        Some(p) if p.len() == 2 * n => p,
        _ => vec![0.0; 2 * n],
    };
    let mut div = vec![0.0; n];
    let mut grad = vec![0.0; 2 * n];

    divergence(&p, grid, &mut div);
    let mut z: Vec<f64> = g.iter().zip(&div).map(|(g, d)| g + beta * d).collect();
    let mut z_bar = z.clone();
    let mut z_prev = vec![0.0; n];

    let (tau, sigma) = (cfg.tau_primal, cfg.sigma_dual);
    let shrink = 1.0 / (1.0 + tau / beta);
    let mut stats = PdhgStats { iterations: 0, relative_gap: f64::INFINITY };

    for it in 1..=cfg.max_iters {
        gradient(&z_bar, grid, &mut grad);
        for k in 0..n {
            let qx = p[k] + sigma * grad[k];
            let qy = p[n + k] + sigma * grad[n + k];
            let scale = qx.hypot(qy).max(1.0);
            p[k] = qx / scale;
            p[n + k] = qy / scale;
        }
        divergence(&p, grid, &mut div);
        z_prev.copy_from_slice(&z);
        for k in 0..n {
            z[k] = (z[k] + tau * div[k] + (tau / beta) * g[k]) * shrink;
            z_bar[k] = 2.0 * z[k] - z_prev[k];
        }

        let primal = prox_objective(&z, g, beta, grid, &mut grad);
        let dual = -crate::spaces::dot(g, &div) - 0.5 * beta * crate::spaces::dot(&div, &div);
        if !primal.is_finite() || !dual.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "PDHG produced a non-finite objective at iteration {it}"
            )));
        }
        stats = PdhgStats { iterations: it, relative_gap: (primal - dual) / primal.abs().max(1.0) };
        if stats.relative_gap < cfg.gap_tol {
            break;
        }
    }

    // Descent safeguard: never return something worse than the input.
    if prox_objective(&z, g, beta, grid, &mut grad) > prox_objective(g, g, beta, grid, &mut grad) {
        z.copy_from_slice(g);
    }
    warm.dual = Some(p);
    Ok((Vector::from_raw(z), stats))
}
