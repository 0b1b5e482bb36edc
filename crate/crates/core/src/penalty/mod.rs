//! Convex penalties, Bregman distances and the mirror step.
//!
//! Three 2-convex penalties are provided:
//!
//! | variant            | `θ(x)`                          | `σ`        |
//! |--------------------|---------------------------------|------------|
//! | `Quadratic`        | `½‖x‖²`                         | `1/2`      |
//! | `QuadraticNonneg`  | `½‖x‖² + 𝕀_{x ≥ 0}(x)`          | `1/2`      |
//! | `QuadraticTv`      | `1/(2β)‖x‖² + TV(x)`            | `1/(2β)`   |
//!
//! The mirror step maps a dual iterate back to the primal space,
//! `x = argmin_z { θ(z) − ⟨ξ, z⟩ }`, which is the gradient of the conjugate
//! `θ*` at `ξ`. The first two variants have closed forms; the TV variant is a
//! denoising problem solved by PDHG (see [`tv`]).

pub mod tv;

use crate::error::{Error, Result};
use crate::spaces::{dot, DualVector, Vector};

pub use tv::{tv_denoise_pdhg, tv_value, Grid, PdhgConfig, PdhgStats, PdhgWarmStart};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Quadratic,
    QuadraticNonneg,
    QuadraticTv { beta: f64, grid: Grid },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    dim: usize,
}

/// Value of a penalty, which may be `+∞` outside its effective domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyValue {
    Finite(f64),
    Infinite,
}

impl PenaltyValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, PenaltyValue::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            PenaltyValue::Finite(v) => Some(v),
            PenaltyValue::Infinite => None,
        }
    }
}

impl PenaltySpec {
    pub fn quadratic(dim: usize) -> Result<Self> {
        Self::with_kind(PenaltyKind::Quadratic, dim)
    }

    pub fn quadratic_nonneg(dim: usize) -> Result<Self> {
        Self::with_kind(PenaltyKind::QuadraticNonneg, dim)
    }

    pub fn quadratic_tv(beta: f64, grid: Grid) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("TV weight beta must be positive"));
        }
        Self::with_kind(PenaltyKind::QuadraticTv { beta, grid }, grid.len())
    }

    fn with_kind(kind: PenaltyKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("penalty dimension must be positive"));
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Convexity order; 2 for every implemented variant.
    pub fn p(&self) -> f64 {
        2.0
    }

    /// Convexity modulus `σ` with `D_ξθ(x̄, x) ≥ σ‖x̄ − x‖²`.
    pub fn sigma(&self) -> f64 {
        match self.kind {
            PenaltyKind::Quadratic | PenaltyKind::QuadraticNonneg => 0.5,
            PenaltyKind::QuadraticTv { beta, .. } => 1.0 / (2.0 * beta),
        }
    }

    /// Weight `a` of the quadratic part `a/2 ‖x‖²`.
    fn quad_weight(&self) -> f64 {
        match self.kind {
            PenaltyKind::QuadraticTv { beta, .. } => 1.0 / beta,
            _ => 1.0,
        }
    }

    fn tv_grid(&self) -> Option<Grid> {
        match self.kind {
            PenaltyKind::QuadraticTv { grid, .. } => Some(grid),
            _ => None,
        }
    }
}

pub fn penalty_value(spec: &PenaltySpec, x: &[f64]) -> Result<PenaltyValue> {
    Error::check_dim(spec.dim, x.len())?;
    if matches!(spec.kind, PenaltyKind::QuadraticNonneg) && x.iter().any(|v| *v < 0.0) {
        return Ok(PenaltyValue::Infinite);
    }
    let mut value = 0.5 * spec.quad_weight() * dot(x, x);
    if let Some(grid) = spec.tv_grid() {
        value += tv_value(x, grid)?;
    }
    Ok(PenaltyValue::Finite(value))
}

/// Conjugate `θ*(ξ)` for variants where it has a closed form.
pub fn conjugate_value(spec: &PenaltySpec, xi: &[f64]) -> Result<Option<f64>> {
    Error::check_dim(spec.dim, xi.len())?;
    Ok(match spec.kind {
        PenaltyKind::Quadratic => Some(0.5 * dot(xi, xi)),
        PenaltyKind::QuadraticNonneg => {
            Some(0.5 * xi.iter().map(|v| v.max(0.0) * v.max(0.0)).sum::<f64>())
        }
        PenaltyKind::QuadraticTv { .. } => None,
    })
}

/// A primal/dual pair `(x, ξ)` with `ξ ∈ ∂θ(x)`, as produced by the mirror
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanPair {
    x: Vector,
    xi: DualVector,
}

impl BregmanPair {
    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn xi(&self) -> &DualVector {
        &self.xi
    }

    pub fn into_parts(self) -> (Vector, DualVector) {
        (self.x, self.xi)
    }
}

/// `D_ξθ(target, x) = θ(target) − θ(x) − ⟨ξ, target − x⟩`.
///
/// Evaluated as `a/2‖t − x‖² + ⟨a·x − ξ, t − x⟩ + TV(t) − TV(x)` (with `a`
/// the quadratic weight), which is algebraically identical but avoids
/// cancellation between the two large penalty values.
pub fn bregman_distance(spec: &PenaltySpec, target: &[f64], pair: &BregmanPair) -> Result<f64> {
    Error::check_dim(spec.dim, target.len())?;
    Error::check_dim(spec.dim, pair.x.len())?;
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Bregman target"));
    }
    if penalty_value(spec, target)?.is_infinite() {
        return Err(Error::InfeasibleTarget);
    }
    let a = spec.quad_weight();
    let mut quad = 0.0;
    let mut cross = 0.0;
    for ((t, x), xi) in target.iter().zip(pair.x.iter()).zip(pair.xi.iter()) {
        let d = t - x;
        quad += d * d;
        cross += (a * x - xi) * d;
    }
    let mut dist = 0.5 * a * quad + cross;
    if let Some(grid) = spec.tv_grid() {
        dist += tv_value(target, grid)? - tv_value(&pair.x, grid)?;
    }
    Ok(dist)
}

/// Mirror step with a fresh PDHG state.
pub fn mirror_step(spec: &PenaltySpec, xi: &DualVector, pdhg: &PdhgConfig) -> Result<BregmanPair> {
    mirror_step_warm(spec, xi, pdhg, &mut PdhgWarmStart::new()).map(|(pair, _)| pair)
}

/// Mirror step that reuses (and refreshes) a PDHG warm start. The returned
/// statistics are `None` for closed-form variants.
pub fn mirror_step_warm(
    spec: &PenaltySpec,
    xi: &DualVector,
    pdhg: &PdhgConfig,
    warm: &mut PdhgWarmStart,
) -> Result<(BregmanPair, Option<PdhgStats>)> {
    Error::check_dim(spec.dim, xi.len())?;
    if !xi.is_finite() {
        return Err(Error::NonFinite("mirror step input"));
    }
    let (x, stats) = match spec.kind {
        PenaltyKind::Quadratic => (xi.to_primal(), None),
        PenaltyKind::QuadraticNonneg => {
            (Vector::from_raw(xi.iter().map(|v| v.max(0.0)).collect()), None)
        }
        PenaltyKind::QuadraticTv { beta, grid } => {
            let g: Vec<f64> = xi.iter().map(|v| beta * v).collect();
            let (x, stats) = tv::tv_prox(&g, grid, beta, pdhg, warm)?;
            if !x.is_finite() {
                return Err(Error::NumericalFailure("PDHG returned non-finite values".into()));
            }
            (x, Some(stats))
        }
    };
    Ok((BregmanPair { x, xi: xi.clone() }, stats))
}
