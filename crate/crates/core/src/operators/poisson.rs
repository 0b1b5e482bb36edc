//! `(I − Δ_h)⁻¹` on an `n × n` node grid over `[−1, 1]²` by conjugate
//! gradients.
//!
//! The grid spacing is `h = 2/(n − 1)`. Values one spacing beyond the grid
//! are taken as zero (homogeneous Dirichlet data), which makes the 5-point
//! operator symmetric positive definite on all `n²` nodes.

use crate::error::{Error, Result};
use crate::spaces::{dot, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSolveConfig {
    /// Relative residual tolerance `‖w − A u‖ ≤ cg_tol · ‖w‖`.
    pub cg_tol: f64,
    /// `None` means `10 · n²`.
    pub cg_max_iters: Option<usize>,
}

impl Default for PoissonSolveConfig {
    fn default() -> Self {
        Self { cg_tol: 1e-10, cg_max_iters: None }
    }
}

impl PoissonSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol.is_finite()) {
            return Err(Error::invalid(format!("cg_tol must be positive, got {}", self.cg_tol)));
        }
        if self.cg_max_iters == Some(0) {
            return Err(Error::invalid("cg_max_iters must be at least 1"));
        }
        Ok(())
    }
}

pub fn grid_spacing(n: usize) -> f64 {
    2.0 / (n as f64 - 1.0)
}

pub(crate) fn grid_side(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n < 2 || n * n != len {
        return Err(Error::invalid(format!("{len} values do not form a square grid with n >= 2")));
    }
    Ok(n)
}

/// `out = (I − Δ_h) u` on the `n × n` grid.
pub fn apply_helmholtz(u: &[f64], n: usize, out: &mut [f64]) -> Result<()> {
    Error::check_dim(n * n, u.len())?;
    Error::check_dim(n * n, out.len())?;
    let inv_h2 = 1.0 / grid_spacing(n).powi(2);
    for r in 0..n {
        for c in 0..n {
            let k = r * n + c;
            let mut nb = 0.0;
            if r > 0 {
                nb += u[k - n];
            }
            if r + 1 < n {
                nb += u[k + n];
            }
            if c > 0 {
                nb += u[k - 1];
            }
            if c + 1 < n {
                nb += u[k + 1];
            }
            out[k] = u[k] + inv_h2 * (4.0 * u[k] - nb);
        }
    }
    Ok(())
}

/// Solves `(I − Δ_h) u = w`; the grid side is inferred from `w.len() = n²`.
pub fn poisson_solve(w: &[f64], cfg: &PoissonSolveConfig) -> Result<Vector> {
    cfg.validate()?;
    let n = grid_side(w.len())?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Poisson right-hand side"));
    }
    let len = w.len();
    let mut u = vec![0.0; len];
    let w_norm = dot(w, w).sqrt();
    if w_norm == 0.0 {
        return Ok(Vector::from_raw(u));
    }
    let max_iters = cfg.cg_max_iters.unwrap_or(10 * len);
    let target = cfg.cg_tol * w_norm;
    let mut r = w.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iters {
        if rr.sqrt() <= target {
            return Ok(Vector::from_raw(u));
        }
        apply_helmholtz(&p, n, &mut ap)?;
        let alpha = rr / dot(&p, &ap);
        for k in 0..len {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..len {
            p[k] = r[k] + beta * p[k];
        }
    }
    if rr.sqrt() <= target {
        return Ok(Vector::from_raw(u));
    }
    Err(Error::ConvergenceFailure {
        solver: "conjugate gradients",
        iterations: max_iters,
        residual: rr.sqrt() / w_norm,
        tolerance: cfg.cg_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn residual(u: &[f64], w: &[f64], n: usize) -> f64 {
        let mut au = vec![0.0; u.len()];
        apply_helmholtz(u, n, &mut au).unwrap();
        let diff: Vec<f64> = au.iter().zip(w).map(|(a, b)| a - b).collect();
        dot(&diff, &diff).sqrt() / dot(w, w).sqrt()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let u = poisson_solve(&[0.0; 25], &PoissonSolveConfig::default()).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn manufactured_solution() {
        // sin(πx/2)·sin(πy/2)-type profile sampled at nodes, zero just outside
        let n = 20;
        let h = grid_spacing(n);
        let mut exact = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let x = -1.0 + c as f64 * h;
                let y = 1.0 - r as f64 * h;
                exact[r * n + c] = (PI * (x + 1.0 + h) / (2.0 + 2.0 * h)).sin()
                    * (2.0 * PI * (y + 1.0 + h) / (2.0 + 2.0 * h)).sin();
            }
        }
        let mut w = vec![0.0; n * n];
        apply_helmholtz(&exact, n, &mut w).unwrap();
        let u = poisson_solve(&w, &PoissonSolveConfig { cg_tol: 1e-13, cg_max_iters: None }).unwrap();
        let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
        assert!(residual(&u, &w, n) < 1e-8);
    }

    #[test]
    fn inverse_is_symmetric() {
        let n = 12;
        let a: Vec<f64> = (0..n * n).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let b: Vec<f64> = (0..n * n).map(|k| ((k * 13 % 7) as f64 - 3.0) / 2.0).collect();
        let cfg = PoissonSolveConfig { cg_tol: 1e-13, cg_max_iters: None };
        let sa = poisson_solve(&a, &cfg).unwrap();
        let sb = poisson_solve(&b, &cfg).unwrap();
        let lhs = dot(&sa, &b);
        let rhs = dot(&a, &sb);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn reports_non_convergence() {
        let w: Vec<f64> = (0..64).map(|k| k as f64).collect();
        let cfg = PoissonSolveConfig { cg_tol: 1e-12, cg_max_iters: Some(2) };
        assert!(matches!(poisson_solve(&w, &cfg), Err(Error::ConvergenceFailure { .. })));
        assert!(poisson_solve(&w[..63], &cfg).is_err());
        assert!(PoissonSolveConfig { cg_tol: 0.0, cg_max_iters: None }.validate().is_err());
    }
}
