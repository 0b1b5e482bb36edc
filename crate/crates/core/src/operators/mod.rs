//! Forward operators `F_i` with Fréchet derivatives and adjoints.
//!
//! Each equation of a system is a [`ForwardOperator`]. Two families ship
//! with the crate: rows of a sparse parallel-beam projection matrix
//! ([`CtRow`], linear) and the schlieren operator `f ↦ (R_i f)²`
//! ([`SchlierenOperator`], nonlinear).
//!
//! Adjoints are taken with respect to the pairing of the data space (see
//! [`ForwardOperator::data_weights`]) and, on the solution side, whatever
//! inner product the operator documents. For the sparse rows that is the
//! Euclidean one; for the schlieren operator it is the discrete `H¹` product
//! `⟨u, v⟩ = ⟨(I − Δ_h)u, v⟩_{L²}`.

pub mod poisson;
pub mod schlieren;
pub mod sparse;
pub mod tomo;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spaces::{DualVector, Vector};

pub use poisson::{apply_helmholtz, poisson_solve, PoissonSolveConfig};
pub use schlieren::{SchlierenGeometry, SchlierenOperator};
pub use sparse::{CsrMatrix, SparseRowBlock};
pub use tomo::{build_parallel_tomo, equally_spaced_angles};

pub trait ForwardOperator: Send + Sync {
    fn in_dim(&self) -> usize;

    fn out_dim(&self) -> usize;

    fn is_linear(&self) -> bool;

    fn apply(&self, x: &[f64]) -> Result<Vector>;

    /// `F'(x) h`.
    fn derivative_apply(&self, x: &[f64], h: &[f64]) -> Result<Vector>;

    /// `F'(x)* g`.
    fn derivative_adjoint(&self, x: &[f64], g: &[f64]) -> Result<DualVector>;

    /// `out += scale · F'(x)* g`. Override when the adjoint can be scattered
    /// without allocating.
    fn derivative_adjoint_accumulate(
        &self,
        x: &[f64],
        g: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let a = self.derivative_adjoint(x, g)?;
        Error::check_dim(out.len(), a.len())?;
        for (o, v) in out.iter_mut().zip(a.iter()) {
            *o += scale * v;
        }
        Ok(())
    }

    /// Quadrature weights of the data-space pairing; `None` means unit
    /// weights.
    fn data_weights(&self) -> Option<Arc<[f64]>> {
        None
    }

    /// Riesz map of the solution space, when it is not the identity. The
    /// adjoint then factors as `F'(x)* g = M⁻¹ s(x, g)`.
    fn riesz_map(&self) -> Option<RieszMap> {
        None
    }

    /// `out += scale · s(x, g)`, the adjoint before the Riesz map. Summing
    /// sources over a batch and applying `M⁻¹` once gives the same result as
    /// summing adjoints.
    fn derivative_adjoint_source_accumulate(
        &self,
        x: &[f64],
        g: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        self.derivative_adjoint_accumulate(x, g, scale, out)
    }
}

/// Non-identity Riesz maps of solution spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RieszMap {
    /// `M = I − Δ_h` on a square node grid with Dirichlet boundary.
    Helmholtz { cfg: PoissonSolveConfig },
}

impl RieszMap {
    /// `M⁻¹ source`.
    pub fn solve(&self, source: &[f64]) -> Result<Vector> {
        match self {
            RieszMap::Helmholtz { cfg } => poisson_solve(source, cfg),
        }
    }

    /// Norm induced by the map, `sqrt(h² ⟨M u, u⟩)` for the Helmholtz map.
    pub fn norm(&self, u: &[f64]) -> Result<f64> {
        match self {
            RieszMap::Helmholtz { .. } => {
                let n = poisson::grid_side(u.len())?;
                let mut mu = vec![0.0; u.len()];
                apply_helmholtz(u, n, &mut mu)?;
                let h = poisson::grid_spacing(n);
                Ok((h * h * crate::spaces::dot(&mu, u)).max(0.0).sqrt())
            }
        }
    }
}

/// One row of a shared sparse matrix seen as a scalar-valued linear
/// equation `F_i x = ⟨a_i, x⟩`.
#[derive(Debug, Clone)]
pub struct CtRow {
    matrix: Arc<CsrMatrix>,
    row: usize,
}

impl CtRow {
    pub fn new(matrix: Arc<CsrMatrix>, row: usize) -> Result<Self> {
        if row >= matrix.rows() {
            return Err(Error::RowRange { start: row, end: row + 1, rows: matrix.rows() });
        }
        Ok(Self { matrix, row })
    }

    /// One operator per matrix row.
    pub fn all_rows(matrix: &Arc<CsrMatrix>) -> Vec<CtRow> {
        (0..matrix.rows()).map(|row| CtRow { matrix: Arc::clone(matrix), row }).collect()
    }

    pub fn row(&self) -> usize {
        self.row
    }

    fn dot_row(&self, x: &[f64]) -> f64 {
        let (cols, vals) = self.matrix.row(self.row);
        let mut acc = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            acc += v * x[*c];
        }
        acc
    }
}

impl ForwardOperator for CtRow {
    fn in_dim(&self) -> usize {
        self.matrix.cols()
    }

    fn out_dim(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn apply(&self, x: &[f64]) -> Result<Vector> {
        Error::check_dim(self.in_dim(), x.len())?;
        Ok(Vector::from_raw(vec![self.dot_row(x)]))
    }

    fn derivative_apply(&self, x: &[f64], h: &[f64]) -> Result<Vector> {
        Error::check_dim(self.in_dim(), x.len())?;
        self.apply(h)
    }

    fn derivative_adjoint(&self, x: &[f64], g: &[f64]) -> Result<DualVector> {
        let mut out = vec![0.0; self.in_dim()];
        self.derivative_adjoint_accumulate(x, g, 1.0, &mut out)?;
        Ok(DualVector::from_raw(out))
    }

    fn derivative_adjoint_accumulate(
        &self,
        _x: &[f64],
        g: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        Error::check_dim(1, g.len())?;
        Error::check_dim(self.in_dim(), out.len())?;
        let s = scale * g[0];
        let (cols, vals) = self.matrix.row(self.row);
        for (c, v) in cols.iter().zip(vals) {
            out[*c] += s * v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix() -> Arc<CsrMatrix> {
        Arc::new(
            CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]).unwrap(),
        )
    }

    #[test]
    fn ct_row_is_linear_with_consistent_derivative() {
        let rows = CtRow::all_rows(&matrix());
        let x = [0.5, -1.0, 2.0];
        let h = [1.0, 3.0, -0.5];
        for row in &rows {
            let lhs = row.derivative_apply(&x, &h).unwrap();
            let diff = row.apply(&h).unwrap()[0] - row.apply(&[0.0; 3]).unwrap()[0];
            assert_eq!(lhs[0], diff);
        }
        assert_eq!(rows[0].apply(&x).unwrap().as_slice(), &[4.5]);
    }

    #[test]
    fn ct_row_adjoint_matches_default_path() {
        let row = CtRow::new(matrix(), 0).unwrap();
        let mut out = vec![1.0; 3];
        row.derivative_adjoint_accumulate(&[0.0; 3], &[2.0], 0.5, &mut out).unwrap();
        assert_eq!(out, vec![2.0, 1.0, 3.0]);
        assert!(CtRow::new(matrix(), 2).is_err());
    }

    #[test]
    fn helmholtz_norm_matches_h1_inner_product() {
        let geo = SchlierenGeometry::new(9).unwrap();
        let u = geo.sample(|x, y| (1.0 - x * x) * (1.0 - y * y) * (x + 0.3));
        let map = RieszMap::Helmholtz { cfg: PoissonSolveConfig::default() };
        let norm = map.norm(&u).unwrap();
        assert!((norm * norm - geo.h1_inner(&u, &u).unwrap()).abs() < 1e-13);
        assert!(map.norm(&[0.0; 5]).is_err());
    }
}
