//! A system of forward equations `F_i(x) = y_i^δ` with noise levels.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{CsrMatrix, CtRow, ForwardOperator, SchlierenOperator};
use crate::sampling::{NoiseLevelSource, NoisyDataset};
use crate::spaces::{DataSpaceSpec, Vector};

#[derive(Clone)]
pub struct EquationSystem {
    operators: Vec<Arc<dyn ForwardOperator>>,
    data: Vec<Vector>,
    levels: Vec<f64>,
    spaces: Vec<DataSpaceSpec>,
    dim: usize,
}

impl std::fmt::Debug for EquationSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquationSystem")
            .field("equations", &self.operators.len())
            .field("dim", &self.dim)
            .finish()
    }
}

impl EquationSystem {
    /// `levels[i]` is the noise level `δ_i` used for discrepancy gating;
    /// data norms use exponent `r` and each operator's quadrature weights.
    pub fn new(operators: Vec<Arc<dyn ForwardOperator>>, data: Vec<Vector>, levels: Vec<f64>, r: f64) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::invalid("an equation system needs at least one equation"));
        }
        Error::check_dim(operators.len(), data.len())?;
        Error::check_dim(operators.len(), levels.len())?;
        let dim = operators[0].in_dim();
        let mut spaces = Vec::with_capacity(operators.len());
        for (op, y) in operators.iter().zip(&data) {
            Error::check_dim(dim, op.in_dim())?;
            Error::check_dim(op.out_dim(), y.len())?;
            spaces.push(match op.data_weights() {
                Some(w) => DataSpaceSpec::weighted(r, w)?,
                None => DataSpaceSpec::new(r, op.out_dim())?,
            });
        }
        if levels.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("noise levels must be finite and nonnegative"));
        }
        Ok(Self { operators, data, levels, spaces, dim })
    }

    /// One equation per matrix row, with noisy data and levels from
    /// `dataset`.
    pub fn from_matrix(matrix: Arc<CsrMatrix>, dataset: &NoisyDataset, source: NoiseLevelSource) -> Result<Self> {
        let ops = CtRow::all_rows(&matrix).into_iter().map(|op| Arc::new(op) as Arc<dyn ForwardOperator>).collect();
        Self::new(ops, dataset.noisy().to_vec(), dataset.levels(source).to_vec(), dataset.r())
    }

    pub fn from_schlieren(ops: Vec<SchlierenOperator>, dataset: &NoisyDataset, source: NoiseLevelSource) -> Result<Self> {
        let ops = ops.into_iter().map(|op| Arc::new(op) as Arc<dyn ForwardOperator>).collect();
        Self::new(ops, dataset.noisy().to_vec(), dataset.levels(source).to_vec(), dataset.r())
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Dimension of the unknown.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.spaces[0].r()
    }

    pub fn operator(&self, i: usize) -> &Arc<dyn ForwardOperator> {
        &self.operators[i]
    }

    pub fn data(&self) -> &[Vector] {
        &self.data
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn space(&self, i: usize) -> &DataSpaceSpec {
        &self.spaces[i]
    }

    /// `F_i(x) − y_i^δ`.
    pub fn residual(&self, i: usize, x: &[f64]) -> Result<Vector> {
        let mut fx = self.operators[i].apply(x)?.into_inner();
        for (v, y) in fx.iter_mut().zip(self.data[i].iter()) {
            *v -= y;
        }
        Ok(Vector::from_raw(fx))
    }

    /// Residual norms `‖F_i(x) − y_i^δ‖` for every equation, in index order.
    pub fn residual_norms(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| Ok(self.spaces[i].norm(&self.residual(i, x)?))).collect()
    }

    /// `(Σ_{i∈batch} δ_i^r)^{1/r}`.
    pub fn batch_level(&self, batch: &[usize]) -> f64 {
        let r = self.r();
        batch.iter().map(|i| self.levels[*i].powf(r)).sum::<f64>().powf(1.0 / r)
    }

    /// `Σ_i (τ δ_i)²`.
    pub fn discrepancy_threshold(&self, tau: f64) -> f64 {
        self.levels.iter().map(|d| (tau * d).powi(2)).sum()
    }

    /// Replaces the gating levels (for example a priori by realized).
    pub fn with_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        Error::check_dim(self.len(), levels.len())?;
        if levels.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("noise levels must be finite and nonnegative"));
        }
        self.levels = levels;
        Ok(self)
    }
}
