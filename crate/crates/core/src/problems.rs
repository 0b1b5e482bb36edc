//! Ready-made test problems: parallel-beam CT of the Shepp–Logan phantom and
//! schlieren imaging of a two-disc object.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{
    build_parallel_tomo, equally_spaced_angles, CsrMatrix, ForwardOperator, PoissonSolveConfig, SchlierenGeometry,
    SchlierenOperator,
};
use crate::penalty::Grid;
use crate::sampling::{apply_noise, disc_phantom, shepp_logan, NoiseLevelSource, NoiseSpec, NoisyDataset};
use crate::solver::EquationSystem;
use crate::spaces::Vector;

/// A noisy system together with its ground truth.
#[derive(Debug, Clone)]
pub struct Problem {
    pub system: EquationSystem,
    pub truth: Vector,
    pub dataset: NoisyDataset,
    /// Image grid of the unknown.
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtSetup {
    pub n: usize,
    pub angles: Vec<f64>,
    pub lines: usize,
}

impl CtSetup {
    /// `angles` equally spaced angles on `(0°, 180°]`.
    pub fn equally_spaced(n: usize, angles: usize, lines: usize) -> Self {
        Self { n, angles: equally_spaced_angles(angles), lines }
    }

    pub fn matrix(&self) -> Result<CsrMatrix> {
        build_parallel_tomo(self.n, &self.angles, self.lines)
    }
}

/// One scalar equation per ray; exact data are projections of the phantom.
pub fn ct_problem(setup: &CtSetup, noise: &NoiseSpec, source: NoiseLevelSource) -> Result<Problem> {
    let matrix = Arc::new(setup.matrix()?);
    let truth = shepp_logan(setup.n)?;
    let exact: Vec<Vector> = matrix.apply(&truth)?.iter().map(|v| Vector::from_raw(vec![*v])).collect();
    let dataset = apply_noise(noise, &exact, None)?;
    let system = EquationSystem::from_matrix(matrix, &dataset, source)?;
    Ok(Problem { system, truth, dataset, grid: Grid::square(setup.n)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchlierenSetup {
    pub n: usize,
    pub directions: usize,
    pub poisson: PoissonSolveConfig,
}

/// One equation per direction; exact data are `(R_i f)²` of the disc
/// phantom, and noise norms carry the detector quadrature weights.
pub fn schlieren_problem(setup: &SchlierenSetup, noise: &NoiseSpec, source: NoiseLevelSource) -> Result<Problem> {
    let geometry = Arc::new(SchlierenGeometry::new(setup.n)?);
    let ops = SchlierenOperator::equally_spaced(&geometry, setup.directions, setup.poisson)?;
    let truth = disc_phantom(&geometry);
    let exact = ops.iter().map(|op| op.apply(&truth)).collect::<Result<Vec<_>>>()?;
    let dataset = apply_noise(noise, &exact, Some(Arc::clone(geometry.weights())))?;
    if dataset.len() != ops.len() {
        return Err(Error::DimensionMismatch { expected: ops.len(), found: dataset.len() });
    }
    let system = EquationSystem::from_schlieren(ops, &dataset, source)?;
    Ok(Problem { system, truth, dataset, grid: Grid::square(setup.n)? })
}
