//! Schlieren operator `F(f) = (R_σ f)²` on an `n × n` node grid over
//! `D = [−1, 1]²`.
//!
//! Node `(row, col)` sits at `x = −1 + col·h`, `y = 1 − row·h` with
//! `h = 2/(n − 1)`. The line integral `R_σ f(s) = ∫ f(sσ + rσ⊥) dr` is
//! approximated by composite midpoint quadrature in `r` with step close to
//! `h`, bilinear interpolation of `f`, and `f = 0` outside `D`.
//!
//! Pairings: the data side uses trapezoidal weights `ω_j` over the detector
//! offsets, the grid side uses `h² Σ u v`, and the solution space carries the
//! `H¹` product `h² ⟨(I − Δ_h)u, v⟩`. With those,
//! `R* v = h⁻² Rᵀ(ω ⊙ v)` is the exact transpose of the assembled quadrature
//! and `F'(f)* g = (I − Δ_h)⁻¹ 2 R*(g ⊙ R f)`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::poisson::{apply_helmholtz, grid_spacing, poisson_solve, PoissonSolveConfig};
use crate::operators::sparse::CsrMatrix;
use crate::operators::{ForwardOperator, RieszMap};
use crate::spaces::{dot, DualVector, Vector};

/// Grid, detector offsets and quadrature shared by all directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SchlierenGeometry {
    n: usize,
    h: f64,
    offsets: Vec<f64>,
    weights: Arc<[f64]>,
    quad_points: usize,
}

impl SchlierenGeometry {
    /// `n × n` nodes and `round(1.5 n)` detectors on `[−√2, √2]`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_detectors(n, ((1.5 * n as f64).round() as usize).max(2))
    }

    pub fn with_detectors(n: usize, detectors: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("schlieren grid needs n >= 3"));
        }
        if detectors < 2 {
            return Err(Error::invalid("at least two detector offsets are required"));
        }
        let h = grid_spacing(n);
        let ds = 2.0 * SQRT_2 / (detectors - 1) as f64;
        let offsets: Vec<f64> = (0..detectors).map(|j| -SQRT_2 + j as f64 * ds).collect();
        let mut weights = vec![ds; detectors];
        weights[0] = 0.5 * ds;
        weights[detectors - 1] = 0.5 * ds;
        let quad_points = (2.0 * SQRT_2 / h).ceil() as usize;
        Ok(Self { n, h, offsets, weights: weights.into(), quad_points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Trapezoidal weights of the detector pairing.
    pub fn weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn node(&self, row: usize, col: usize) -> (f64, f64) {
        (-1.0 + col as f64 * self.h, 1.0 - row as f64 * self.h)
    }

    /// Samples `f(x, y)` at every node, row-major.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                let (x, y) = self.node(r, c);
                out.push(f(x, y));
            }
        }
        out
    }

    /// `h² Σ u v`.
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.h * self.h * dot(u, v)
    }

    /// `h² ⟨(I − Δ_h)u, v⟩`.
    pub fn h1_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let mut au = vec![0.0; u.len()];
        apply_helmholtz(u, self.n, &mut au)?;
        Error::check_dim(u.len(), v.len())?;
        Ok(self.l2_inner(&au, v))
    }

    /// Quadrature weights of `R_σ f(s)` as `(node, weight)` pairs, sorted by
    /// node and merged.
    pub fn line_weights(&self, phi: f64, s: f64) -> Vec<(usize, f64)> {
        let (sin, cos) = phi.sin_cos();
        let n = self.n;
        let dr = 2.0 * SQRT_2 / self.quad_points as f64;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(4 * self.quad_points);
        for q in 0..self.quad_points {
            let r = -SQRT_2 + (q as f64 + 0.5) * dr;
            let px = s * cos - r * sin;
            let py = s * sin + r * cos;
            if !(-1.0..=1.0).contains(&px) || !(-1.0..=1.0).contains(&py) {
                continue;
            }
            let cf = (px + 1.0) / self.h;
            let rf = (1.0 - py) / self.h;
            let c0 = (cf.floor() as usize).min(n - 2);
            let r0 = (rf.floor() as usize).min(n - 2);
            let a = cf - c0 as f64;
            let b = rf - r0 as f64;
            let k = r0 * n + c0;
            entries.push((k, dr * (1.0 - a) * (1.0 - b)));
            entries.push((k + 1, dr * a * (1.0 - b)));
            entries.push((k + n, dr * (1.0 - a) * b));
            entries.push((k + n + 1, dr * a * b));
        }
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        entries.retain(|e| e.1 != 0.0);
        entries
    }

    /// `R_σ f(s)` at an arbitrary offset.
    pub fn line_integral(&self, f: &[f64], phi: f64, s: f64) -> Result<f64> {
        Error::check_dim(self.n * self.n, f.len())?;
        Ok(self.line_weights(phi, s).iter().map(|(k, w)| w * f[*k]).sum())
    }
}

/// `F(f) = (R_σ f)²` for one direction `σ = (cos φ, sin φ)`.
#[derive(Debug, Clone)]
pub struct SchlierenOperator {
    phi: f64,
    geometry: Arc<SchlierenGeometry>,
    radon: CsrMatrix,
    poisson: PoissonSolveConfig,
}

impl SchlierenOperator {
    pub fn new(geometry: Arc<SchlierenGeometry>, phi: f64, poisson: PoissonSolveConfig) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::NonFinite("schlieren direction"));
        }
        poisson.validate()?;
        let mut triplets = Vec::new();
        for (j, &s) in geometry.offsets().iter().enumerate() {
            triplets.extend(geometry.line_weights(phi, s).into_iter().map(|(k, w)| (j, k, w)));
        }
        let radon = CsrMatrix::from_triplets(geometry.offsets().len(), geometry.n * geometry.n, &triplets)?;
        Ok(Self { phi, geometry, radon, poisson })
    }

    /// `count` operators with `φ_i = 2π i / count`, `i = 0, …, count − 1`.
    pub fn equally_spaced(geometry: &Arc<SchlierenGeometry>, count: usize, poisson: PoissonSolveConfig) -> Result<Vec<Self>> {
        if count == 0 {
            return Err(Error::invalid("at least one schlieren direction is required"));
        }
        (0..count)
            .map(|i| Self::new(Arc::clone(geometry), 2.0 * std::f64::consts::PI * i as f64 / count as f64, poisson))
            .collect()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn direction(&self) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        (c, s)
    }

    pub fn geometry(&self) -> &Arc<SchlierenGeometry> {
        &self.geometry
    }

    /// The assembled quadrature matrix `R` (detectors × nodes).
    pub fn radon_matrix(&self) -> &CsrMatrix {
        &self.radon
    }

    pub fn radon(&self, f: &[f64]) -> Result<Vector> {
        self.radon.apply(f)
    }

    /// `R* v = h⁻² Rᵀ(ω ⊙ v)`, before the `H¹` Riesz map.
    pub fn back_project(&self, v: &[f64]) -> Result<Vector> {
        Error::check_dim(self.radon.rows(), v.len())?;
        let mut out = vec![0.0; self.radon.cols()];
        self.back_project_accumulate(v, 1.0, &mut out);
        Ok(Vector::from_raw(out))
    }

    fn back_project_accumulate(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        let s = scale / (self.geometry.h * self.geometry.h);
        let w = &self.geometry.weights;
        for (j, vj) in v.iter().enumerate() {
            let coeff = s * w[j] * vj;
            if coeff == 0.0 {
                continue;
            }
            let (cols, vals) = self.radon.row(j);
            for (c, a) in cols.iter().zip(vals) {
                out[*c] += coeff * a;
            }
        }
    }

    fn adjoint_source(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.radon.rows(), g.len())?;
        let rf = self.radon(f)?;
        Ok(rf.iter().zip(g).map(|(a, b)| 2.0 * a * b).collect())
    }
}

impl ForwardOperator for SchlierenOperator {
    fn in_dim(&self) -> usize {
        self.radon.cols()
    }

    fn out_dim(&self) -> usize {
        self.radon.rows()
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn apply(&self, x: &[f64]) -> Result<Vector> {
        let mut rf = self.radon(x)?.into_inner();
        for v in &mut rf {
            *v *= *v;
        }
        Ok(Vector::from_raw(rf))
    }

    fn derivative_apply(&self, x: &[f64], h: &[f64]) -> Result<Vector> {
        let rf = self.radon(x)?;
        let rh = self.radon(h)?;
        Ok(Vector::from_raw(rf.iter().zip(rh.iter()).map(|(a, b)| 2.0 * a * b).collect()))
    }

    fn derivative_adjoint(&self, x: &[f64], g: &[f64]) -> Result<DualVector> {
        let src = self.adjoint_source(x, g)?;
        let w = self.back_project(&src)?;
        Ok(poisson_solve(&w, &self.poisson)?.to_dual())
    }

    fn data_weights(&self) -> Option<Arc<[f64]>> {
        Some(Arc::clone(&self.geometry.weights))
    }

    fn riesz_map(&self) -> Option<RieszMap> {
        Some(RieszMap::Helmholtz { cfg: self.poisson })
    }

    fn derivative_adjoint_source_accumulate(
        &self,
        x: &[f64],
        g: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        Error::check_dim(self.in_dim(), out.len())?;
        let src = self.adjoint_source(x, g)?;
        self.back_project_accumulate(&src, scale, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, phi: f64) -> SchlierenOperator {
        let geo = Arc::new(SchlierenGeometry::new(n).unwrap());
        SchlierenOperator::new(geo, phi, PoissonSolveConfig::default()).unwrap()
    }

    fn pseudo(len: usize, salt: u64) -> Vec<f64> {
        (0..len as u64).map(|k| (((k * 2654435761 + salt * 97) % 1000) as f64) / 500.0 - 1.0).collect()
    }

    #[test]
    fn geometry_covers_detector_range() {
        let geo = SchlierenGeometry::new(32).unwrap();
        assert_eq!(geo.offsets().len(), 48);
        assert_eq!(geo.offsets()[0], -SQRT_2);
        assert!((geo.offsets()[47] - SQRT_2).abs() < 1e-15);
        let total: f64 = geo.weights().iter().sum();
        assert!((total - 2.0 * SQRT_2).abs() < 1e-12);
        let op = setup(8, 0.7);
        let (c, s) = op.direction();
        assert!((c * c + s * s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chord_of_indicator_through_centre() {
        let geo = SchlierenGeometry::new(32).unwrap();
        let ones = vec![1.0; 32 * 32];
        let v = geo.line_integral(&ones, 0.0, 0.0).unwrap();
        assert!((v - 2.0).abs() <= 2.0 * geo.spacing(), "{v}");
        let diag = geo.line_integral(&ones, std::f64::consts::FRAC_PI_4, 0.0).unwrap();
        assert!((diag - 2.0 * SQRT_2).abs() <= 2.0 * geo.spacing(), "{diag}");
    }

    #[test]
    fn radon_is_linear_and_apply_is_quadratic() {
        let op = setup(16, 1.1);
        let f = pseudo(256, 1);
        let g = pseudo(256, 2);
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let (rf, rg, rs) = (op.radon(&f).unwrap(), op.radon(&g).unwrap(), op.radon(&sum).unwrap());
        for j in 0..rf.len() {
            assert!((rs[j] - rf[j] - rg[j]).abs() <= 1e-12 * (1.0 + rs[j].abs()));
        }
        let scaled: Vec<f64> = f.iter().map(|v| -3.0 * v).collect();
        let (a, b) = (op.apply(&f).unwrap(), op.apply(&scaled).unwrap());
        for j in 0..a.len() {
            assert!((b[j] - 9.0 * a[j]).abs() <= 1e-12 * (1.0 + b[j].abs()));
        }
        let d = op.derivative_apply(&f, &f).unwrap();
        for j in 0..a.len() {
            assert!((d[j] - 2.0 * a[j]).abs() <= 1e-12 * (1.0 + d[j].abs()));
        }
    }

    #[test]
    fn zero_inputs() {
        let op = setup(10, 0.3);
        assert!(op.apply(&[0.0; 100]).unwrap().iter().all(|v| *v == 0.0));
        let f = pseudo(100, 3);
        assert!(op.derivative_apply(&f, &[0.0; 100]).unwrap().iter().all(|v| *v == 0.0));
        let zero_g = vec![0.0; op.out_dim()];
        assert!(op.derivative_adjoint(&f, &zero_g).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn back_projection_is_weighted_transpose() {
        let op = setup(12, 2.0);
        let geo = op.geometry();
        let f = pseudo(144, 4);
        let v = pseudo(op.out_dim(), 5);
        let rf = op.radon(&f).unwrap();
        let lhs: f64 = rf.iter().zip(&v).zip(geo.weights().iter()).map(|((a, b), w)| a * b * w).sum();
        let rhs = geo.l2_inner(&f, &op.back_project(&v).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn derivative_adjoint_in_h1() {
        let op = setup(16, 0.4);
        let geo = op.geometry();
        let f = pseudo(256, 6);
        let h = pseudo(256, 7);
        let g = pseudo(op.out_dim(), 8);
        let fh = op.derivative_apply(&f, &h).unwrap();
        let lhs: f64 = fh.iter().zip(&g).zip(geo.weights().iter()).map(|((a, b), w)| a * b * w).sum();
        let adj = op.derivative_adjoint(&f, &g).unwrap();
        let rhs = geo.h1_inner(&h, &adj).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn source_accumulation_matches_adjoint() {
        let op = setup(10, 5.0);
        let f = pseudo(100, 9);
        let g = pseudo(op.out_dim(), 10);
        let mut src = vec![0.0; 100];
        op.derivative_adjoint_source_accumulate(&f, &g, 1.0, &mut src).unwrap();
        let via_source = poisson_solve(&src, &PoissonSolveConfig::default()).unwrap();
        let direct = op.derivative_adjoint(&f, &g).unwrap();
        for (a, b) in via_source.iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
