//! Finite-dimensional `ℓ^r` spaces: norms, duality mappings and conjugate
//! exponents.
//!
//! Solution iterates live in [`Vector`] and dual iterates (subgradients,
//! gradients of data-misfit terms) in [`DualVector`]. Both are dense
//! coordinate arrays whose entries are kept finite by every public
//! constructor.
//!
//! The duality mapping of `ℓ^r` with gauge `t ↦ t^{r-1}` is the gradient of
//! `y ↦ ‖y‖_r^r / r` and acts componentwise:
//!
//! ```text
//! J_r(y)_k = sign(y_k) |y_k|^{r-1}
//! ```
//!
//! It satisfies `⟨J_r(y), y⟩ = ‖y‖_r^r` and `‖J_r(y)‖_{r*} = ‖y‖_r^{r-1}`
//! where `r* = r / (r - 1)`. The same componentwise formula is the duality
//! mapping of a weighted space `(Σ ω_k |y_k|^r)^{1/r}` when pairings carry the
//! same weights, which is how quadrature-weighted data spaces are handled.

use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};

macro_rules! coordinate_array {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting NaN and infinite entries.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(Self(values))
                } else {
                    Err(Error::NonFinite($what))
                }
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn constant(len: usize, value: f64) -> Result<Self> {
                Self::new(vec![value; len])
            }

            /// Crate-internal constructor for values already known to be
            /// finite (or checked later by the caller).
            pub(crate) fn from_raw(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(values: Vec<f64>) -> Result<Self> {
                Self::new(values)
            }
        }
    };
}

coordinate_array!(Vector, "vector");
coordinate_array!(DualVector, "dual vector");

impl DualVector {
    /// Reinterprets the coordinates as a primal vector (identity Riesz map of
    /// the coefficient space).
    pub fn to_primal(&self) -> Vector {
        Vector(self.0.clone())
    }
}

impl Vector {
    pub fn to_dual(&self) -> DualVector {
        DualVector(self.0.clone())
    }
}

/// Euclidean inner product, accumulated left to right.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn abs_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(e)
    }
}

/// `(Σ |y_k|^r)^{1/r}` for `r ≥ 1`.
pub fn lr_norm(y: &[f64], r: f64) -> Result<f64> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::InvalidExponent(r));
    }
    if y.is_empty() {
        return Err(Error::invalid("norm of an empty vector"));
    }
    Ok(lr_norm_unchecked(y, None, r))
}

pub(crate) fn lr_norm_unchecked(y: &[f64], weights: Option<&[f64]>, r: f64) -> f64 {
    lr_sum_unchecked(y, weights, r).powf(1.0 / r)
}

/// `Σ ω_k |y_k|^r`, i.e. the `r`-th power of the norm.
pub(crate) fn lr_sum_unchecked(y: &[f64], weights: Option<&[f64]>, r: f64) -> f64 {
    let mut acc = 0.0;
    if r == 2.0 {
        match weights {
            None => y.iter().for_each(|v| acc += v * v),
            Some(w) => y.iter().zip(w).for_each(|(v, w)| acc += w * v * v),
        }
    } else {
        match weights {
            None => y.iter().for_each(|v| acc += abs_pow(*v, r)),
            Some(w) => y.iter().zip(w).for_each(|(v, w)| acc += w * abs_pow(*v, r)),
        }
    }
    acc
}

/// Componentwise duality mapping `J_r(y)_k = sign(y_k)|y_k|^{r-1}`.
///
/// `J_r(0) = 0`. For `r = 2` the map is the identity.
pub fn duality_map(y: &[f64], r: f64) -> Result<DualVector> {
    check_exponent(r)?;
    let mut out = vec![0.0; y.len()];
    duality_map_into(y, r, &mut out);
    Ok(DualVector(out))
}

pub(crate) fn duality_map_into(y: &[f64], r: f64, out: &mut [f64]) {
    if r == 2.0 {
        out.copy_from_slice(y);
        return;
    }
    let e = r - 1.0;
    for (o, &v) in out.iter_mut().zip(y) {
        *o = if v == 0.0 { 0.0 } else { v.signum() * v.abs().powf(e) };
    }
}

/// The conjugate exponent `p / (p - 1)`.
pub fn conj_exponent(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(p / (p - 1.0))
}

pub(crate) fn check_exponent(r: f64) -> Result<()> {
    if r > 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(r))
    }
}

/// A data space `Y_i = (ℝ^dim, ‖·‖_r)`, optionally with positive quadrature
/// weights so that the norm approximates an `L^r` integral.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpaceSpec {
    r: f64,
    dim: usize,
    weights: Option<Arc<[f64]>>,
}

impl DataSpaceSpec {
    pub fn new(r: f64, dim: usize) -> Result<Self> {
        check_exponent(r)?;
        if dim == 0 {
            return Err(Error::invalid("data space dimension must be positive"));
        }
        Ok(Self { r, dim, weights: None })
    }

    /// Weighted space. Weights must be positive and finite.
    pub fn weighted(r: f64, weights: Arc<[f64]>) -> Result<Self> {
        let mut spec = Self::new(r, weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("quadrature weights must be positive"));
        }
        spec.weights = Some(weights);
        Ok(spec)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Same space geometry with a different exponent.
    pub fn with_exponent(&self, r: f64) -> Result<Self> {
        check_exponent(r)?;
        Ok(Self { r, ..self.clone() })
    }

    pub fn norm(&self, y: &[f64]) -> f64 {
        lr_norm_unchecked(y, self.weights(), self.r)
    }

    /// `‖y‖^r`.
    pub fn norm_pow(&self, y: &[f64]) -> f64 {
        lr_sum_unchecked(y, self.weights(), self.r)
    }

    /// Weighted pairing `Σ ω_k a_k b_k` between the space and its dual.
    pub fn pairing(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.weights() {
            None => dot(a, b),
            Some(w) => {
                let mut acc = 0.0;
                for ((x, y), w) in a.iter().zip(b).zip(w) {
                    acc += w * x * y;
                }
                acc
            }
        }
    }

    pub fn duality_map(&self, y: &[f64]) -> Result<DualVector> {
        Error::check_dim(self.dim, y.len())?;
        duality_map(y, self.r)
    }
}
