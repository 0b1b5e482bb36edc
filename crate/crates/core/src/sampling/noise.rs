//! Synthetic data corruption with per-equation noise-level bookkeeping.
//!
//! Each equation `i` has exact data `y_i`. Gaussian and uniform noise add
//! `δ_rel ‖y_i‖₂ ε_i` with `ε_i` standard normal or uniform on `[−1, 1]`
//! (componentwise), so the intended level is `δ_rel ‖y_i‖₂`. Salt-and-pepper
//! noise replaces each scalar datum by the global maximum with probability
//! `κ/2`, by the global minimum with probability `κ/2`, and keeps it
//! otherwise; it has no intended level, only a realized one.
//!
//! Randomness for equation `i` comes from the stream
//! `CounterRng::new(mix64(seed ^ NOISE_DOMAIN), i)`, independent of the
//! index sampler's streams.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sampling::rng::{mix64, CounterRng};
use crate::spaces::{check_exponent, lr_norm_unchecked, Vector};

const NOISE_DOMAIN: u64 = 0x6E6F_6973_655F_7631;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { delta_rel: f64 },
    Uniform { delta_rel: f64 },
    SaltPepper { kappa: f64 },
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Uniform { .. } => "uniform",
            NoiseModel::SaltPepper { .. } => "salt-pepper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    /// Exponent of the norm in which realized levels `δ_i` are measured.
    pub r: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.r)?;
        match self.model {
            NoiseModel::Gaussian { delta_rel } | NoiseModel::Uniform { delta_rel } => {
                if !(delta_rel >= 0.0 && delta_rel.is_finite()) {
                    return Err(Error::invalid(format!("delta_rel must be >= 0, got {delta_rel}")));
                }
            }
            NoiseModel::SaltPepper { kappa } => {
                if !(0.0..=1.0).contains(&kappa) {
                    return Err(Error::invalid(format!("kappa must lie in [0, 1], got {kappa}")));
                }
            }
        }
        Ok(())
    }
}

/// Which per-equation level drives discrepancy gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLevelSource {
    /// `δ_rel ‖y_i‖₂` where defined, the realized level otherwise.
    #[default]
    APriori,
    /// `‖y_i^δ − y_i‖_r`.
    Realized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    exact: Vec<Vector>,
    noisy: Vec<Vector>,
    delta_apriori: Option<Vec<f64>>,
    delta_realized: Vec<f64>,
    r: f64,
    weights: Option<Arc<[f64]>>,
}

impl NoisyDataset {
    pub fn exact(&self) -> &[Vector] {
        &self.exact
    }

    pub fn noisy(&self) -> &[Vector] {
        &self.noisy
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn delta_apriori(&self) -> Option<&[f64]> {
        self.delta_apriori.as_deref()
    }

    pub fn delta_realized(&self) -> &[f64] {
        &self.delta_realized
    }

    pub fn levels(&self, source: NoiseLevelSource) -> &[f64] {
        match (source, &self.delta_apriori) {
            (NoiseLevelSource::APriori, Some(d)) => d,
            _ => &self.delta_realized,
        }
    }

    /// `(Σ δ_i^r)^{1/r}`.
    pub fn total_level(&self, source: NoiseLevelSource) -> f64 {
        self.levels(source).iter().map(|d| d.powf(self.r)).sum::<f64>().powf(1.0 / self.r)
    }

    /// Recomputes `‖y_i^δ − y_i‖_r` from the stored data.
    pub fn recompute_realized(&self) -> Vec<f64> {
        self.exact
            .iter()
            .zip(&self.noisy)
            .map(|(e, y)| realized(e, y, self.weights.as_deref(), self.r))
            .collect()
    }
}

fn realized(exact: &[f64], noisy: &[f64], weights: Option<&[f64]>, r: f64) -> f64 {
    let diff: Vec<f64> = noisy.iter().zip(exact).map(|(a, b)| a - b).collect();
    lr_norm_unchecked(&diff, weights, r)
}

/// Corrupts `exact` per `spec`. `weights`, when given, are the quadrature
/// weights of every equation's data space and enter all norms.
pub fn apply_noise(spec: &NoiseSpec, exact: &[Vector], weights: Option<Arc<[f64]>>) -> Result<NoisyDataset> {
    spec.validate()?;
    if exact.is_empty() || exact.iter().all(|y| y.is_empty()) {
        return Err(Error::invalid("cannot add noise to an empty dataset"));
    }
    if exact.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("exact data"));
    }
    if let Some(w) = &weights {
        for y in exact {
            Error::check_dim(w.len(), y.len())?;
        }
    }
    let w = weights.as_deref();
    let key = mix64(spec.seed ^ NOISE_DOMAIN);
    let mut noisy = Vec::with_capacity(exact.len());
    let mut apriori = Vec::with_capacity(exact.len());

    let (y_min, y_max) = exact
        .iter()
        .flat_map(|y| y.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));

    for (i, y) in exact.iter().enumerate() {
        let mut rng = CounterRng::new(key, i as u64);
        let out: Vec<f64> = match spec.model {
            NoiseModel::Gaussian { delta_rel } => {
                let level = delta_rel * lr_norm_unchecked(y, w, 2.0);
                apriori.push(level);
                y.iter().map(|v| v + level * rng.normal()).collect()
            }
            NoiseModel::Uniform { delta_rel } => {
                let level = delta_rel * lr_norm_unchecked(y, w, 2.0);
                apriori.push(level);
                y.iter().map(|v| v + level * rng.uniform_in(-1.0, 1.0)).collect()
            }
            NoiseModel::SaltPepper { kappa } => y
                .iter()
                .map(|v| {
                    let u = rng.uniform();
                    if u < 0.5 * kappa {
                        y_max
                    } else if u < kappa {
                        y_min
                    } else {
                        *v
                    }
                })
                .collect(),
        };
        noisy.push(Vector::from_raw(out));
    }
    let delta_apriori = match spec.model {
        NoiseModel::SaltPepper { .. } => None,
        _ => Some(apriori),
    };
    let mut ds = NoisyDataset {
        exact: exact.to_vec(),
        noisy,
        delta_apriori,
        delta_realized: Vec::new(),
        r: spec.r,
        weights,
    };
    ds.delta_realized = ds.recompute_realized();
    Ok(ds)
}
