//! Conditional mutual information between embeddings and factor labels.
//!
//! The quantity of interest is the permutation-debiased conditional MI
//!
//! ```text
//! Corr_MI(X; Y | Z) = I(X; Y | Z) - E_perm[ I(X; Y_perm | Z) ]
//! I(X; Y | Z)       = H(Y | Z) - H(Y | X, Z)
//! ```
//!
//! where `Y_perm` permutes the target labels within each conditioning
//! stratum. `H(Y|Z)` is estimated from smoothed within-stratum class
//! frequencies. `H(Y|X,Z)` is the cross-validated cross-entropy of a
//! k-nearest-neighbor class-probability model evaluated in a PCA-reduced
//! embedding space; the same fitted neighbor structure is reused for every
//! permutation, so the baseline measures exactly the score the raw estimate
//! would get if `X` carried no information about `Y` within strata. Raw
//! values are small-sample biased; corrected values are approximately zero
//! under conditional independence and are deliberately not clamped at zero.
//!
//! Estimates are reported in bits.

mod estimator;

use ndarray::ArrayView2;
use thiserror::Error;

use crate::corpus::{EmbeddingCorpus, Factor};
use estimator::{PreparedStrata, StratifiedKnn};

/// Hyper-parameters of the conditional MI estimator.
///
/// `seed` drives only the permutation baseline: raw estimates are seed-free.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MiConfig {
    /// Dimension of the PCA reduction applied to `X` before neighbor search.
    pub reduce_dim: usize,
    /// Neighbor count of the class-probability model. Cross-entropy of a
    /// count-based model carries a null bias of roughly `0.72 * (1-p) / (k p)`
    /// bits for class probability `p`, so `k` must stay large enough for the
    /// calibration contract (within 0.05 bits of zero under independence).
    pub k: usize,
    /// Cross-validation folds; strata smaller than this are dropped.
    pub folds: usize,
    /// Number of within-stratum label permutations in the baseline.
    pub permutations: usize,
    /// Total Dirichlet smoothing mass, spread uniformly over classes: a
    /// neighborhood with `m` hits out of `k` scores `(m + alpha/C) / (k + alpha)`.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MiConfig {
    fn default() -> Self {
        MiConfig {
            reduce_dim: 32,
            k: 64,
            folds: 5,
            permutations: 20,
            alpha: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum MiError {
    #[error("invalid estimator config: {0}")]
    Config(String),
    #[error("input lengths disagree: x has {x} rows, y has {y}, z has {z}")]
    LengthMismatch { x: usize, y: usize, z: usize },
    #[error("empty input")]
    Empty,
    #[error("all {0} strata are smaller than the fold count and were dropped")]
    AllStrataDropped(usize),
    #[error("histogram has no mass")]
    EmptyHistogram,
    #[error("conditioning set contains the target factor {0:?}")]
    TargetInConditioning(&'static str),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// Plug-in Shannon entropy of a histogram, in bits.
///
/// Zero-count classes contribute nothing; an all-zero histogram is an error.
pub fn plugin_entropy(counts: &[u64]) -> Result<f64, MiError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MiError::EmptyHistogram);
    }
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// A raw conditional MI estimate plus the stratum bookkeeping behind it.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CmiEstimate {
    /// `H(Y|Z) - H(Y|X,Z)` in bits; may be slightly negative.
    pub bits: f64,
    /// Strata dropped for having fewer members than `folds`.
    pub dropped_strata: usize,
    /// Samples inside dropped strata.
    pub dropped_samples: usize,
}

/// A debiased conditional MI estimate.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrectedMi {
    pub raw_bits: f64,
    /// Mean of `I(X; Y_perm | Z)` over the permutation baseline.
    pub perm_mean_bits: f64,
    /// Population standard deviation of the baseline estimates.
    pub perm_std_bits: f64,
    /// `raw_bits - perm_mean_bits`; not clamped at zero.
    pub corrected_bits: f64,
    pub dropped_strata: usize,
    pub dropped_samples: usize,
}

/// Estimates `I(X; Y | Z)` in bits.
///
/// `x` is an `N x D` embedding matrix, `y` integer class labels, `z` integer
/// stratum ids (a constant `z` means unconditional MI). The estimate is
/// deterministic and independent of `cfg.seed`.
pub fn conditional_mi(
    x: ArrayView2<'_, f64>,
    y: &[u32],
    z: &[u64],
    cfg: &MiConfig,
) -> Result<CmiEstimate, MiError> {
    validate_inputs(x, y, z, cfg)?;
    let strata = PreparedStrata::build(z, cfg.folds)?;
    let classes = class_count(y);
    if strata.single_class(y) {
        return Ok(CmiEstimate {
            bits: 0.0,
            dropped_strata: strata.dropped_strata,
            dropped_samples: strata.dropped_samples,
        });
    }
    let knn = StratifiedKnn::fit(x, &strata, cfg);
    let h_y_given_z = strata.smoothed_conditional_entropy(y, classes, cfg.alpha);
    let h_y_given_xz = knn.cross_entropy(y, classes, cfg.alpha);
    Ok(CmiEstimate {
        bits: h_y_given_z - h_y_given_xz,
        dropped_strata: strata.dropped_strata,
        dropped_samples: strata.dropped_samples,
    })
}

/// Estimates the permutation-debiased `Corr_MI(X; Y | Z)` in bits.
///
/// The baseline permutes `y` within each stratum `cfg.permutations` times
/// with seeds derived from `(cfg.seed, "mi-perm", index)` and re-scores the
/// fitted neighbor model. `H(Y|Z)` is invariant under within-stratum
/// permutation, so the corrected value equals
/// `mean(cross-entropy of permuted labels) - cross-entropy of true labels`.
pub fn corrected_mi(
    x: ArrayView2<'_, f64>,
    y: &[u32],
    z: &[u64],
    cfg: &MiConfig,
) -> Result<CorrectedMi, MiError> {
    validate_inputs(x, y, z, cfg)?;
    if cfg.permutations == 0 {
        return Err(MiError::Config(
            "permutation baseline needs at least one permutation".into(),
        ));
    }
    let strata = PreparedStrata::build(z, cfg.folds)?;
    let classes = class_count(y);
    if strata.single_class(y) {
        return Ok(CorrectedMi {
            raw_bits: 0.0,
            perm_mean_bits: 0.0,
            perm_std_bits: 0.0,
            corrected_bits: 0.0,
            dropped_strata: strata.dropped_strata,
            dropped_samples: strata.dropped_samples,
        });
    }
    let knn = StratifiedKnn::fit(x, &strata, cfg);
    let h_y_given_z = strata.smoothed_conditional_entropy(y, classes, cfg.alpha);
    let raw_ce = knn.cross_entropy(y, classes, cfg.alpha);
    let raw_bits = h_y_given_z - raw_ce;

    let mut perm_bits = Vec::with_capacity(cfg.permutations);
    let mut permuted = y.to_vec();
    for p in 0..cfg.permutations {
        strata.permute_within(y, &mut permuted, cfg.seed, p as u64);
        let ce = knn.cross_entropy(&permuted, classes, cfg.alpha);
        perm_bits.push(h_y_given_z - ce);
    }
    let perm_mean = perm_bits.iter().sum::<f64>() / perm_bits.len() as f64;
    let perm_var = perm_bits
        .iter()
        .map(|b| (b - perm_mean).powi(2))
        .sum::<f64>()
        / perm_bits.len() as f64;
    Ok(CorrectedMi {
        raw_bits,
        perm_mean_bits: perm_mean,
        perm_std_bits: perm_var.sqrt(),
        corrected_bits: raw_bits - perm_mean,
        dropped_strata: strata.dropped_strata,
        dropped_samples: strata.dropped_samples,
    })
}

/// One layer's debiased MI within a profile.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerMi {
    pub layer: usize,
    #[serde(flatten)]
    pub mi: CorrectedMi,
}

/// Per-layer debiased MI between a corpus factor and every layer's
/// embeddings, conditioned on a set of other factors.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MiProfile {
    pub target: String,
    pub conditioning: Vec<String>,
    pub config: MiConfig,
    pub layers: Vec<LayerMi>,
}

impl MiProfile {
    /// Layer index with maximal corrected MI.
    #[must_use]
    pub fn argmax_layer(&self) -> usize {
        self.layers
            .iter()
            .max_by(|a, b| {
                a.mi.corrected_bits
                    .total_cmp(&b.mi.corrected_bits)
                    .then(b.layer.cmp(&a.layer))
            })
            .map(|l| l.layer)
            .expect("profile has at least one layer")
    }
}

/// Computes the corrected MI profile of `target` across all corpus layers,
/// conditioning on the joint strata of `conditioning`.
///
/// The conditioning set must not contain the target. Stratum ids are the
/// mixed-radix encoding of the conditioning labels, identical for every
/// layer, so the dropped-stratum bookkeeping is shared.
pub fn layer_mi_profile(
    corpus: &EmbeddingCorpus,
    target: Factor,
    conditioning: &[Factor],
    cfg: &MiConfig,
) -> Result<MiProfile, MiError> {
    if conditioning.contains(&target) {
        return Err(MiError::TargetInConditioning(target.name()));
    }
    let y = corpus.labels().values(target);
    let z = conditioning_strata(corpus, conditioning);

    use rayon::prelude::*;
    let per_layer: Result<Vec<CorrectedMi>, MiError> = (0..corpus.layers())
        .into_par_iter()
        .map(|layer| {
            let x32 = corpus.layer_matrix(layer)?;
            let x = x32.mapv(f64::from);
            corrected_mi(x.view(), y, &z, cfg)
        })
        .collect();
    let per_layer = per_layer?;
    Ok(MiProfile {
        target: target.name().to_string(),
        conditioning: conditioning.iter().map(|f| f.name().to_string()).collect(),
        config: cfg.clone(),
        layers: per_layer
            .into_iter()
            .enumerate()
            .map(|(layer, mi)| LayerMi { layer, mi })
            .collect(),
    })
}

/// Mixed-radix joint stratum ids for a conditioning set; empty set gives a
/// single stratum.
fn conditioning_strata(corpus: &EmbeddingCorpus, conditioning: &[Factor]) -> Vec<u64> {
    let n = corpus.n();
    let mut z = vec![0u64; n];
    let mut radix = 1u64;
    let mut factors: Vec<Factor> = conditioning.to_vec();
    factors.sort(); // canonical order makes ids independent of argument order
    factors.dedup();
    for factor in factors {
        let column = corpus.labels().values(factor);
        let levels = corpus
            .labels()
            .class_count(factor)
            .max(column.iter().map(|&v| v as usize + 1).max().unwrap_or(1))
            as u64;
        for (zi, &v) in z.iter_mut().zip(column.iter()) {
            *zi += radix * u64::from(v);
        }
        radix *= levels;
    }
    z
}

fn class_count(y: &[u32]) -> usize {
    y.iter().map(|&v| v as usize + 1).max().unwrap_or(0)
}

fn validate_inputs(
    x: ArrayView2<'_, f64>,
    y: &[u32],
    z: &[u64],
    cfg: &MiConfig,
) -> Result<(), MiError> {
    if cfg.reduce_dim == 0 || cfg.k == 0 {
        return Err(MiError::Config(
            "reduce_dim and k must be positive".into(),
        ));
    }
    if cfg.folds < 2 {
        return Err(MiError::Config("need at least 2 folds".into()));
    }
    if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
        return Err(MiError::Config("alpha must be finite and > 0".into()));
    }
    if x.nrows() == 0 {
        return Err(MiError::Empty);
    }
    if x.nrows() != y.len() || y.len() != z.len() {
        return Err(MiError::LengthMismatch {
            x: x.nrows(),
            y: y.len(),
            z: z.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
