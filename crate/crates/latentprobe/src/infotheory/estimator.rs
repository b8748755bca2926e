//! Stratified cross-validated neighbor model behind the MI estimator.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use super::{MiConfig, MiError};
use crate::linalg::fit_pca;
use crate::seeding::task_rng;

/// Conditioning strata that survived the minimum-size filter.
///
/// Stratum order is ascending by stratum id and member lists keep the input
/// sample order, so everything downstream is deterministic.
pub(super) struct PreparedStrata {
    strata: Vec<Vec<u32>>,
    pub(super) dropped_strata: usize,
    pub(super) dropped_samples: usize,
    included: usize,
    folds: usize,
}

impl PreparedStrata {
    pub(super) fn build(z: &[u64], folds: usize) -> Result<Self, MiError> {
        let mut groups: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for (i, &zi) in z.iter().enumerate() {
            groups.entry(zi).or_default().push(i as u32);
        }
        let total_strata = groups.len();
        let mut strata = Vec::new();
        let mut dropped_samples = 0;
        for (_, members) in groups {
            if members.len() < folds {
                dropped_samples += members.len();
            } else {
                strata.push(members);
            }
        }
        if strata.is_empty() {
            return Err(MiError::AllStrataDropped(total_strata));
        }
        let included = strata.iter().map(Vec::len).sum();
        Ok(PreparedStrata {
            dropped_strata: total_strata - strata.len(),
            strata,
            dropped_samples,
            included,
            folds,
        })
    }

    /// True when the included samples carry only one distinct label.
    pub(super) fn single_class(&self, y: &[u32]) -> bool {
        let mut first = None;
        for members in &self.strata {
            for &i in members {
                let label = y[i as usize];
                match first {
                    None => first = Some(label),
                    Some(f) if f != label => return false,
                    Some(_) => {}
                }
            }
        }
        true
    }

    /// `H(Y|Z)` in bits from smoothed within-stratum class frequencies,
    /// weighted by stratum size. The smoothed distribution spreads `alpha`
    /// mass over all `classes` labels, so it sums to one by construction.
    pub(super) fn smoothed_conditional_entropy(
        &self,
        y: &[u32],
        classes: usize,
        alpha: f64,
    ) -> f64 {
        let mut weighted = 0.0;
        let mut counts = vec![0u64; classes];
        for members in &self.strata {
            counts.iter_mut().for_each(|c| *c = 0);
            for &i in members {
                counts[y[i as usize] as usize] += 1;
            }
            let n_z = members.len() as f64;
            let mut h = 0.0;
            for &c in &counts {
                let p = (c as f64 + alpha / classes as f64) / (n_z + alpha);
                h -= p * p.log2();
            }
            weighted += n_z / self.included as f64 * h;
        }
        weighted
    }

    /// Writes into `out` a copy of `y` with labels shuffled independently
    /// within each stratum; samples in dropped strata keep their labels.
    pub(super) fn permute_within(&self, y: &[u32], out: &mut [u32], seed: u64, index: u64) {
        out.copy_from_slice(y);
        let mut rng = task_rng(seed, "mi-perm", index);
        let mut scratch = Vec::new();
        for members in &self.strata {
            scratch.clear();
            scratch.extend(members.iter().map(|&i| y[i as usize]));
            scratch.shuffle(&mut rng);
            for (&i, &label) in members.iter().zip(scratch.iter()) {
                out[i as usize] = label;
            }
        }
    }

    /// Round-robin fold of the j-th member of a stratum.
    fn fold_of(&self, position: usize) -> usize {
        position % self.folds
    }
}

/// Cross-validated neighbor lists, fitted once and re-scored per labeling.
///
/// Fitting is the expensive part (PCA projection plus one distance pass per
/// fold); scoring a labeling only counts label hits along the stored lists,
/// which is what lets the permutation baseline reuse the geometry.
pub(super) struct StratifiedKnn {
    /// Evaluation rows in deterministic (stratum, fold, member) order.
    rows: Vec<EvalRow>,
}

struct EvalRow {
    /// Global index of the held-out sample.
    sample: u32,
    /// Global indices of its nearest training neighbors.
    neighbors: Vec<u32>,
}

impl StratifiedKnn {
    pub(super) fn fit(x: ArrayView2<'_, f64>, strata: &PreparedStrata, cfg: &MiConfig) -> Self {
        let reduced = reduce(x, cfg.reduce_dim);
        let mut rows = Vec::with_capacity(strata.included);
        for members in &strata.strata {
            for fold in 0..strata.folds {
                let mut train: Vec<u32> = Vec::with_capacity(members.len());
                let mut val: Vec<u32> = Vec::new();
                for (j, &i) in members.iter().enumerate() {
                    if strata.fold_of(j) == fold {
                        val.push(i);
                    } else {
                        train.push(i);
                    }
                }
                debug_assert!(!train.is_empty(), "folds >= 2 and stratum >= folds");
                let k_eff = cfg.k.min(train.len());
                for &v in &val {
                    rows.push(EvalRow {
                        sample: v,
                        neighbors: nearest(&reduced, v, &train, k_eff),
                    });
                }
            }
        }
        StratifiedKnn { rows }
    }

    /// `H(Y|X,Z)` in bits: mean smoothed negative log-probability that the
    /// neighbor model assigns to each held-out sample's label.
    pub(super) fn cross_entropy(&self, y: &[u32], classes: usize, alpha: f64) -> f64 {
        let mut total = 0.0;
        for row in &self.rows {
            let label = y[row.sample as usize];
            let hits = row
                .neighbors
                .iter()
                .filter(|&&n| y[n as usize] == label)
                .count();
            let p = (hits as f64 + alpha / classes as f64)
                / (row.neighbors.len() as f64 + alpha);
            total -= p.log2();
        }
        total / self.rows.len() as f64
    }
}

/// PCA-projects `x` to at most `reduce_dim` dimensions (identity when the
/// input is already narrower).
fn reduce(x: ArrayView2<'_, f64>, reduce_dim: usize) -> Array2<f64> {
    if x.ncols() <= reduce_dim {
        return x.to_owned();
    }
    let pca = fit_pca(x, reduce_dim);
    pca.transform(x)
}

/// Indices of the `k_eff` training samples closest to `query`, ties broken
/// by ascending index so the neighbor set is a pure function of the data.
fn nearest(reduced: &Array2<f64>, query: u32, train: &[u32], k_eff: usize) -> Vec<u32> {
    let q = reduced.row(query as usize);
    let mut scored: Vec<(f64, u32)> = train
        .iter()
        .map(|&t| {
            let row = reduced.row(t as usize);
            let mut d = 0.0;
            for (a, b) in q.iter().zip(row.iter()) {
                let diff = a - b;
                d += diff * diff;
            }
            (d, t)
        })
        .collect();
    if k_eff < scored.len() {
        scored.select_nth_unstable_by(k_eff - 1, |a, b| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        });
        scored.truncate(k_eff);
    }
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, t)| t).collect()
}
