//! Supervised linear probes for ordinal factor structure.
//!
//! Two main instruments live here. `fit_gloss_axis` trains a
//! cross-validated ridge regression from one layer's embeddings onto the
//! gloss level and reports held-out MSE and rank correlation; projecting
//! onto the fitted axis gives the one-dimensional "gloss coordinate" of a
//! sample. `layer_unique_importance` quantifies how much predictive power
//! each layer contributes that no other layer can replace: a layer's block
//! of the concatenated features is permuted across training samples, the
//! model is refit, and the drop in held-out R-squared is the layer's unique
//! contribution. Refitting (rather than just corrupting the block at test
//! time) is what makes redundant layers score near zero: the refit model is
//! free to recover the same signal from an unpermuted copy.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::corpus::{CorpusError, EmbeddingCorpus, Factor};
use crate::linalg::cholesky_solve;
use crate::seeding::task_rng;

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Debug, Error)]
pub enum AxisError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("lambda must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("normal equations are singular; increase lambda")]
    Singular,
    #[error("target is constant, nothing to fit")]
    ConstantTarget,
    #[error("rank correlation is undefined for a constant input")]
    DegenerateRanks,
    #[error("fold count {folds} invalid for {n} samples")]
    BadFolds { folds: usize, n: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("target {0} is neither ordinal nor two-class")]
    TargetNotBinarizable(&'static str),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A fitted ridge regression in the feature space it was trained on.
#[derive(Clone, Debug)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    #[must_use]
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// Minimizes `||y - Xw - b||^2 + lambda * ||w||^2` with an unpenalized
/// intercept.
///
/// Centering both sides makes the intercept drop out of the normal
/// equations, so `w` solves `(Xc' Xc + lambda I) w = Xc' yc` and
/// `b = mean(y) - w . mean(x)`. When the matrix is wider than tall the
/// dual form `(Xc Xc' + lambda I) a = yc, w = Xc' a` gives the same
/// minimizer at the smaller system size.
pub fn ridge_fit(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<RidgeModel, AxisError> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(AxisError::TooFewSamples { got: n, need: 2 });
    }
    if y.len() != n {
        return Err(AxisError::ShapeMismatch(format!(
            "{n} feature rows but {} targets",
            y.len()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(AxisError::BadLambda(lambda));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(AxisError::NonFinite);
    }

    let x_mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let y_mean = y.mean().expect("n >= 2");
    let xc = &x - &x_mean.view().insert_axis(Axis(0));
    let yc = &y - y_mean;

    let weights = if p <= n {
        let mut a = xc.t().dot(&xc);
        for i in 0..p {
            a[[i, i]] += lambda;
        }
        let c = xc.t().dot(&yc);
        cholesky_solve(&a, &c).ok_or(AxisError::Singular)?
    } else {
        let mut g = xc.dot(&xc.t());
        for i in 0..n {
            g[[i, i]] += lambda;
        }
        let alpha = cholesky_solve(&g, &yc).ok_or(AxisError::Singular)?;
        xc.t().dot(&alpha)
    };
    let intercept = y_mean - weights.dot(&x_mean);
    Ok(RidgeModel { weights, intercept })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, AxisError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(AxisError::DegenerateRanks);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
///
/// Constant inputs have no rank ordering and are an explicit error rather
/// than a NaN.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, AxisError> {
    if a.len() != b.len() {
        return Err(AxisError::ShapeMismatch(format!(
            "{} vs {} values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(AxisError::TooFewSamples { got: a.len(), need: 2 });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(AxisError::NonFinite);
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Coefficient of determination `1 - SSE/SST`; requires a non-constant
/// ground truth.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, AxisError> {
    if y_true.len() != y_pred.len() {
        return Err(AxisError::ShapeMismatch(format!(
            "{} vs {} values",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(AxisError::TooFewSamples {
            got: y_true.len(),
            need: 2,
        });
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(AxisError::ConstantTarget);
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - sse / sst)
}

/// A cross-validated linear axis predicting gloss from one layer.
///
/// `weights` and `intercept` act on standardized features; `project`
/// applies the stored standardization first, so callers pass raw
/// embeddings.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct GlossAxisModel {
    pub layer: usize,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub cv_mse_mean: f64,
    pub cv_mse_std: f64,
    pub spearman_rho: f64,
    /// Validation fold of each sample during fitting; bookkeeping only.
    #[serde(skip)]
    pub fold_assignment: Vec<u32>,
}

/// Equality covers the persisted fields only; `fold_assignment` is
/// bookkeeping that serialization drops, so it must not distinguish models.
impl PartialEq for GlossAxisModel {
    fn eq(&self, other: &Self) -> bool {
        self.layer == other.layer
            && self.lambda == other.lambda
            && self.weights == other.weights
            && self.intercept == other.intercept
            && self.feature_mean == other.feature_mean
            && self.feature_scale == other.feature_scale
            && self.cv_mse_mean == other.cv_mse_mean
            && self.cv_mse_std == other.cv_mse_std
            && self.spearman_rho == other.spearman_rho
    }
}

impl GlossAxisModel {
    /// Projects rows of `x` onto the gloss axis.
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, AxisError> {
        if x.ncols() != self.weights.len() {
            return Err(AxisError::ShapeMismatch(format!(
                "model expects {} columns, got {}",
                self.weights.len(),
                x.ncols()
            )));
        }
        let mut out = Array1::zeros(x.nrows());
        for (i, row) in x.outer_iter().enumerate() {
            let mut acc = self.intercept;
            for j in 0..row.len() {
                acc += (row[j] - self.feature_mean[j]) / self.feature_scale[j] * self.weights[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// Per-column mean and population standard deviation over selected rows;
/// zero-variance columns get scale 1 so standardization stays finite.
fn subset_standardization(x: ArrayView2<'_, f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = x.ncols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for &r in rows {
        let row = x.row(r);
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for &r in rows {
        let row = x.row(r);
        for (j, s) in var.iter_mut().enumerate() {
            let d = row[j] - mean[j];
            *s += d * d;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, scale)
}

fn standardized_rows(
    x: ArrayView2<'_, f64>,
    rows: &[usize],
    mean: &[f64],
    scale: &[f64],
) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), x.ncols()), |(i, j)| {
        (x[[rows[i], j]] - mean[j]) / scale[j]
    })
}

/// Fits the gloss axis on one layer with round-robin k-fold CV.
///
/// Fold `i % folds` holds out sample `i`; every sample is validated exactly
/// once by a model that never saw it. Standardization parameters are
/// estimated per training fold, the reported Spearman pools all held-out
/// projections, and the returned weights are refit on the full layer.
pub fn fit_gloss_axis(
    corpus: &EmbeddingCorpus,
    layer: usize,
    folds: usize,
    lambda: f64,
) -> Result<GlossAxisModel, AxisError> {
    let x32 = corpus.layer_matrix(layer)?;
    let x = x32.mapv(f64::from);
    let y: Vec<f64> = corpus
        .labels()
        .values(Factor::Gloss)
        .iter()
        .map(|&g| f64::from(g))
        .collect();
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(AxisError::BadFolds { folds, n });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(AxisError::ConstantTarget);
    }

    let fold_assignment: Vec<u32> = (0..n).map(|i| (i % folds) as u32).collect();
    let mut pooled = vec![0.0; n];
    let mut fold_mse = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let val: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
        let (mean, scale) = subset_standardization(x.view(), &train);
        let phi = standardized_rows(x.view(), &train, &mean, &scale);
        let y_train = Array1::from_iter(train.iter().map(|&i| y[i]));
        let model = ridge_fit(phi.view(), y_train.view(), lambda)?;
        let phi_val = standardized_rows(x.view(), &val, &mean, &scale);
        let pred = model.predict(phi_val.view());
        let mut sse = 0.0;
        for (k, &i) in val.iter().enumerate() {
            pooled[i] = pred[k];
            sse += (pred[k] - y[i]) * (pred[k] - y[i]);
        }
        fold_mse.push(sse / val.len() as f64);
    }
    let rho = spearman(&pooled, &y)?;
    let mse_mean = fold_mse.iter().sum::<f64>() / folds as f64;
    let mse_var = fold_mse.iter().map(|m| (m - mse_mean).powi(2)).sum::<f64>() / folds as f64;

    let all: Vec<usize> = (0..n).collect();
    let (mean, scale) = subset_standardization(x.view(), &all);
    let phi = standardized_rows(x.view(), &all, &mean, &scale);
    let final_model = ridge_fit(phi.view(), Array1::from_iter(y.iter().copied()).view(), lambda)?;

    Ok(GlossAxisModel {
        layer,
        lambda,
        weights: final_model.weights.to_vec(),
        intercept: final_model.intercept,
        feature_mean: mean,
        feature_scale: scale,
        cv_mse_mean: mse_mean,
        cv_mse_std: mse_var.sqrt(),
        spearman_rho: rho,
        fold_assignment,
    })
}

/// One layer's mean and spread of the R-squared drop over repetitions.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerImportance {
    pub layer: usize,
    pub delta_r2_mean: f64,
    pub delta_r2_std: f64,
}

/// Unique-information profile of every layer for one target factor.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerImportanceTable {
    pub r2_full: f64,
    pub repetitions: usize,
    pub layers: Vec<LayerImportance>,
}

impl LayerImportanceTable {
    /// Layer with the largest mean drop.
    #[must_use]
    pub fn argmax_layer(&self) -> usize {
        self.layers
            .iter()
            .max_by(|a, b| {
                a.delta_r2_mean
                    .total_cmp(&b.delta_r2_mean)
                    .then(b.layer.cmp(&a.layer))
            })
            .map(|l| l.layer)
            .expect("table has at least one layer")
    }

    /// Writes `layer,delta_r2_mean,delta_r2_std` rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.layers {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Regression target for the importance analysis: gloss keeps its ordinal
/// levels, any other factor must be two-class and maps to 0/1.
fn importance_target(corpus: &EmbeddingCorpus, target: Factor) -> Result<Vec<f64>, AxisError> {
    let raw = corpus.labels().values(target);
    if target == Factor::Gloss {
        return Ok(raw.iter().map(|&v| f64::from(v)).collect());
    }
    let mut remap = BTreeMap::new();
    for &v in raw {
        let next = remap.len() as f64;
        remap.entry(v).or_insert(next);
    }
    if remap.len() != 2 {
        return Err(AxisError::TargetNotBinarizable(target.name()));
    }
    Ok(raw.iter().map(|&v| remap[&v]).collect())
}

/// Measures each layer's unique contribution to predicting `target`.
///
/// One ridge model is fit on the concatenated standardized layer features
/// of a seeded 80/20 train split and scored on the held-out 20%. For every
/// layer and repetition, that layer's feature block is permuted across
/// training samples (a fresh derived seed each time), the model is refit,
/// and the held-out R-squared is recomputed on unmodified test data:
///
/// ```text
/// delta_r2(layer) = r2_full - mean_reps r2_refit_with_layer_permuted
/// ```
///
/// A permuted block carries no information about the target, so the refit
/// can only lean on the other layers; the drop therefore measures what the
/// layer alone knew. The refits reuse the full model's normal equations,
/// updating only the matrix blocks the permutation touches.
pub fn layer_unique_importance(
    corpus: &EmbeddingCorpus,
    target: Factor,
    lambda: f64,
    repetitions: usize,
    seed: u64,
) -> Result<LayerImportanceTable, AxisError> {
    if repetitions == 0 {
        return Err(AxisError::NoRepetitions);
    }
    let y = importance_target(corpus, target)?;
    if y.iter().all(|&v| v == y[0]) {
        return Err(AxisError::ConstantTarget);
    }
    let n = corpus.n();
    let n_test = (n / 5).max(2);
    let n_train = n.checked_sub(n_test).unwrap_or(0);
    if n_train < 2 {
        return Err(AxisError::TooFewSamples { got: n, need: 5 });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut task_rng(seed, "importance-split", 0));
    let train = &order[..n_train];
    let test = &order[n_train..];

    let flat = corpus.flattened();
    let x = flat.mapv(f64::from);
    let (mean, scale) = subset_standardization(x.view(), train);
    let phi = standardized_rows(x.view(), train, &mean, &scale);
    let phi_test = standardized_rows(x.view(), test, &mean, &scale);
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let y_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    let yc = Array1::from_iter(y_train.iter().map(|v| v - y_mean));

    let layers = corpus.layers();
    let d = corpus.dim();
    let p = layers * d;
    let solver: Box<dyn RefitSolver> = if p <= n_train {
        Box::new(PrimalSolver::new(&phi, &yc, lambda))
    } else {
        Box::new(DualSolver::new(&phi, &phi_test, &yc, lambda))
    };

    let pred_full = solver
        .solve_full(&phi_test)
        .ok_or(AxisError::Singular)?
        + y_mean;
    let r2_full = r_squared(&y_test, pred_full.as_slice().expect("standard layout"))?;

    let mut table = Vec::with_capacity(layers);
    for layer in 0..layers {
        let mut drops = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let mut perm: Vec<usize> = (0..n_train).collect();
            perm.shuffle(&mut task_rng(
                seed,
                "importance-perm",
                (layer * repetitions + rep) as u64,
            ));
            let pred = solver
                .solve_permuted(&phi_test, layer, d, &perm)
                .ok_or(AxisError::Singular)?
                + y_mean;
            let r2 = r_squared(&y_test, pred.as_slice().expect("standard layout"))?;
            drops.push(r2_full - r2);
        }
        let dmean = drops.iter().sum::<f64>() / repetitions as f64;
        let dvar = drops.iter().map(|v| (v - dmean).powi(2)).sum::<f64>() / repetitions as f64;
        table.push(LayerImportance {
            layer,
            delta_r2_mean: dmean,
            delta_r2_std: dvar.sqrt(),
        });
    }
    Ok(LayerImportanceTable {
        r2_full,
        repetitions,
        layers: table,
    })
}

/// Refits the training-block-permuted ridge model and predicts the test
/// targets (centered; caller adds the intercept back).
trait RefitSolver {
    fn solve_full(&self, phi_test: &Array2<f64>) -> Option<Array1<f64>>;
    fn solve_permuted(
        &self,
        phi_test: &Array2<f64>,
        layer: usize,
        d: usize,
        perm: &[usize],
    ) -> Option<Array1<f64>>;
}

/// Normal equations in feature space, for `p <= n_train`.
///
/// Permuting block `l` leaves `X_l' X_l` unchanged and touches only the
/// cross blocks `X_l' X_m` and the target correlation `X_l' y`, so a refit
/// replaces one block row/column of the Gram matrix and re-solves.
struct PrimalSolver {
    phi: Array2<f64>,
    a0: Array2<f64>,
    c0: Array1<f64>,
    yc: Array1<f64>,
    lambda: f64,
}

impl PrimalSolver {
    fn new(phi: &Array2<f64>, yc: &Array1<f64>, lambda: f64) -> Self {
        let a0 = phi.t().dot(phi);
        let c0 = phi.t().dot(yc);
        PrimalSolver {
            phi: phi.clone(),
            a0,
            c0,
            yc: yc.clone(),
            lambda,
        }
    }

    fn solve(&self, a: &mut Array2<f64>, c: &Array1<f64>, phi_test: &Array2<f64>) -> Option<Array1<f64>> {
        for i in 0..a.nrows() {
            a[[i, i]] += self.lambda;
        }
        let w = cholesky_solve(a, c)?;
        Some(phi_test.dot(&w))
    }
}

impl RefitSolver for PrimalSolver {
    fn solve_full(&self, phi_test: &Array2<f64>) -> Option<Array1<f64>> {
        let mut a = self.a0.clone();
        self.solve(&mut a, &self.c0, phi_test)
    }

    fn solve_permuted(
        &self,
        phi_test: &Array2<f64>,
        layer: usize,
        d: usize,
        perm: &[usize],
    ) -> Option<Array1<f64>> {
        let n_tr = self.phi.nrows();
        let cols = layer * d..(layer + 1) * d;
        let mut block = Array2::zeros((n_tr, d));
        for i in 0..n_tr {
            for j in 0..d {
                block[[i, j]] = self.phi[[perm[i], cols.start + j]];
            }
        }
        // Cross terms against every other block, then the (l,l) block and the
        // target correlation.
        let b = block.t().dot(&self.phi);
        let mut a = self.a0.clone();
        for (bi, r) in cols.clone().enumerate() {
            for j in 0..a.ncols() {
                a[[r, j]] = b[[bi, j]];
                a[[j, r]] = b[[bi, j]];
            }
        }
        for r in cols.clone() {
            for c in cols.clone() {
                a[[r, c]] = self.a0[[r, c]];
            }
        }
        let cb = block.t().dot(&self.yc);
        let mut c = self.c0.clone();
        for (bi, r) in cols.enumerate() {
            c[r] = cb[bi];
        }
        self.solve(&mut a, &c, phi_test)
    }
}

/// Kernel-space normal equations, for `p > n_train`.
///
/// The Gram update for a permuted block is
/// `G' = G - G_l + P G_l P'` and the test kernel update gathers the
/// permuted columns of the block kernel, so nothing wider than `n_train`
/// is ever factorized.
struct DualSolver {
    phi: Array2<f64>,
    g0: Array2<f64>,
    k0: Array2<f64>,
    yc: Array1<f64>,
    lambda: f64,
}

impl DualSolver {
    fn new(phi: &Array2<f64>, phi_test: &Array2<f64>, yc: &Array1<f64>, lambda: f64) -> Self {
        DualSolver {
            phi: phi.clone(),
            g0: phi.dot(&phi.t()),
            k0: phi_test.dot(&phi.t()),
            yc: yc.clone(),
            lambda,
        }
    }

    fn solve(&self, g: &mut Array2<f64>, k: &Array2<f64>) -> Option<Array1<f64>> {
        for i in 0..g.nrows() {
            g[[i, i]] += self.lambda;
        }
        let alpha = cholesky_solve(g, &self.yc)?;
        Some(k.dot(&alpha))
    }
}

impl RefitSolver for DualSolver {
    fn solve_full(&self, _phi_test: &Array2<f64>) -> Option<Array1<f64>> {
        let mut g = self.g0.clone();
        self.solve(&mut g, &self.k0)
    }

    fn solve_permuted(
        &self,
        phi_test: &Array2<f64>,
        layer: usize,
        d: usize,
        perm: &[usize],
    ) -> Option<Array1<f64>> {
        let n_tr = self.phi.nrows();
        let cols = s![.., layer * d..(layer + 1) * d];
        let phi_l = self.phi.slice(cols);
        let g_l = phi_l.dot(&phi_l.t());
        let k_l = phi_test.slice(cols).dot(&phi_l.t());

        let mut g = &self.g0 - &g_l;
        for i in 0..n_tr {
            for j in 0..n_tr {
                g[[i, j]] += g_l[[perm[i], perm[j]]];
            }
        }
        let mut k = &self.k0 - &k_l;
        for i in 0..k.nrows() {
            for j in 0..n_tr {
                k[[i, j]] += k_l[[i, perm[j]]];
            }
        }
        self.solve(&mut g, &k)
    }
}
