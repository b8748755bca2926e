//! Exact t-SNE with deterministic initialization and a monotonicity
//! safeguard on the post-exaggeration KL descent.
//!
//! The implementation is the standard quadratic algorithm: Gaussian input
//! affinities calibrated per point to a target perplexity, symmetrized and
//! floored, then gradient descent on Student-t output affinities with early
//! exaggeration and momentum. Memory is O(N^2), intended for N up to ~10k.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::TsneError;
use crate::linalg::fit_pca;
use crate::seeding::task_rng;

const ENTROPY_TOL: f64 = 1e-5;
const PROB_FLOOR: f64 = 1e-12;
const CHECKPOINT_EVERY: usize = 50;
/// Halving the learning rate this many times without KL progress means the
/// step size has hit numerical dust; the chunk is then recorded flat.
const MAX_CHUNK_RETRIES: usize = 16;

/// Hyper-parameters of the embedding.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Input affinities are multiplied by this during the first
    /// `exaggeration_iters` iterations to let clusters form early.
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
    /// PCA pre-reduction applied when the input is wider than this.
    pub pca_dims: Option<usize>,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
            pca_dims: Some(50),
        }
    }
}

/// Final coordinates plus the recorded KL trace.
#[derive(Clone, Debug)]
pub struct TsneResult {
    /// `N x 2` embedding, mean-centered.
    pub coords: Array2<f64>,
    /// KL divergence (nats, plain affinities) recorded when exaggeration
    /// ends and after every accepted 50-iteration chunk; non-increasing.
    pub kl_checkpoints: Vec<f64>,
}

/// Embeds `x` into two dimensions.
///
/// Deterministic for a fixed config: initialization comes from the top two
/// principal components (scaled to 1e-4 standard deviation), and the seed
/// is only consulted if that initialization is degenerate. After the
/// exaggeration phase the optimizer checkpoints every 50 iterations; a
/// chunk that raises the KL divergence is rolled back and retried with
/// halved learning rate and zeroed velocity, so the recorded trace never
/// increases.
pub fn tsne(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<TsneResult, TsneError> {
    let n = x.nrows();
    if n < 10 {
        return Err(TsneError::TooFewPoints(n));
    }
    if !(cfg.perplexity > 1.0) || cfg.perplexity >= (n as f64 - 1.0) / 3.0 {
        return Err(TsneError::BadPerplexity {
            perplexity: cfg.perplexity,
            n,
        });
    }
    if cfg.iterations < cfg.exaggeration_iters || cfg.exaggeration_iters == 0 {
        return Err(TsneError::Config(format!(
            "iterations {} must cover the exaggeration phase {}",
            cfg.iterations, cfg.exaggeration_iters
        )));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(TsneError::Config("learning rate must be positive".into()));
    }
    if !cfg.exaggeration.is_finite() || cfg.exaggeration < 1.0 {
        return Err(TsneError::Config("exaggeration must be at least 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TsneError::NonFinite);
    }

    let reduced = match cfg.pca_dims {
        Some(d) if d > 0 && x.ncols() > d => {
            let pca = fit_pca(x, d);
            pca.transform(x)
        }
        _ => x.to_owned(),
    };

    let p = joint_probabilities(&reduced, cfg.perplexity);
    let mut y = pca_init(&reduced, cfg.seed);
    let mut vel = vec![0.0f64; 2 * n];
    let mut grad = vec![0.0f64; 2 * n];

    // Exaggeration phase: clusters form, no checkpointing.
    for _ in 0..cfg.exaggeration_iters {
        step(&mut y, &mut vel, &mut grad, &p, n, cfg.exaggeration, cfg.learning_rate, 0.5);
    }

    let mut kls = vec![kl_divergence(&p, &y, n)];
    let mut ckpt_y = y.clone();
    let mut lr = cfg.learning_rate;
    let mut t = cfg.exaggeration_iters;
    let mut retries = 0;
    while t < cfg.iterations {
        let chunk = CHECKPOINT_EVERY.min(cfg.iterations - t);
        for _ in 0..chunk {
            step(&mut y, &mut vel, &mut grad, &p, n, 1.0, lr, 0.8);
        }
        let kl = kl_divergence(&p, &y, n);
        let best = *kls.last().expect("baseline recorded");
        if kl <= best {
            kls.push(kl);
            ckpt_y.copy_from_slice(&y);
            t += chunk;
            retries = 0;
        } else if retries < MAX_CHUNK_RETRIES {
            y.copy_from_slice(&ckpt_y);
            vel.iter_mut().for_each(|v| *v = 0.0);
            lr /= 2.0;
            retries += 1;
        } else {
            y.copy_from_slice(&ckpt_y);
            vel.iter_mut().for_each(|v| *v = 0.0);
            kls.push(best);
            t += chunk;
            retries = 0;
        }
    }

    center(&mut y, n);
    let coords = Array2::from_shape_vec((n, 2), y).expect("length 2n");
    Ok(TsneResult {
        coords,
        kl_checkpoints: kls,
    })
}

/// Symmetrized, exaggeration-free joint affinities, floored at 1e-12 off
/// the diagonal.
fn joint_probabilities(x: &Array2<f64>, perplexity: f64) -> Vec<f64> {
    let n = x.nrows();
    let d2 = squared_distances(x);
    let target = perplexity.ln();

    use rayon::prelude::*;
    let conditional: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(&d2[i * n..(i + 1) * n], i, target))
        .collect();

    let mut p = vec![0.0f64; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            p[i * n + j] = ((conditional[i][j] + conditional[j][i]) * scale).max(PROB_FLOOR);
        }
    }
    p
}

fn squared_distances(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        let xi = x.row(i);
        for j in (i + 1)..n {
            let xj = x.row(j);
            let mut acc = 0.0;
            for (a, b) in xi.iter().zip(xj.iter()) {
                let diff = a - b;
                acc += diff * diff;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    }
    d2
}

/// Binary-searches the Gaussian precision of one point until the
/// conditional distribution's entropy matches `ln(perplexity)` within
/// 1e-5 nats (or 200 halvings, for degenerate all-equidistant rows).
fn calibrate_row(d2_row: &[f64], i: usize, target: f64) -> Vec<f64> {
    let n = d2_row.len();
    let shift = d2_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut beta = 1.0f64;
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut probs = vec![0.0f64; n];
    for _ in 0..200 {
        let mut sum_p = 0.0;
        let mut sum_dp = 0.0;
        for (j, &d) in d2_row.iter().enumerate() {
            if j == i {
                probs[j] = 0.0;
                continue;
            }
            let e = (-beta * (d - shift)).exp();
            probs[j] = e;
            sum_p += e;
            sum_dp += (d - shift) * e;
        }
        let entropy = sum_p.ln() + beta * sum_dp / sum_p;
        for v in probs.iter_mut() {
            *v /= sum_p;
        }
        if (entropy - target).abs() < ENTROPY_TOL {
            break;
        }
        if entropy > target {
            lo = beta;
            beta = if hi.is_finite() { (lo + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (lo + hi) / 2.0;
        }
    }
    probs
}

/// Top-2 principal components scaled to 1e-4 standard deviation; a
/// zero-variance component falls back to seeded jitter of the same scale.
fn pca_init(x: &Array2<f64>, seed: u64) -> Vec<f64> {
    let n = x.nrows();
    let k = 2.min(x.ncols());
    let pca = fit_pca(x.view(), k);
    let proj = pca.transform(x.view());
    let mut y = vec![0.0f64; 2 * n];
    for c in 0..2 {
        let values: Option<Vec<f64>> = if c < proj.ncols() {
            let col: Vec<f64> = proj.column(c).to_vec();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if std > 1e-30 {
                Some(col.iter().map(|v| (v - mean) * 1e-4 / std).collect())
            } else {
                None
            }
        } else {
            None
        };
        match values {
            Some(col) => {
                for (i, v) in col.into_iter().enumerate() {
                    y[2 * i + c] = v;
                }
            }
            None => {
                let mut rng = task_rng(seed, "tsne-init", c as u64);
                for i in 0..n {
                    y[2 * i + c] = (rng.gen::<f64>() - 0.5) * 2e-4;
                }
            }
        }
    }
    y
}

/// One gradient-descent iteration on the Student-t embedding objective.
///
/// Two passes over the pairs: one for the normalization constant, one for
/// the gradient, avoiding an N^2 scratch buffer.
fn step(
    y: &mut [f64],
    vel: &mut [f64],
    grad: &mut [f64],
    p: &[f64],
    n: usize,
    exaggeration: f64,
    lr: f64,
    momentum: f64,
) {
    let mut z = 0.0f64;
    for i in 0..n {
        let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
        for j in (i + 1)..n {
            let d0 = yi0 - y[2 * j];
            let d1 = yi1 - y[2 * j + 1];
            z += 2.0 / (1.0 + d0 * d0 + d1 * d1);
        }
    }
    let inv_z = 1.0 / z;

    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..n {
        let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
        let (mut g0, mut g1) = (0.0f64, 0.0f64);
        let row = &p[i * n..(i + 1) * n];
        for (j, &pij) in row.iter().enumerate() {
            if j == i {
                continue;
            }
            let d0 = yi0 - y[2 * j];
            let d1 = yi1 - y[2 * j + 1];
            let w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
            let coeff = (exaggeration * pij - w * inv_z) * w;
            g0 += coeff * d0;
            g1 += coeff * d1;
        }
        grad[2 * i] = 4.0 * g0;
        grad[2 * i + 1] = 4.0 * g1;
    }

    for (k, g) in grad.iter().enumerate() {
        vel[k] = momentum * vel[k] - lr * g;
        y[k] += vel[k];
    }
    center(y, n);
}

fn center(y: &mut [f64], n: usize) {
    let (mut m0, mut m1) = (0.0f64, 0.0f64);
    for i in 0..n {
        m0 += y[2 * i];
        m1 += y[2 * i + 1];
    }
    m0 /= n as f64;
    m1 /= n as f64;
    for i in 0..n {
        y[2 * i] -= m0;
        y[2 * i + 1] -= m1;
    }
}

/// KL(P || Q) in nats over distinct pairs, with Q floored like P.
fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let mut z = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d0 = y[2 * i] - y[2 * j];
            let d1 = y[2 * i + 1] - y[2 * j + 1];
            z += 2.0 / (1.0 + d0 * d0 + d1 * d1);
        }
    }
    let mut kl = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            let d0 = y[2 * i] - y[2 * j];
            let d1 = y[2 * i + 1] - y[2 * j + 1];
            let q = (1.0 / (1.0 + d0 * d0 + d1 * d1) / z).max(PROB_FLOOR);
            kl += pij * (pij / q).ln();
        }
    }
    kl
}

#[cfg(test)]
pub(crate) fn knn_purity(coords: &Array2<f64>, labels: &[u32], k: usize) -> f64 {
    let n = coords.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut dist: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d0 = coords[[i, 0]] - coords[[j, 0]];
                let d1 = coords[[i, 1]] - coords[[j, 1]];
                (d0 * d0 + d1 * d1, j)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let same = dist[..k]
            .iter()
            .filter(|&&(_, j)| labels[j] == labels[i])
            .count();
        total += same as f64 / k as f64;
    }
    total / n as f64
}
