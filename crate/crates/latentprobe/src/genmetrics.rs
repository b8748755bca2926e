//! Latent-space quality metrics over pluggable generator and distance
//! interfaces, plus user-study rank statistics.
//!
//! Compactness is the mean Euclidean distance of latent codes from a center.
//! Path length measures how fast generator output moves along latent
//! interpolation paths, normalized by the step size squared. Both accept any
//! generator and any perceptual distance; a seeded linear generator and a
//! squared-L2 distance ship as desk-scale instances. Rank matrices from
//! pairwise user studies reduce to per-method geometric means and preference
//! percentages.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::task_rng;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no latent codes supplied")]
    EmptyCodes,
    #[error("latent dim mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("step size must be in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("no code pairs supplied")]
    EmptyPairs,
    #[error("generator produced {got} values but declares a shape holding {expected}")]
    GeneratorShape { expected: usize, got: usize },
    #[error("no outcomes supplied")]
    EmptyOutcomes,
    #[error("rank matrix needs at least one question and one method")]
    EmptyRankMatrix,
    #[error("rank for method {method:?} in question {question:?} is {value}, must be >= 1")]
    InvalidRank {
        question: String,
        method: String,
        value: f64,
    },
    #[error("rank matrix is {rows}x{cols} but there are {questions} questions x {methods} methods")]
    RankShape {
        rows: usize,
        cols: usize,
        questions: usize,
        methods: usize,
    },
    #[error("duplicate rank entry for method {method:?} in question {question:?}")]
    DuplicateEntry { question: String, method: String },
    #[error("missing rank for method {method:?} in question {question:?}")]
    MissingEntry { question: String, method: String },
    #[error("failed to read rank matrix: {0}")]
    Csv(#[from] csv::Error),
}

/// A deterministic map from a latent code to a flattened image-like array.
///
/// `output_shape` declares the logical shape; `generate` returns its
/// row-major flattening. Implementations must be pure: identical codes give
/// identical outputs, and evaluation must be safe from multiple threads.
pub trait Generator: Sync {
    fn latent_dim(&self) -> usize;
    fn output_shape(&self) -> &[usize];
    /// `code.len()` must equal `latent_dim()`.
    fn generate(&self, code: ArrayView1<'_, f64>) -> Array1<f64>;
}

/// A symmetric nonnegative distance with d(x, x) = 0.
pub trait PerceptualDistance: Sync {
    fn distance(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64;
}

/// Sum of squared differences between pixel arrays.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredL2;

impl PerceptualDistance for SquaredL2 {
    fn distance(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    }
}

/// The generator that returns its latent code unchanged.
#[derive(Clone, Debug)]
pub struct IdentityGenerator {
    shape: Vec<usize>,
}

impl IdentityGenerator {
    pub fn new(dim: usize) -> Self {
        Self { shape: vec![dim] }
    }
}

impl Generator for IdentityGenerator {
    fn latent_dim(&self) -> usize {
        self.shape[0]
    }
    fn output_shape(&self) -> &[usize] {
        &self.shape
    }
    fn generate(&self, code: ArrayView1<'_, f64>) -> Array1<f64> {
        code.to_owned()
    }
}

/// G(w) = A w + c with a fixed seeded Gaussian A and offset c.
#[derive(Clone, Debug)]
pub struct LinearGenerator {
    matrix: Array2<f64>,
    offset: Array1<f64>,
    shape: Vec<usize>,
}

impl LinearGenerator {
    pub fn new(matrix: Array2<f64>, offset: Array1<f64>) -> Result<Self, MetricsError> {
        if matrix.nrows() != offset.len() {
            return Err(MetricsError::GeneratorShape {
                expected: matrix.nrows(),
                got: offset.len(),
            });
        }
        let shape = vec![matrix.nrows()];
        Ok(Self {
            matrix,
            offset,
            shape,
        })
    }

    pub fn seeded(out_dim: usize, latent_dim: usize, seed: u64) -> Self {
        let mut rng = task_rng(seed, "linear-generator", 0);
        let matrix = Array2::from_shape_fn((out_dim, latent_dim), |_| {
            StandardNormal.sample(&mut rng)
        });
        let offset = Array1::from_shape_fn(out_dim, |_| StandardNormal.sample(&mut rng));
        Self {
            matrix,
            offset,
            shape: vec![out_dim],
        }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }
}

impl Generator for LinearGenerator {
    fn latent_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn output_shape(&self) -> &[usize] {
        &self.shape
    }
    fn generate(&self, code: ArrayView1<'_, f64>) -> Array1<f64> {
        self.matrix.dot(&code) + &self.offset
    }
}

/// Mean Euclidean distance of each code from the center `w_bar`.
///
/// Small values mean the codes sit in a compact region around the center.
pub fn reg_compactness(
    codes: ArrayView2<'_, f64>,
    w_bar: ArrayView1<'_, f64>,
) -> Result<f64, MetricsError> {
    if codes.nrows() == 0 {
        return Err(MetricsError::EmptyCodes);
    }
    if codes.ncols() != w_bar.len() {
        return Err(MetricsError::DimMismatch {
            expected: w_bar.len(),
            got: codes.ncols(),
        });
    }
    let total: f64 = codes
        .outer_iter()
        .map(|row| {
            row.iter()
                .zip(w_bar.iter())
                .map(|(&c, &m)| (c - m) * (c - m))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / codes.nrows() as f64)
}

/// Independent standard-normal code pairs for path-length estimation.
pub fn sample_gaussian_pairs(
    count: usize,
    dim: usize,
    seed: u64,
) -> Vec<(Array1<f64>, Array1<f64>)> {
    let mut rng = task_rng(seed, "ppl-pairs", 0);
    (0..count)
        .map(|_| {
            let a = Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng));
            let b = Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng));
            (a, b)
        })
        .collect()
}

/// Perceptual path length: E[ d(G(w_t), G(w_{t+eps})) ] / eps^2 with w_t on
/// the segment between each pair's endpoints and t uniform on [0, 1 - eps].
///
/// Deterministic for a fixed seed: the per-pair t values are drawn up front
/// in pair order, evaluations run in parallel, and the mean is accumulated
/// in pair order.
pub fn ppl<G, D>(
    generator: &G,
    distance: &D,
    pairs: &[(Array1<f64>, Array1<f64>)],
    epsilon: f64,
    seed: u64,
) -> Result<f64, MetricsError>
where
    G: Generator + ?Sized,
    D: PerceptualDistance + ?Sized,
{
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(MetricsError::BadEpsilon(epsilon));
    }
    if pairs.is_empty() {
        return Err(MetricsError::EmptyPairs);
    }
    let dim = generator.latent_dim();
    for (w1, w2) in pairs {
        if w1.len() != dim || w2.len() != dim {
            return Err(MetricsError::DimMismatch {
                expected: dim,
                got: if w1.len() != dim { w1.len() } else { w2.len() },
            });
        }
    }
    let declared: usize = generator.output_shape().iter().product();

    let mut rng = task_rng(seed, "ppl-t", 0);
    let ts: Vec<f64> = pairs
        .iter()
        .map(|_| rng.gen::<f64>() * (1.0 - epsilon))
        .collect();

    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let lerp = |w1: &Array1<f64>, w2: &Array1<f64>, t: f64| -> Array1<f64> {
        w1 * (1.0 - t) + w2 * t
    };
    let values: Result<Vec<f64>, MetricsError> = pairs
        .par_iter()
        .zip(ts.par_iter())
        .map(|((w1, w2), &t)| {
            let img_a = generator.generate(lerp(w1, w2, t).view());
            if img_a.len() != declared {
                return Err(MetricsError::GeneratorShape {
                    expected: declared,
                    got: img_a.len(),
                });
            }
            let img_b = generator.generate(lerp(w1, w2, t + epsilon).view());
            Ok(distance.distance(img_a.view(), img_b.view()) * inv_eps2)
        })
        .collect();
    let values = values?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Average ranks from a user study: one row per question, one column per
/// method, every rank at least 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RankMatrix {
    questions: Vec<String>,
    methods: Vec<String>,
    ranks: Array2<f64>,
}

/// One method's geometric-mean rank across all questions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProduct {
    pub method: String,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
struct RankRow {
    question_id: String,
    method: String,
    avg_rank: f64,
}

impl RankMatrix {
    /// `ranks` is questions x methods, matching the label orders.
    pub fn new(
        questions: Vec<String>,
        methods: Vec<String>,
        ranks: Array2<f64>,
    ) -> Result<Self, MetricsError> {
        if questions.is_empty() || methods.is_empty() {
            return Err(MetricsError::EmptyRankMatrix);
        }
        if ranks.dim() != (questions.len(), methods.len()) {
            return Err(MetricsError::RankShape {
                rows: ranks.nrows(),
                cols: ranks.ncols(),
                questions: questions.len(),
                methods: methods.len(),
            });
        }
        for (q, row) in questions.iter().zip(ranks.outer_iter()) {
            for (m, &value) in methods.iter().zip(row.iter()) {
                if !(value >= 1.0) {
                    return Err(MetricsError::InvalidRank {
                        question: q.clone(),
                        method: m.clone(),
                        value,
                    });
                }
            }
        }
        Ok(Self {
            questions,
            methods,
            ranks,
        })
    }

    /// Reads `question_id,method,avg_rank` rows. Row order is free, but the
    /// matrix must be complete: every (question, method) cell exactly once.
    /// Questions and methods come out sorted by name.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut csv_reader = csv::Reader::from_reader(reader);
        let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut questions: BTreeSet<String> = BTreeSet::new();
        let mut methods: BTreeSet<String> = BTreeSet::new();
        for row in csv_reader.deserialize() {
            let row: RankRow = row?;
            questions.insert(row.question_id.clone());
            methods.insert(row.method.clone());
            let key = (row.question_id, row.method);
            if cells.insert(key.clone(), row.avg_rank).is_some() {
                return Err(MetricsError::DuplicateEntry {
                    question: key.0,
                    method: key.1,
                });
            }
        }
        let questions: Vec<String> = questions.into_iter().collect();
        let methods: Vec<String> = methods.into_iter().collect();
        if questions.is_empty() {
            return Err(MetricsError::EmptyRankMatrix);
        }
        let mut ranks = Array2::zeros((questions.len(), methods.len()));
        for (qi, q) in questions.iter().enumerate() {
            for (mi, m) in methods.iter().enumerate() {
                let value = cells.get(&(q.clone(), m.clone())).copied().ok_or_else(|| {
                    MetricsError::MissingEntry {
                        question: q.clone(),
                        method: m.clone(),
                    }
                })?;
                ranks[[qi, mi]] = value;
            }
        }
        Self::new(questions, methods, ranks)
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn ranks(&self) -> ArrayView2<'_, f64> {
        self.ranks.view()
    }

    /// Geometric mean of each method's ranks across the questions.
    ///
    /// Lower is better; a method ranked first everywhere scores exactly 1.
    pub fn rank_products(&self) -> Vec<RankProduct> {
        let k = self.questions.len() as f64;
        self.methods
            .iter()
            .enumerate()
            .map(|(mi, method)| {
                let product: f64 = self.ranks.column(mi).iter().product();
                RankProduct {
                    method: method.clone(),
                    value: product.powf(1.0 / k),
                }
            })
            .collect()
    }
}

/// Percentage of pairwise comparisons won against one alternative.
pub fn preference(outcomes: &[bool]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyOutcomes);
    }
    let wins = outcomes.iter().filter(|&&w| w).count();
    Ok(100.0 * wins as f64 / outcomes.len() as f64)
}
