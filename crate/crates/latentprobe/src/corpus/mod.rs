//! Embedding corpora: `N x L x D` latent tensors with per-sample factor
//! labels and their on-disk representation.
//!
//! A corpus couples three things that must stay consistent: the embedding
//! tensor, a label table over the five scene factors, and string dictionaries
//! naming the categorical factor levels. [`EmbeddingCorpus::validate`]
//! re-checks every invariant and reports violations individually, so corrupt
//! inputs are diagnosable rather than merely rejected.

mod io;
mod synth;

pub use io::{load_corpus, save_corpus, CORPUS_MAGIC};
pub use synth::{synth_generate, two_factor_spec, FactorLayout, Sampling, SyntheticSpec};

use std::collections::BTreeMap;

use ndarray::{Array3, ArrayView2};
use thiserror::Error;

/// Highest representable gloss level; gloss labels live in `0..=MAX_GLOSS`.
pub const MAX_GLOSS: u32 = 6;

/// The five scene factors, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    Gloss,
    Style,
    Geometry,
    Illumination,
    Color,
}

impl Factor {
    /// All factors in canonical order.
    pub const ALL: [Factor; 5] = [
        Factor::Gloss,
        Factor::Style,
        Factor::Geometry,
        Factor::Illumination,
        Factor::Color,
    ];

    /// Stable lowercase name used in CSV headers, manifests, and the CLI.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Factor::Gloss => "gloss",
            Factor::Style => "style",
            Factor::Geometry => "geometry",
            Factor::Illumination => "illumination",
            Factor::Color => "color",
        }
    }

    /// Parses a factor name as used by [`Factor::name`].
    pub fn parse(name: &str) -> Result<Factor, CorpusError> {
        Factor::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| CorpusError::UnknownFactor(name.to_string()))
    }

    /// Whether the factor is categorical (named levels) rather than ordinal.
    #[must_use]
    pub fn is_categorical(self) -> bool {
        !matches!(self, Factor::Gloss)
    }
}

/// Per-sample integer labels for every factor, plus dictionaries naming the
/// levels of the categorical factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    pub gloss: Vec<u32>,
    pub style: Vec<u32>,
    pub geometry: Vec<u32>,
    pub illumination: Vec<u32>,
    pub color: Vec<u32>,
    /// Factor name -> level names; indexed by label id. Categorical factors
    /// must each have an entry.
    pub dictionaries: BTreeMap<String, Vec<String>>,
}

impl FactorTable {
    /// Label column for one factor.
    #[must_use]
    pub fn values(&self, factor: Factor) -> &[u32] {
        match factor {
            Factor::Gloss => &self.gloss,
            Factor::Style => &self.style,
            Factor::Geometry => &self.geometry,
            Factor::Illumination => &self.illumination,
            Factor::Color => &self.color,
        }
    }

    /// Number of levels a factor can take: dictionary size for categorical
    /// factors, the fixed gloss range otherwise.
    #[must_use]
    pub fn class_count(&self, factor: Factor) -> usize {
        if factor == Factor::Gloss {
            (MAX_GLOSS + 1) as usize
        } else {
            self.dictionaries
                .get(factor.name())
                .map_or(0, |d| d.len())
        }
    }

    fn columns(&self) -> [(Factor, &[u32]); 5] {
        [
            (Factor::Gloss, self.gloss.as_slice()),
            (Factor::Style, self.style.as_slice()),
            (Factor::Geometry, self.geometry.as_slice()),
            (Factor::Illumination, self.illumination.as_slice()),
            (Factor::Color, self.color.as_slice()),
        ]
    }
}

/// A single invariant violation found by [`EmbeddingCorpus::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusViolation {
    /// Non-finite embedding value at `(sample, layer, dim)`.
    NonFiniteValue { sample: usize, layer: usize, dim: usize },
    /// Gloss label outside `0..=MAX_GLOSS`.
    GlossOutOfRange { sample: usize, value: u32 },
    /// Categorical label with no dictionary entry.
    LabelOutOfDictionary { factor: Factor, sample: usize, value: u32 },
    /// A label column whose length differs from the sample count.
    ColumnLengthMismatch { factor: Factor, len: usize, expected: usize },
    /// A categorical factor without a dictionary.
    MissingDictionary { factor: Factor },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus failed validation with {count} violation(s); first: {first}")]
    Invalid { count: usize, first: String },
    #[error("unknown factor name {0:?}")]
    UnknownFactor(String),
    #[error("embedding tensor has a zero dimension: {n} x {layers} x {dim}")]
    EmptyTensor { n: usize, layers: usize, dim: usize },
    #[error("layer index {layer} out of range for {layers} layers")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("synthetic spec invalid: {0}")]
    BadSpec(String),
    #[error("bad magic in embeddings file: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 8], found: [u8; 8] },
    #[error("embeddings file is {actual} bytes but header implies {expected} (24 + 4*N*L*D)")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("labels file has {rows} rows but corpus declares {expected} samples")]
    LabelRowMismatch { rows: usize, expected: usize },
    #[error("manifest field {0:?} is inconsistent with the embeddings header")]
    ManifestMismatch(&'static str),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed labels CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// An `N x L x D` embedding tensor with aligned factor labels.
#[derive(Clone, Debug)]
pub struct EmbeddingCorpus {
    data: Array3<f32>,
    labels: FactorTable,
    /// Generator seed when the corpus is synthetic; `None` for imported data.
    pub seed: Option<u64>,
}

impl EmbeddingCorpus {
    /// Builds a corpus, rejecting any invariant violation.
    pub fn new(
        data: Array3<f32>,
        labels: FactorTable,
        seed: Option<u64>,
    ) -> Result<Self, CorpusError> {
        let (n, layers, dim) = data.dim();
        if n == 0 || layers == 0 || dim == 0 {
            return Err(CorpusError::EmptyTensor { n, layers, dim });
        }
        let corpus = EmbeddingCorpus { data, labels, seed };
        let violations = corpus.validate();
        if violations.is_empty() {
            Ok(corpus)
        } else {
            Err(CorpusError::Invalid {
                count: violations.len(),
                first: format!("{:?}", violations[0]),
            })
        }
    }

    /// Checks every corpus invariant and returns all violations found.
    ///
    /// Finite embeddings, gloss range, dictionary coverage, and label column
    /// lengths are each reported with enough indices to locate the offender.
    #[must_use]
    pub fn validate(&self) -> Vec<CorpusViolation> {
        let mut out = Vec::new();
        let (n, _layers, _dim) = self.data.dim();

        for (factor, column) in self.labels.columns() {
            if column.len() != n {
                out.push(CorpusViolation::ColumnLengthMismatch {
                    factor,
                    len: column.len(),
                    expected: n,
                });
            }
        }
        for factor in Factor::ALL {
            if factor.is_categorical() && !self.labels.dictionaries.contains_key(factor.name()) {
                out.push(CorpusViolation::MissingDictionary { factor });
            }
        }

        for ((sample, layer, dim), &v) in self.data.indexed_iter() {
            if !v.is_finite() {
                out.push(CorpusViolation::NonFiniteValue { sample, layer, dim });
            }
        }

        for (sample, &g) in self.labels.gloss.iter().enumerate().take(n) {
            if g > MAX_GLOSS {
                out.push(CorpusViolation::GlossOutOfRange { sample, value: g });
            }
        }
        for (factor, column) in self.labels.columns() {
            if !factor.is_categorical() {
                continue;
            }
            let Some(dict) = self.labels.dictionaries.get(factor.name()) else {
                continue;
            };
            for (sample, &v) in column.iter().enumerate().take(n) {
                if (v as usize) >= dict.len() {
                    out.push(CorpusViolation::LabelOutOfDictionary { factor, sample, value: v });
                }
            }
        }
        out
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.data.dim().0
    }

    #[must_use]
    pub fn layers(&self) -> usize {
        self.data.dim().1
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.data.dim().2
    }

    #[must_use]
    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    #[must_use]
    pub fn labels(&self) -> &FactorTable {
        &self.labels
    }

    /// The `N x D` matrix of one layer's embeddings.
    pub fn layer_matrix(&self, layer: usize) -> Result<ArrayView2<'_, f32>, CorpusError> {
        if layer >= self.layers() {
            return Err(CorpusError::LayerOutOfRange {
                layer,
                layers: self.layers(),
            });
        }
        Ok(self.data.index_axis(ndarray::Axis(1), layer))
    }

    /// The `N x (L*D)` view with layers concatenated per sample.
    #[must_use]
    pub fn flattened(&self) -> ArrayView2<'_, f32> {
        let (n, layers, dim) = self.data.dim();
        self.data
            .view()
            .into_shape_with_order((n, layers * dim))
            .expect("standard layout")
    }

    /// Consumes the corpus, returning its tensor and labels.
    #[must_use]
    pub fn into_parts(self) -> (Array3<f32>, FactorTable, Option<u64>) {
        (self.data, self.labels, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn tiny_labels(n: usize) -> FactorTable {
        let mut dictionaries = BTreeMap::new();
        dictionaries.insert("style".to_string(), vec!["a".into(), "b".into()]);
        dictionaries.insert("geometry".to_string(), vec!["g0".into()]);
        dictionaries.insert("illumination".to_string(), vec!["i0".into()]);
        dictionaries.insert("color".to_string(), vec!["c0".into(), "c1".into()]);
        FactorTable {
            gloss: (0..n).map(|i| (i % 7) as u32).collect(),
            style: (0..n).map(|i| (i % 2) as u32).collect(),
            geometry: vec![0; n],
            illumination: vec![0; n],
            color: (0..n).map(|i| (i % 2) as u32).collect(),
            dictionaries,
        }
    }

    #[test]
    fn valid_corpus_passes() {
        let data = Array3::<f32>::zeros((10, 3, 4));
        let corpus = EmbeddingCorpus::new(data, tiny_labels(10), Some(1)).unwrap();
        assert!(corpus.validate().is_empty());
        assert_eq!(corpus.n(), 10);
        assert_eq!(corpus.flattened().dim(), (10, 12));
    }

    #[test]
    fn non_finite_value_is_located() {
        let mut data = Array3::<f32>::zeros((4, 2, 3));
        data[[2, 1, 0]] = f32::NAN;
        let corpus = EmbeddingCorpus {
            data,
            labels: tiny_labels(4),
            seed: None,
        };
        let violations = corpus.validate();
        assert_eq!(
            violations,
            vec![CorpusViolation::NonFiniteValue {
                sample: 2,
                layer: 1,
                dim: 0
            }]
        );
    }

    #[test]
    fn gloss_range_and_dictionary_checks() {
        let mut labels = tiny_labels(3);
        labels.gloss[1] = 9;
        labels.style[2] = 5;
        let corpus = EmbeddingCorpus {
            data: Array3::<f32>::zeros((3, 1, 2)),
            labels,
            seed: None,
        };
        let violations = corpus.validate();
        assert!(violations.contains(&CorpusViolation::GlossOutOfRange { sample: 1, value: 9 }));
        assert!(violations.contains(&CorpusViolation::LabelOutOfDictionary {
            factor: Factor::Style,
            sample: 2,
            value: 5
        }));
    }

    #[test]
    fn constructor_rejects_bad_corpus() {
        let mut labels = tiny_labels(3);
        labels.color.pop();
        let err = EmbeddingCorpus::new(Array3::<f32>::zeros((3, 1, 2)), labels, None).unwrap_err();
        assert!(matches!(err, CorpusError::Invalid { .. }));
    }

    #[test]
    fn layer_matrix_bounds() {
        let corpus =
            EmbeddingCorpus::new(Array3::<f32>::zeros((2, 2, 2)), tiny_labels(2), None).unwrap();
        assert!(corpus.layer_matrix(1).is_ok());
        assert!(matches!(
            corpus.layer_matrix(2),
            Err(CorpusError::LayerOutOfRange { layer: 2, layers: 2 })
        ));
    }

    #[test]
    fn factor_names_round_trip() {
        for f in Factor::ALL {
            assert_eq!(Factor::parse(f.name()).unwrap(), f);
        }
        assert!(Factor::parse("sheen").is_err());
    }
}
