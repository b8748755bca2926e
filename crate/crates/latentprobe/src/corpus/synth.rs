//! Synthetic corpora with known factor-to-layer assignments.
//!
//! The generator plants each factor's signal on an explicit set of layers and
//! fills everything else with Gaussian noise, so estimator tests know exactly
//! where information lives. Categorical factors are encoded as orthonormal
//! class directions; gloss is encoded as its centered level along a fixed
//! unit direction, preserving its ordinal structure.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CorpusError, EmbeddingCorpus, Factor, FactorTable, MAX_GLOSS};
use crate::linalg::orthonormalize;
use crate::seeding::task_rng;

/// How labels are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Each factor label independently uniform over its levels.
    Uniform,
    /// The full Cartesian product of factor levels, in canonical factor
    /// order with gloss outermost; `n` must equal the product.
    Grid,
}

/// Level count and encoding layers for one factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorLayout {
    /// Number of levels the factor takes (gloss: at most `MAX_GLOSS + 1`).
    pub levels: usize,
    /// Layers carrying this factor's signal; empty means the factor exists
    /// only as a label.
    #[serde(default)]
    pub layers: Vec<usize>,
}

impl FactorLayout {
    /// A factor with `levels` levels encoded on no layer.
    #[must_use]
    pub fn unencoded(levels: usize) -> Self {
        FactorLayout {
            levels,
            layers: Vec::new(),
        }
    }

    /// A factor with `levels` levels encoded on the given layers.
    #[must_use]
    pub fn on_layers(levels: usize, layers: &[usize]) -> Self {
        FactorLayout {
            levels,
            layers: layers.to_vec(),
        }
    }
}

/// Full description of a synthetic corpus; serializable so generation runs
/// are reproducible from a spec file alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub layers: usize,
    pub dim: usize,
    /// Standard deviation of the Gaussian noise added to every layer.
    pub sigma: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub gloss: FactorLayout,
    pub style: FactorLayout,
    pub geometry: FactorLayout,
    pub illumination: FactorLayout,
    pub color: FactorLayout,
}

impl SyntheticSpec {
    fn layout(&self, factor: Factor) -> &FactorLayout {
        match factor {
            Factor::Gloss => &self.gloss,
            Factor::Style => &self.style,
            Factor::Geometry => &self.geometry,
            Factor::Illumination => &self.illumination,
            Factor::Color => &self.color,
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.n == 0 || self.layers == 0 || self.dim == 0 {
            return Err(CorpusError::BadSpec(format!(
                "degenerate shape {} x {} x {}",
                self.n, self.layers, self.dim
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(CorpusError::BadSpec(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.gloss.levels == 0 || self.gloss.levels > (MAX_GLOSS + 1) as usize {
            return Err(CorpusError::BadSpec(format!(
                "gloss levels must be in 1..={}, got {}",
                MAX_GLOSS + 1,
                self.gloss.levels
            )));
        }
        for factor in Factor::ALL {
            let layout = self.layout(factor);
            if layout.levels == 0 {
                return Err(CorpusError::BadSpec(format!(
                    "{} has zero levels",
                    factor.name()
                )));
            }
            for &layer in &layout.layers {
                if layer >= self.layers {
                    return Err(CorpusError::BadSpec(format!(
                        "{} assigned to layer {} but corpus has {} layers",
                        factor.name(),
                        layer,
                        self.layers
                    )));
                }
            }
            if factor.is_categorical() && !layout.layers.is_empty() && layout.levels > self.dim {
                return Err(CorpusError::BadSpec(format!(
                    "{} needs {} orthonormal class directions but dim is {}",
                    factor.name(),
                    layout.levels,
                    self.dim
                )));
            }
        }
        if self.sampling == Sampling::Grid {
            let product: usize = Factor::ALL
                .into_iter()
                .map(|f| self.layout(f).levels)
                .product();
            if product != self.n {
                return Err(CorpusError::BadSpec(format!(
                    "grid sampling needs n = product of levels = {product}, got {}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Generates the corpus described by `spec`.
///
/// The construction, for each sample `i` and layer `l`:
/// `x[i, l] = sum over factors assigned to l of loading(label) + sigma * eps`
/// with `eps` standard normal. Categorical loadings are orthonormal unit
/// directions per class; gloss contributes `(g - (levels-1)/2) * u` for a
/// fixed unit direction `u`. Layers with no assignment are pure noise.
/// Identical specs produce bit-identical corpora.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<EmbeddingCorpus, CorpusError> {
    spec.validate()?;
    let labels = draw_labels(spec);

    let mut data = Array3::<f32>::zeros((spec.n, spec.layers, spec.dim));
    {
        // One pass of noise in index order keeps the byte stream independent
        // of how the signal loop below is organized.
        let mut rng = task_rng(spec.seed, "synth-noise", 0);
        let sigma = spec.sigma;
        for v in data.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v = (sigma * e) as f32;
        }
    }

    for factor in Factor::ALL {
        let layout = spec.layout(factor);
        let column = labels.values(factor).to_vec();
        for &layer in &layout.layers {
            let loadings = factor_loadings(spec, factor, layout, layer);
            for (i, &label) in column.iter().enumerate() {
                let direction = loadings.row(label as usize);
                let mut cell = data.slice_mut(ndarray::s![i, layer, ..]);
                for (x, &u) in cell.iter_mut().zip(direction.iter()) {
                    *x += u as f32;
                }
            }
        }
    }

    EmbeddingCorpus::new(data, labels, Some(spec.seed))
}

/// Per-class loading vectors (`levels x dim`) for one factor on one layer.
///
/// Gloss rows are `(g - (levels-1)/2) * u` with `u` a seeded unit direction;
/// categorical rows are seeded orthonormal unit directions.
fn factor_loadings(
    spec: &SyntheticSpec,
    factor: Factor,
    layout: &FactorLayout,
    layer: usize,
) -> Array2<f64> {
    let mut rng = task_rng(
        spec.seed,
        &format!("synth-loading-{}", factor.name()),
        layer as u64,
    );
    if factor == Factor::Gloss {
        let mut u = Array1::<f64>::zeros(spec.dim);
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = u.dot(&u).sqrt();
        if norm > 0.0 {
            u.mapv_inplace(|v| v / norm);
        }
        let center = (layout.levels - 1) as f64 / 2.0;
        let mut loadings = Array2::<f64>::zeros((layout.levels, spec.dim));
        for g in 0..layout.levels {
            let scale = g as f64 - center;
            loadings.row_mut(g).assign(&(&u * scale));
        }
        loadings
    } else {
        let raw = Array2::<f64>::from_shape_fn((spec.dim, layout.levels), |_| {
            rng.sample(StandardNormal)
        });
        orthonormalize(raw).t().to_owned()
    }
}

fn draw_labels(spec: &SyntheticSpec) -> FactorTable {
    let mut columns: BTreeMap<Factor, Vec<u32>> = BTreeMap::new();
    match spec.sampling {
        Sampling::Uniform => {
            for factor in Factor::ALL {
                let levels = spec.layout(factor).levels as u32;
                let mut rng = task_rng(spec.seed, &format!("synth-labels-{}", factor.name()), 0);
                let column = (0..spec.n).map(|_| rng.gen_range(0..levels)).collect();
                columns.insert(factor, column);
            }
        }
        Sampling::Grid => {
            // Canonical nesting: gloss outermost, color innermost.
            let levels: Vec<usize> = Factor::ALL
                .into_iter()
                .map(|f| spec.layout(f).levels)
                .collect();
            let mut cols: Vec<Vec<u32>> = vec![Vec::with_capacity(spec.n); 5];
            for mut idx in 0..spec.n {
                for pos in (0..5).rev() {
                    cols[pos].push((idx % levels[pos]) as u32);
                    idx /= levels[pos];
                }
            }
            for (pos, factor) in Factor::ALL.into_iter().enumerate() {
                columns.insert(factor, std::mem::take(&mut cols[pos]));
            }
        }
    }

    let mut dictionaries = BTreeMap::new();
    for factor in Factor::ALL {
        if factor.is_categorical() {
            let names = (0..spec.layout(factor).levels)
                .map(|i| format!("{}_{i}", factor.name()))
                .collect();
            dictionaries.insert(factor.name().to_string(), names);
        }
    }
    FactorTable {
        gloss: columns.remove(&Factor::Gloss).unwrap(),
        style: columns.remove(&Factor::Style).unwrap(),
        geometry: columns.remove(&Factor::Geometry).unwrap(),
        illumination: columns.remove(&Factor::Illumination).unwrap(),
        color: columns.remove(&Factor::Color).unwrap(),
        dictionaries,
    }
}

/// Convenience spec used widely in tests: five factors with the default
/// level counts, gloss on `gloss_layer` and style on `style_layer`, all
/// other factors unencoded.
#[must_use]
pub fn two_factor_spec(
    n: usize,
    layers: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
    gloss_layer: usize,
    style_layer: usize,
) -> SyntheticSpec {
    SyntheticSpec {
        n,
        layers,
        dim,
        sigma,
        seed,
        sampling: Sampling::Uniform,
        gloss: FactorLayout::on_layers(7, &[gloss_layer]),
        style: FactorLayout::on_layers(3, &[style_layer]),
        geometry: FactorLayout::unencoded(4),
        illumination: FactorLayout::unencoded(4),
        color: FactorLayout::unencoded(6),
    }
}

/// Permutes labels within a slice, used by shuffling helpers in tests.
#[allow(dead_code)]
pub(crate) fn shuffle_in_place<T>(values: &mut [T], rng: &mut rand_chacha::ChaCha8Rng) {
    values.shuffle(rng);
}
