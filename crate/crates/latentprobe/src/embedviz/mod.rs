//! Unsupervised structure visualization.
//!
//! Two instruments: an exact (quadratic) t-SNE for projecting per-layer
//! embeddings to 2-D cluster plots, and a FastICA pipeline that discovers
//! independent brushstroke-like kernels from image patches and ranks them by
//! how much their response varies across artistic styles.

mod ica;
mod patches;
mod tsne;

pub use ica::{
    ica_basis, kernel_response, rank_kernels_by_style_variance, write_kernel_csv,
    write_kernel_sheet, IcaBasis, KernelRanking,
};
pub use patches::extract_patches;
pub use tsne::{tsne, TsneConfig, TsneResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TsneError {
    #[error("need at least 10 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} infeasible for {n} points; need 1 < perplexity < (n-1)/3")]
    BadPerplexity { perplexity: f64, n: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("non-finite value in input")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum IcaError {
    #[error("empty image set")]
    EmptyImageSet,
    #[error("patch size {patch} does not fit a {h}x{w} image")]
    PatchTooLarge { patch: usize, h: usize, w: usize },
    #[error("channel mismatch: basis expects {expected}, image has {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("matrix width {width} is not patch_size^2 * channels = {expected}")]
    ShapeMismatch { width: usize, expected: usize },
    #[error("whitened data has rank {rank}, below the requested {requested} components")]
    RankDeficient { rank: usize, requested: usize },
    #[error("fixed-point iteration did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("need at least two distinct styles to rank kernels")]
    SingleStyle,
    #[error("{labels} labels for {images} images")]
    LabelMismatch { labels: usize, images: usize },
    #[error("need at least {need} patches, got {got}")]
    TooFewPatches { got: usize, need: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image encoding: {0}")]
    Png(#[from] image::ImageError),
}
