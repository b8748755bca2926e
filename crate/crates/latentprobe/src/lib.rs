//! Layer-wise analysis toolkit for extended ("per-layer") latent spaces.
//!
//! The crate operates on embedding corpora shaped `N x L x D`: `N` samples,
//! each represented by `L` per-layer latent vectors of dimension `D`, with
//! per-sample factor labels (gloss, style, geometry, illumination, color).
//! On top of that corpus type it provides:
//!
//! - [`corpus`]: the binary tensor format, label tables, manifests, and a
//!   synthetic corpus generator with known factor-to-layer assignments.
//! - [`infotheory`]: permutation-debiased conditional mutual information
//!   between layer embeddings and factor labels, and per-layer MI profiles.
//! - [`factoraxis`]: ridge-regression factor axes (gloss), cross-validated
//!   metrics, and layer-uniqueness importance via permute-and-refit.
//! - [`embedviz`]: exact t-SNE with perplexity calibration, patch extraction,
//!   and FastICA kernel discovery with style-variance ranking.
//! - [`genmetrics`]: latent-space regularization compactness, perceptual path
//!   length, rank products, and preference statistics.
//! - [`nprimaging`]: brushstroke-map extraction/application and image quality
//!   metrics (MSE, MAE, PSNR, windowed SSIM).
//! - [`reporting`]: deterministic JSON analysis reports and SVG plots.
//!
//! Determinism is a contract throughout: every stochastic step derives its
//! RNG stream from an explicit seed via [`seeding::derive_seed`], and no
//! result depends on thread count or scheduling.

pub mod corpus;
pub mod embedviz;
pub mod factoraxis;
pub mod genmetrics;
pub mod infotheory;
pub mod nprimaging;
pub mod reporting;
pub mod seeding;

pub(crate) mod linalg;
