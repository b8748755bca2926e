//! Brushstroke-map arithmetic and image comparison metrics.
//!
//! A brushstroke map is the stabilized per-pixel ratio of a painted image to
//! its photorealistic render: s = clamp((painted + eps) / (rendered + eps),
//! 0, s_max). Applying a map multiplies a render by s and clamps back to the
//! unit range, transferring the stroke pattern onto new renders. Comparison
//! metrics (MSE, MAE, PSNR, windowed SSIM) quantify reconstruction quality.

mod io;
mod metrics;

use ndarray::{Array3, ArrayView3, Zip};
use thiserror::Error;

pub use io::MAP_MAGIC;
pub use metrics::{image_metrics, ImageMetrics};

/// Stability offset added to both numerator and denominator, so the ratio
/// tends to 1 as both channels darken.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Clamp ceiling for extracted maps.
pub const DEFAULT_S_MAX: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image must have 1 or 3 channels, got {0}")]
    BadChannels(usize),
    #[error("image values must be finite and within [0, 1]; found {value} at ({y}, {x}, {c})")]
    OutOfRange {
        value: f64,
        y: usize,
        x: usize,
        c: usize,
    },
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("s_max must exceed 1, got {0}")]
    BadSMax(f64),
    #[error("image is {h}x{w} but the SSIM window needs at least {window}x{window}")]
    TooSmallForSsim { window: usize, h: usize, w: usize },
    #[error("brushstroke map file is corrupt: {0}")]
    BadMapFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
}

/// An H x W x C image with values in [0, 1], C either 1 or 3.
///
/// Values are normalized sRGB as loaded from 8-bit PNG; no linearization is
/// applied anywhere, so all arithmetic happens in pixel space.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    data: Array3<f64>,
}

impl ImageBuffer {
    pub fn new(data: Array3<f64>) -> Result<Self, ImagingError> {
        let (_, _, c) = data.dim();
        if c != 1 && c != 3 {
            return Err(ImagingError::BadChannels(c));
        }
        for ((y, x, ch), &value) in data.indexed_iter() {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(ImagingError::OutOfRange {
                    value,
                    y,
                    x,
                    c: ch,
                });
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> ArrayView3<'_, f64> {
        self.data.view()
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    /// The buffer's color-space tag; all buffers hold normalized sRGB.
    pub fn color_space(&self) -> &'static str {
        "srgb-normalized"
    }
}

/// A nonnegative per-pixel gain field with its extraction parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BrushstrokeMap {
    data: Array3<f64>,
    epsilon: f64,
    s_max: f64,
}

impl BrushstrokeMap {
    pub fn data(&self) -> ArrayView3<'_, f64> {
        self.data.view()
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }
}

/// s = clamp((painted + eps) / (rendered + eps), 0, s_max), element-wise.
///
/// Where painted and rendered agree the map is exactly 1; dark regions in
/// both stay near 1 thanks to the symmetric offset.
pub fn extract_brushstroke_map(
    painted: &ImageBuffer,
    rendered: &ImageBuffer,
    epsilon: f64,
    s_max: f64,
) -> Result<BrushstrokeMap, ImagingError> {
    if painted.dim() != rendered.dim() {
        return Err(ImagingError::ShapeMismatch {
            a: painted.dim(),
            b: rendered.dim(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(ImagingError::BadEpsilon(epsilon));
    }
    if !(s_max > 1.0) {
        return Err(ImagingError::BadSMax(s_max));
    }
    let mut data = Array3::zeros(painted.dim());
    Zip::from(&mut data)
        .and(painted.data())
        .and(rendered.data())
        .for_each(|s, &p, &r| {
            *s = ((p + epsilon) / (r + epsilon)).clamp(0.0, s_max);
        });
    Ok(BrushstrokeMap {
        data,
        epsilon,
        s_max,
    })
}

/// out = clamp(rendered * s, 0, 1), element-wise.
///
/// This inverts extraction up to the epsilon offset and any clamping, so
/// a map extracted from one pair transfers its stroke pattern to other
/// renders of the same geometry.
pub fn apply_brushstroke_map(
    rendered: &ImageBuffer,
    map: &BrushstrokeMap,
) -> Result<ImageBuffer, ImagingError> {
    if rendered.dim() != map.dim() {
        return Err(ImagingError::ShapeMismatch {
            a: rendered.dim(),
            b: map.dim(),
        });
    }
    let mut data = Array3::zeros(rendered.dim());
    Zip::from(&mut data)
        .and(rendered.data())
        .and(map.data())
        .for_each(|out, &r, &s| {
            *out = (r * s).clamp(0.0, 1.0);
        });
    Ok(ImageBuffer { data })
}
