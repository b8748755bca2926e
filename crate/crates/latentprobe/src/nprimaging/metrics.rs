//! Full-reference image comparison metrics on unit-range buffers.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ImageBuffer, ImagingError};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Metric bundle for one reference/test pair.
///
/// `psnr_db` is `None` with `psnr_infinite` set when the images are
/// identical (MSE of zero has no finite decibel value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub mse: f64,
    pub mae: f64,
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: f64,
}

/// MSE and MAE over all elements, PSNR for unit dynamic range, and mean
/// valid-window SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
/// K2 = 0.03) computed per channel and averaged.
pub fn image_metrics(
    reference: &ImageBuffer,
    test: &ImageBuffer,
) -> Result<ImageMetrics, ImagingError> {
    if reference.dim() != test.dim() {
        return Err(ImagingError::ShapeMismatch {
            a: reference.dim(),
            b: test.dim(),
        });
    }
    let (h, w, channels) = reference.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(ImagingError::TooSmallForSsim {
            window: SSIM_WINDOW,
            h,
            w,
        });
    }

    let count = (h * w * channels) as f64;
    let (mut sq_sum, mut abs_sum) = (0.0, 0.0);
    for (&a, &b) in reference.data().iter().zip(test.data().iter()) {
        let d = a - b;
        sq_sum += d * d;
        abs_sum += d.abs();
    }
    let mse = sq_sum / count;
    let mae = abs_sum / count;
    let psnr_db = if mse == 0.0 {
        None
    } else {
        Some(-10.0 * mse.log10())
    };

    let kernel = gaussian_kernel();
    let mut ssim_sum = 0.0;
    for c in 0..channels {
        let x = plane(reference, c);
        let y = plane(test, c);
        ssim_sum += ssim_channel(&x, &y, &kernel);
    }
    let ssim = ssim_sum / channels as f64;

    Ok(ImageMetrics {
        mse,
        mae,
        psnr_infinite: psnr_db.is_none(),
        psnr_db,
        ssim,
    })
}

fn plane(image: &ImageBuffer, channel: usize) -> Array2<f64> {
    let (h, w, _) = image.dim();
    Array2::from_shape_fn((h, w), |(y, x)| image.data()[[y, x, channel]])
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut kernel = [0.0; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    for (i, k) in kernel.iter_mut().enumerate() {
        let d = i as f64 - center;
        *k = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= total;
    }
    kernel
}

/// Separable valid-mode convolution: the output drops the window margin.
fn blur_valid(plane: &Array2<f64>, kernel: &[f64; SSIM_WINDOW]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let w_out = w - SSIM_WINDOW + 1;
    let mut horizontal = Array2::zeros((h, w_out));
    for y in 0..h {
        for x in 0..w_out {
            let mut acc = 0.0;
            for (i, &g) in kernel.iter().enumerate() {
                acc += g * plane[[y, x + i]];
            }
            horizontal[[y, x]] = acc;
        }
    }
    let h_out = h - SSIM_WINDOW + 1;
    let mut out = Array2::zeros((h_out, w_out));
    for y in 0..h_out {
        for x in 0..w_out {
            let mut acc = 0.0;
            for (i, &g) in kernel.iter().enumerate() {
                acc += g * horizontal[[y + i, x]];
            }
            out[[y, x]] = acc;
        }
    }
    out
}

fn ssim_channel(x: &Array2<f64>, y: &Array2<f64>, kernel: &[f64; SSIM_WINDOW]) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let mu_x = blur_valid(x, kernel);
    let mu_y = blur_valid(y, kernel);
    let xx = blur_valid(&(x * x), kernel);
    let yy = blur_valid(&(y * y), kernel);
    let xy = blur_valid(&(x * y), kernel);

    let mut total = 0.0;
    for ((i, j), &mx) in mu_x.indexed_iter() {
        let my = mu_y[[i, j]];
        let sigma_x2 = xx[[i, j]] - mx * mx;
        let sigma_y2 = yy[[i, j]] - my * my;
        let sigma_xy = xy[[i, j]] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * sigma_xy + c2);
        let den = (mx * mx + my * my + c1) * (sigma_x2 + sigma_y2 + c2);
        total += num / den;
    }
    total / mu_x.len() as f64
}
