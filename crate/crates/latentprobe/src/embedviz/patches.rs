//! Uniform patch sampling for kernel discovery.

use ndarray::{Array2, ArrayView3};
use rand::Rng;

use super::IcaError;
use crate::seeding::task_rng;

/// Samples `count` axis-aligned square patches uniformly across `images`
/// (uniform over images, then over valid positions).
///
/// Each patch is flattened row-major with channels innermost and its scalar
/// mean (over all values) removed, the standard preprocessing for
/// natural-image basis learning. Deterministic for a fixed seed.
pub fn extract_patches(
    images: &[ArrayView3<'_, f64>],
    patch_size: usize,
    count: usize,
    seed: u64,
) -> Result<Array2<f64>, IcaError> {
    if images.is_empty() {
        return Err(IcaError::EmptyImageSet);
    }
    let channels = images[0].dim().2;
    for img in images {
        let (h, w, c) = img.dim();
        if patch_size == 0 || patch_size > h || patch_size > w {
            return Err(IcaError::PatchTooLarge { patch: patch_size, h, w });
        }
        if c != channels {
            return Err(IcaError::ChannelMismatch { expected: channels, got: c });
        }
    }

    let width = patch_size * patch_size * channels;
    let mut out = Array2::zeros((count, width));
    let mut rng = task_rng(seed, "patch-sample", 0);
    for mut row in out.outer_iter_mut() {
        let img = &images[rng.gen_range(0..images.len())];
        let (h, w, _) = img.dim();
        let y0 = rng.gen_range(0..=h - patch_size);
        let x0 = rng.gen_range(0..=w - patch_size);
        let mut k = 0;
        let mut sum = 0.0;
        for dy in 0..patch_size {
            for dx in 0..patch_size {
                for c in 0..channels {
                    let v = img[[y0 + dy, x0 + dx, c]];
                    row[k] = v;
                    sum += v;
                    k += 1;
                }
            }
        }
        let mean = sum / width as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(out)
}
