//! FastICA kernel discovery over image patches.
//!
//! Pipeline: PCA whitening to the requested component count, symmetric
//! fixed-point iteration with the tanh contrast, then unit-normalized
//! sign-fixed kernels mapped back to patch space. Kernels can be convolved
//! with images (valid-mode cross-correlation) and ranked by how much their
//! mean absolute response varies across style classes.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, ArrayView3};
use rand_distr::{Distribution, StandardNormal};

use super::IcaError;
use crate::linalg::symmetric_eigen;
use crate::seeding::task_rng;

const MAX_ITER: usize = 500;
const CONVERGENCE_TOL: f64 = 1e-6;

/// An ICA kernel basis in patch space.
///
/// `kernels` rows are unit-norm with their largest-magnitude entry positive
/// (the component sign is arbitrary, so it is fixed canonically).
/// `ordering` and `scores` start as identity/zero and are filled in by
/// [`rank_kernels_by_style_variance`].
#[derive(Clone, Debug)]
pub struct IcaBasis {
    /// `n_components x (patch_size^2 * channels)`.
    pub kernels: Array2<f64>,
    /// Whitening projection, `n_components x dim`.
    pub whitening: Array2<f64>,
    /// Training-data mean subtracted before whitening.
    pub mean: Array1<f64>,
    pub patch_size: usize,
    pub channels: usize,
    /// Kernel indices sorted by descending style-variance score.
    pub ordering: Vec<usize>,
    /// Style-variance score per kernel (aligned with `kernels` rows).
    pub scores: Vec<f64>,
}

/// Learns `n_components` independent kernels from flattened patches.
///
/// The patch matrix must be `count x (patch_size^2 * channels)`. Whitening
/// keeps the top `n_components` principal directions and fails if the data
/// rank is lower; the fixed-point iteration stops once successive unmixing
/// rows are collinear within 1e-6, and reports the iteration count if 500
/// rounds are not enough.
pub fn ica_basis(
    patches: ArrayView2<'_, f64>,
    patch_size: usize,
    channels: usize,
    n_components: usize,
    seed: u64,
) -> Result<IcaBasis, IcaError> {
    let (n, width) = patches.dim();
    let expected = patch_size * patch_size * channels;
    if width != expected {
        return Err(IcaError::ShapeMismatch { width, expected });
    }
    let need = n_components.max(2);
    if n < need {
        return Err(IcaError::TooFewPatches { got: n, need });
    }

    let mean = patches
        .mean_axis(ndarray::Axis(0))
        .expect("nonempty patches");
    let centered = &patches - &mean.view().insert_axis(ndarray::Axis(0));
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let (vals, vecs) = symmetric_eigen(&cov);
    let vmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let rank = vals.iter().filter(|&&v| v > vmax * 1e-9 && v > 0.0).count();
    if n_components > rank {
        return Err(IcaError::RankDeficient {
            rank,
            requested: n_components,
        });
    }

    let mut whitening = Array2::zeros((n_components, width));
    for i in 0..n_components {
        let s = 1.0 / vals[i].sqrt();
        for j in 0..width {
            whitening[[i, j]] = vecs[[j, i]] * s;
        }
    }
    let z = centered.dot(&whitening.t());

    let mut rng = task_rng(seed, "ica-init", 0);
    let w0 = Array2::from_shape_fn((n_components, n_components), |_| {
        StandardNormal.sample(&mut rng)
    });
    let mut w = symmetric_decorrelate(w0).ok_or(IcaError::NotConverged(0))?;

    let mut converged = false;
    for _ in 0..MAX_ITER {
        let u = z.dot(&w.t());
        let g = u.mapv(f64::tanh);
        // E[z g(w.z)] - E[g'(w.z)] w, with g' = 1 - tanh^2.
        let mut w_new = g.t().dot(&z) / n as f64;
        for i in 0..n_components {
            let gpm = g.column(i).iter().map(|&v| 1.0 - v * v).sum::<f64>() / n as f64;
            let old = w.row(i).to_owned();
            w_new.row_mut(i).zip_mut_with(&old, |a, &b| *a -= gpm * b);
        }
        let w_next = symmetric_decorrelate(w_new).ok_or(IcaError::NotConverged(0))?;
        let mut delta = 0.0f64;
        for i in 0..n_components {
            let dot = w_next.row(i).dot(&w.row(i));
            delta = delta.max((1.0 - dot.abs()).abs());
        }
        w = w_next;
        if delta < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(IcaError::NotConverged(MAX_ITER));
    }

    let mut kernels = w.dot(&whitening);
    for mut row in kernels.outer_iter_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, &v)| v)
            .unwrap_or(0.0);
        if lead < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }

    Ok(IcaBasis {
        kernels,
        whitening,
        mean,
        patch_size,
        channels,
        ordering: (0..n_components).collect(),
        scores: vec![0.0; n_components],
    })
}

/// `(M M')^{-1/2} M`, which makes the rows exactly orthonormal.
fn symmetric_decorrelate(m: Array2<f64>) -> Option<Array2<f64>> {
    let mmt = m.dot(&m.t());
    let (vals, vecs) = symmetric_eigen(&mmt);
    let vmax = vals.first().copied().unwrap_or(0.0);
    if vmax <= 0.0 || vals.iter().any(|&v| v <= vmax * 1e-12) {
        return None;
    }
    let mut scaled = vecs.clone();
    for (i, &v) in vals.iter().enumerate() {
        let s = 1.0 / v.sqrt();
        scaled.column_mut(i).map_inplace(|x| *x *= s);
    }
    Some(scaled.dot(&vecs.t()).dot(&m))
}

/// Valid-mode cross-correlation of every kernel with `image` (H x W x C).
///
/// Response maps are `(H - patch + 1) x (W - patch + 1)`, one per kernel,
/// in kernel order.
pub fn kernel_response(
    image: ArrayView3<'_, f64>,
    basis: &IcaBasis,
) -> Result<Vec<Array2<f64>>, IcaError> {
    let (h, w, c) = image.dim();
    if c != basis.channels {
        return Err(IcaError::ChannelMismatch {
            expected: basis.channels,
            got: c,
        });
    }
    let ps = basis.patch_size;
    if ps > h || ps > w {
        return Err(IcaError::PatchTooLarge { patch: ps, h, w });
    }

    use rayon::prelude::*;
    let maps: Vec<Array2<f64>> = (0..basis.kernels.nrows())
        .into_par_iter()
        .map(|k| {
            let kernel = basis.kernels.row(k);
            let mut out = Array2::zeros((h - ps + 1, w - ps + 1));
            for y in 0..out.nrows() {
                for x in 0..out.ncols() {
                    let mut acc = 0.0;
                    let mut idx = 0;
                    for dy in 0..ps {
                        for dx in 0..ps {
                            for ch in 0..c {
                                acc += kernel[idx] * image[[y + dy, x + dx, ch]];
                                idx += 1;
                            }
                        }
                    }
                    out[[y, x]] = acc;
                }
            }
            out
        })
        .collect();
    Ok(maps)
}

/// Kernel indices sorted by descending style variance, plus the scores.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelRanking {
    pub ordering: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Scores each kernel by the variance, across style classes, of its mean
/// absolute response.
///
/// Absolute responses make the score invariant to the arbitrary ICA sign.
/// A kernel firing on one style's stroke texture but not the others gets a
/// large score; a kernel responding uniformly scores near zero.
pub fn rank_kernels_by_style_variance(
    basis: &IcaBasis,
    images: &[ArrayView3<'_, f64>],
    style_labels: &[u32],
) -> Result<KernelRanking, IcaError> {
    if images.is_empty() {
        return Err(IcaError::EmptyImageSet);
    }
    if images.len() != style_labels.len() {
        return Err(IcaError::LabelMismatch {
            labels: style_labels.len(),
            images: images.len(),
        });
    }
    let styles: Vec<u32> = {
        let mut s: Vec<u32> = style_labels.to_vec();
        s.sort_unstable();
        s.dedup();
        s
    };
    if styles.len() < 2 {
        return Err(IcaError::SingleStyle);
    }

    let k = basis.kernels.nrows();
    // mean |response| per (kernel, image)
    let mut per_image = Array2::zeros((k, images.len()));
    for (img_idx, img) in images.iter().enumerate() {
        let maps = kernel_response(*img, basis)?;
        for (kernel, map) in maps.iter().enumerate() {
            let total: f64 = map.iter().map(|v| v.abs()).sum();
            per_image[[kernel, img_idx]] = total / map.len() as f64;
        }
    }

    let mut by_style: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &s) in style_labels.iter().enumerate() {
        by_style.entry(s).or_default().push(i);
    }
    let mut scores = Vec::with_capacity(k);
    for kernel in 0..k {
        let means: Vec<f64> = by_style
            .values()
            .map(|members| {
                members
                    .iter()
                    .map(|&i| per_image[[kernel, i]])
                    .sum::<f64>()
                    / members.len() as f64
            })
            .collect();
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / means.len() as f64;
        scores.push(var);
    }
    let mut ordering: Vec<usize> = (0..k).collect();
    ordering.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(KernelRanking { ordering, scores })
}

/// Writes the kernels as a PNG contact sheet in ranking order (row-major
/// grid, 64 kernels give an 8x8 grid).
///
/// Each tile is the kernel rescaled so zero maps to mid-gray and the
/// largest magnitude to full contrast, upscaled 8x with a dark border.
pub fn write_kernel_sheet(basis: &IcaBasis, path: &Path) -> Result<(), IcaError> {
    if basis.channels != 1 && basis.channels != 3 {
        return Err(IcaError::ChannelMismatch {
            expected: 3,
            got: basis.channels,
        });
    }
    const SCALE: usize = 8;
    const BORDER: usize = 2;
    let k = basis.kernels.nrows();
    let ps = basis.patch_size;
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let tile = ps * SCALE + BORDER;
    let (height, width) = (rows * tile + BORDER, cols * tile + BORDER);
    let mut sheet = image::RgbImage::from_pixel(width as u32, height as u32, image::Rgb([16, 16, 16]));

    for (slot, &kernel) in basis.ordering.iter().enumerate() {
        let row = basis.kernels.row(kernel);
        let magnitude = row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
        let (gy, gx) = (slot / cols, slot % cols);
        for dy in 0..ps {
            for dx in 0..ps {
                let mut rgb = [0u8; 3];
                for ch in 0..3 {
                    let source = if basis.channels == 1 { 0 } else { ch };
                    let v = row[(dy * ps + dx) * basis.channels + source];
                    rgb[ch] = ((v / magnitude + 1.0) / 2.0 * 255.0).round() as u8;
                }
                for sy in 0..SCALE {
                    for sx in 0..SCALE {
                        let px = (gx * tile + BORDER + dx * SCALE + sx) as u32;
                        let py = (gy * tile + BORDER + dy * SCALE + sy) as u32;
                        sheet.put_pixel(px, py, image::Rgb(rgb));
                    }
                }
            }
        }
    }
    sheet.save(path)?;
    Ok(())
}

/// Writes the raw kernel matrix, one CSV row per kernel in storage order.
pub fn write_kernel_csv<W: std::io::Write>(basis: &IcaBasis, mut writer: W) -> Result<(), IcaError> {
    for row in basis.kernels.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array3};
    use rand::Rng;

    use super::*;
    use crate::seeding::task_rng;

    /// Laplace(0, 1) via inverse CDF.
    fn laplace(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen::<f64>() - 0.5;
        -u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    fn mixed_laplacian_patches(n: usize, sources: usize, width: usize) -> (Array2<f64>, Array2<f64>) {
        let mut rng = task_rng(71, "ica-sources", 0);
        let s = Array2::from_shape_fn((n, sources), |_| laplace(&mut rng));
        let a = Array2::from_shape_fn((sources, width), |_| {
            StandardNormal.sample(&mut rng)
        });
        (s.dot(&a), s)
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b.iter()) {
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
            sab += (x - ma) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn whitening_yields_identity_covariance() {
        let (patches, _) = mixed_laplacian_patches(10_000, 4, 16);
        let basis = ica_basis(patches.view(), 4, 1, 4, 7).unwrap();
        let centered = &patches - &basis.mean.view().insert_axis(ndarray::Axis(0));
        let z = centered.dot(&basis.whitening.t());
        let cov = z.t().dot(&z) / (z.nrows() - 1) as f64;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(cov[[i, j]], expected, epsilon = 1e-6);
            }
        }
        for row in basis.kernels.outer_iter() {
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn recovers_mixed_laplacian_sources() {
        let (patches, sources) = mixed_laplacian_patches(10_000, 4, 16);
        let basis = ica_basis(patches.view(), 4, 1, 4, 7).unwrap();
        let centered = &patches - &basis.mean.view().insert_axis(ndarray::Axis(0));
        let recovered = centered.dot(&basis.kernels.t());

        let mut used = [false; 4];
        for comp in 0..4 {
            let rec: Vec<f64> = recovered.column(comp).to_vec();
            let (mut best, mut best_src) = (0.0f64, usize::MAX);
            for src in 0..4 {
                if used[src] {
                    continue;
                }
                let truth: Vec<f64> = sources.column(src).to_vec();
                let c = correlation(&rec, &truth).abs();
                if c > best {
                    best = c;
                    best_src = src;
                }
            }
            used[best_src] = true;
            assert!(best >= 0.95, "component {comp} best |corr| {best}");
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (patches, _) = mixed_laplacian_patches(2_000, 3, 9);
        let a = ica_basis(patches.view(), 3, 1, 3, 11).unwrap();
        let b = ica_basis(patches.view(), 3, 1, 3, 11).unwrap();
        assert_eq!(a.kernels, b.kernels);
    }

    #[test]
    fn rank_deficient_data_is_rejected() {
        let (patches, _) = mixed_laplacian_patches(5_000, 2, 16);
        match ica_basis(patches.view(), 4, 1, 4, 7) {
            Err(IcaError::RankDeficient { rank, requested }) => {
                assert_eq!(rank, 2);
                assert_eq!(requested, 4);
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let patches = Array2::<f64>::zeros((100, 15));
        assert!(matches!(
            ica_basis(patches.view(), 4, 1, 4, 7),
            Err(IcaError::ShapeMismatch { width: 15, expected: 16 })
        ));
    }

    fn delta_basis(ps: usize, at: usize) -> IcaBasis {
        let width = ps * ps;
        let mut kernels = Array2::zeros((1, width));
        kernels[[0, at]] = 1.0;
        IcaBasis {
            kernels,
            whitening: Array2::zeros((1, width)),
            mean: Array1::zeros(width),
            patch_size: ps,
            channels: 1,
            ordering: vec![0],
            scores: vec![0.0],
        }
    }

    #[test]
    fn center_delta_kernel_reads_the_interior() {
        let img = Array3::from_shape_fn((5, 6, 1), |(y, x, _)| (y * 10 + x) as f64);
        let basis = delta_basis(3, 4); // center of a 3x3 patch
        let maps = kernel_response(img.view(), &basis).unwrap();
        assert_eq!(maps.len(), 1);
        assert_eq!(maps[0].dim(), (3, 4));
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(maps[0][[y, x]], img[[y + 1, x + 1, 0]]);
            }
        }
    }

    #[test]
    fn zero_mean_kernel_ignores_constant_images() {
        let mut basis = delta_basis(2, 0);
        basis.kernels = array![[0.5, -0.5, 0.5, -0.5]];
        let img = Array3::from_elem((6, 6, 1), 3.25);
        let maps = kernel_response(img.view(), &basis).unwrap();
        for v in maps[0].iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_correlation() {
        let img = Array3::from_shape_fn((4, 4, 1), |(y, x, _)| (y * 4 + x + 1) as f64);
        let mut basis = delta_basis(3, 0);
        basis.kernels =
            array![[1.0, 0.0, -1.0, 2.0, 0.5, 0.0, -0.5, 1.0, 0.25]];
        let maps = kernel_response(img.view(), &basis).unwrap();
        assert_eq!(maps[0].dim(), (2, 2));
        // Independent accumulation, term by term.
        let k = &basis.kernels;
        for oy in 0..2 {
            for ox in 0..2 {
                let mut expected = 0.0;
                for (idx, dydx) in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]
                    .iter()
                    .enumerate()
                {
                    expected += k[[0, idx]] * img[[oy + dydx.0, ox + dydx.1, 0]];
                }
                assert_abs_diff_eq!(maps[0][[oy, ox]], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn response_is_linear_in_the_image() {
        let mut rng = task_rng(73, "ica-linear", 0);
        let img1 = Array3::from_shape_fn((6, 7, 2), |_| rng.gen::<f64>());
        let img2 = Array3::from_shape_fn((6, 7, 2), |_| rng.gen::<f64>());
        let mut kernels = Array2::zeros((2, 18));
        for v in kernels.iter_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let basis = IcaBasis {
            kernels,
            whitening: Array2::zeros((2, 18)),
            mean: Array1::zeros(18),
            patch_size: 3,
            channels: 2,
            ordering: vec![0, 1],
            scores: vec![0.0, 0.0],
        };
        let (a, b) = (2.5, -1.25);
        let combined = img1.mapv(|v| a * v) + img2.mapv(|v| b * v);
        let r1 = kernel_response(img1.view(), &basis).unwrap();
        let r2 = kernel_response(img2.view(), &basis).unwrap();
        let rc = kernel_response(combined.view(), &basis).unwrap();
        for k in 0..2 {
            for (c, (x, y)) in rc[k].iter().zip(r1[k].iter().zip(r2[k].iter())) {
                assert_abs_diff_eq!(*c, a * x + b * y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn discriminative_kernel_ranks_first() {
        // Kernel 0 fires on vertical stripes, kernel 1 on horizontal ones.
        let mut kernels = Array2::zeros((2, 4));
        kernels.row_mut(0).assign(&ndarray::arr1(&[0.5, -0.5, 0.5, -0.5]));
        kernels.row_mut(1).assign(&ndarray::arr1(&[0.5, 0.5, -0.5, -0.5]));
        let basis = IcaBasis {
            kernels,
            whitening: Array2::zeros((2, 4)),
            mean: Array1::zeros(4),
            patch_size: 2,
            channels: 1,
            ordering: vec![0, 1],
            scores: vec![0.0, 0.0],
        };
        let stripes = Array3::from_shape_fn((6, 6, 1), |(_, x, _)| (x % 2) as f64);
        let flat = Array3::from_elem((6, 6, 1), 0.5);
        let images = [stripes.view(), flat.view(), stripes.view(), flat.view()];
        let labels = [0u32, 1, 0, 1];
        let ranking = rank_kernels_by_style_variance(&basis, &images, &labels).unwrap();
        assert_eq!(ranking.ordering[0], 0);
        assert!(ranking.scores[0] > 0.0);
        assert_eq!(ranking.scores[1], 0.0);
    }

    #[test]
    fn identical_style_sets_score_zero() {
        let basis = delta_basis(2, 1);
        let img = Array3::from_shape_fn((5, 5, 1), |(y, x, _)| (y * x) as f64);
        let images = [img.view(), img.view()];
        let ranking = rank_kernels_by_style_variance(&basis, &images, &[0, 1]).unwrap();
        assert_eq!(ranking.scores, vec![0.0]);
    }

    #[test]
    fn ranking_needs_two_styles() {
        let basis = delta_basis(2, 0);
        let img = Array3::zeros((4, 4, 1));
        assert!(matches!(
            rank_kernels_by_style_variance(&basis, &[img.view()], &[3]),
            Err(IcaError::SingleStyle)
        ));
    }

    #[test]
    fn exports_sheet_and_matrix() {
        let (patches, _) = mixed_laplacian_patches(2_000, 4, 16);
        let basis = ica_basis(patches.view(), 4, 1, 4, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("kernels.png");
        write_kernel_sheet(&basis, &png).unwrap();
        let sheet = image::open(&png).unwrap();
        // 4 kernels in a 2x2 grid of (4*8 + 2)-px tiles plus outer border.
        assert_eq!(sheet.width(), (2 * (4 * 8 + 2) + 2) as u32);
        assert_eq!(sheet.height(), (2 * (4 * 8 + 2) + 2) as u32);

        let mut csv = Vec::new();
        write_kernel_csv(&basis, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 4);
        for row in rows {
            assert_eq!(row.split(',').count(), 16);
            for field in row.split(',') {
                field.parse::<f64>().unwrap();
            }
        }
    }
}
