//! Small dense linear-algebra kernels shared by the analysis modules.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! thread-count-dependent reductions. The kernels are sized for this crate's
//! workloads (covariances up to ~1k x 1k, Gram matrices up to a few thousand)
//! and favor predictable numerics over peak speed.

use ndarray::{Array1, Array2, ArrayView2};

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
///
/// Returns `None` when a non-positive pivot is met, which callers surface as
/// a conditioning error.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);

    // Singular-to-working-precision matrices produce pivots that are tiny
    // relative to the diagonal rather than exactly zero.
    let mut diag_max = 0.0f64;
    for i in 0..n {
        diag_max = diag_max.max(a[[i, i]].abs());
    }
    let tol = diag_max * 1e-12;

    // Lower-triangular factor, row-major in a flat buffer.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= tol || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    // Forward then backward substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(Array1::from_vec(x))
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvectors are the columns of the returned matrix. Intended for the
/// moderate sizes used by whitening and symmetric decorrelation.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        fix_sign(col.as_slice_mut().expect("contiguous"));
        vectors.column_mut(dst).assign(&col);
    }
    (eigenvalues, vectors)
}

/// Principal components of a centered data matrix.
pub struct Pca {
    /// Column means of the input (length `d`).
    pub mean: Array1<f64>,
    /// Component directions as columns (`d x k`), orthonormal.
    pub components: Array2<f64>,
    /// Variance captured by each component, descending. Diagnostic: the
    /// production paths only project, but tests assert on the spectrum.
    #[allow(dead_code)]
    pub variances: Vec<f64>,
}

impl Pca {
    /// Projects rows of `x` onto the components: `(x - mean) . components`.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let centered = x.to_owned() - &self.mean.view().insert_axis(ndarray::Axis(0));
        centered.dot(&self.components)
    }
}

/// Fits the top `k` principal components of `x` (rows are samples).
///
/// Uses deterministic orthogonal subspace iteration on the covariance: the
/// iterate starts from canonical basis columns and refines until the Rayleigh
/// quotients stabilize. Only the spanned subspace matters to downstream
/// consumers (distances, projections), so near-isotropic spectra converge
/// quickly too.
pub fn fit_pca(x: ArrayView2<f64>, k: usize) -> Pca {
    let n = x.nrows();
    let d = x.ncols();
    let k = k.min(d);
    assert!(n >= 1 && k >= 1, "PCA needs at least one sample and component");

    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 1");
    let centered = x.to_owned() - &mean.view().insert_axis(ndarray::Axis(0));
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;

    if k == d {
        // Full-rank retention: any orthonormal basis of the full space gives
        // identical projections up to rotation; use the eigenbasis directly.
        let (vals, vecs) = symmetric_eigen(&cov);
        return Pca {
            mean,
            components: vecs,
            variances: vals,
        };
    }

    let mut q = Array2::<f64>::zeros((d, k));
    for j in 0..k {
        q[[j, j]] = 1.0;
    }
    let mut rayleigh = vec![0.0f64; k];
    for _ in 0..200 {
        let z = cov.dot(&q);
        let new_rayleigh: Vec<f64> = (0..k).map(|j| q.column(j).dot(&z.column(j))).collect();
        q = orthonormalize(z);
        let drift = new_rayleigh
            .iter()
            .zip(&rayleigh)
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
            .fold(0.0f64, f64::max);
        rayleigh = new_rayleigh;
        if drift <= 1e-10 {
            break;
        }
    }
    // Final Rayleigh quotients on the settled basis.
    let z = cov.dot(&q);
    let mut variances: Vec<f64> = (0..k).map(|j| q.column(j).dot(&z.column(j))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| variances[j].total_cmp(&variances[i]).then(i.cmp(&j)));
    let mut components = Array2::<f64>::zeros((d, k));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = q.column(src).to_owned();
        fix_sign(col.as_slice_mut().expect("contiguous"));
        components.column_mut(dst).assign(&col);
    }
    variances.sort_by(|a, b| b.total_cmp(a));
    Pca {
        mean,
        components,
        variances,
    }
}

/// Modified Gram-Schmidt with a deterministic fallback for rank-deficient
/// columns: a collapsed column is replaced by the first canonical basis
/// vector orthogonal to the ones already kept.
pub fn orthonormalize(mut m: Array2<f64>) -> Array2<f64> {
    let (d, k) = m.dim();
    for j in 0..k {
        for prev in 0..j {
            let proj = m.column(prev).dot(&m.column(j));
            let prev_col = m.column(prev).to_owned();
            m.column_mut(j).scaled_add(-proj, &prev_col);
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if norm > 1e-12 {
            m.column_mut(j).mapv_inplace(|v| v / norm);
        } else {
            'basis: for e in 0..d {
                let mut cand = Array1::<f64>::zeros(d);
                cand[e] = 1.0;
                for prev in 0..j {
                    let proj = m.column(prev).dot(&cand);
                    cand.scaled_add(-proj, &m.column(prev).to_owned());
                }
                let cnorm = cand.dot(&cand).sqrt();
                if cnorm > 1e-6 {
                    cand.mapv_inplace(|v| v / cnorm);
                    m.column_mut(j).assign(&cand);
                    break 'basis;
                }
            }
        }
    }
    m
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Flips a vector so its largest-magnitude entry is positive, making
/// eigenvector signs reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = -1.0f64;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_solves_known_system() {
        // A = [[4,2],[2,3]], b = [2,1] -> x = A^-1 b = [1/2, 0]
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![2.0, 1.0];
        let x = cholesky_solve(&a, &b).expect("SPD");
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        let b = array![1.0, 1.0];
        assert!(cholesky_solve(&a, &b).is_none());
    }

    #[test]
    fn jacobi_matches_hand_eigendecomposition() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1 with (1,1)/sqrt2, (1,-1)/sqrt2.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(vecs[[0, 0]], s, epsilon = 1e-10);
        assert_abs_diff_eq!(vecs[[1, 0]], s, epsilon = 1e-10);
        assert_abs_diff_eq!(vecs[[0, 1]].abs(), s, epsilon = 1e-10);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        use rand::Rng;
        let mut rng = crate::seeding::task_rng(11, "test-jacobi", 0);
        let n = 24;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(&a);
        // V diag(vals) V^T == A
        let mut rec = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            let col = vecs.column(k);
            for i in 0..n {
                for j in 0..n {
                    rec[[i, j]] += vals[k] * col[i] * col[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(rec[[i, j]], a[[i, j]], epsilon = 1e-9);
            }
        }
        // Orthonormal columns.
        for i in 0..n {
            for j in 0..n {
                let dot = vecs.column(i).dot(&vecs.column(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn pca_finds_dominant_direction() {
        use rand::Rng;
        let mut rng = crate::seeding::task_rng(3, "test-pca", 0);
        let n = 400;
        let d = 8;
        // Data = t * u + small noise, u = e0.
        let mut x = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            let t: f64 = rng.gen_range(-3.0..3.0);
            x[[i, 0]] = t;
            for j in 1..d {
                x[[i, j]] = rng.gen_range(-0.01..0.01);
            }
        }
        let pca = fit_pca(x.view(), 2);
        assert!(pca.components[[0, 0]].abs() > 0.999);
        assert!(pca.variances[0] > 100.0 * pca.variances[1]);
        // Projections are centered.
        let proj = pca.transform(x.view());
        let mean0 = proj.column(0).mean().unwrap();
        assert_abs_diff_eq!(mean0, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn full_rank_pca_preserves_pairwise_distances() {
        use rand::Rng;
        let mut rng = crate::seeding::task_rng(5, "test-pca-dist", 0);
        let n = 50;
        let d = 6;
        let x = Array2::<f64>::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let pca = fit_pca(x.view(), d);
        let proj = pca.transform(x.view());
        for i in 0..n {
            for j in (i + 1)..n {
                let orig: f64 = (0..d).map(|c| (x[[i, c]] - x[[j, c]]).powi(2)).sum();
                let red: f64 = (0..d).map(|c| (proj[[i, c]] - proj[[j, c]]).powi(2)).sum();
                assert_abs_diff_eq!(orig, red, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn orthonormalize_handles_rank_deficiency() {
        let m = array![[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]; // second col parallel to first
        let q = orthonormalize(m);
        let d01 = q.column(0).dot(&q.column(1));
        assert_abs_diff_eq!(d01, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.column(1).dot(&q.column(1)), 1.0, epsilon = 1e-9);
    }
}
