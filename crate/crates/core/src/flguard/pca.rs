//! Two-component PCA by power iteration with deflation.
//!
//! Wide inputs (more features than rows) are handled in the row-space Gram
//! domain: `X X^T` shares its nonzero spectrum with the covariance, so the
//! iteration runs on an n-by-n matrix and the projections fall out as the
//! scaled left singular vectors. Narrow inputs iterate the implicit
//! covariance operator directly. Both routes compute the same projections.

use crate::error::{Result, SimError};
use crate::linalg::{self, Matrix};

const MAX_ITERS: usize = 1000;
/// Eigen-residual tolerance relative to the total variance scale.
const TOL: f64 = 1e-13;

/// Project rows onto the top two principal directions of their covariance.
///
/// Rows are mean-centered first. Components come out in descending
/// explained-variance order, and each direction's sign is fixed so that its
/// largest-magnitude loading is positive (lowest index on ties).
pub fn pca2(h: &Matrix) -> Result<Matrix> {
    let n = h.rows();
    if n < 2 {
        return Err(SimError::Input(format!("PCA needs at least 2 rows, got {n}")));
    }
    let d = h.cols();
    if d < 2 {
        return Err(SimError::Config(format!(
            "PCA to 2 components needs at least 2 features, got {d}"
        )));
    }

    let means = h.column_means();
    let mut centered = h.clone();
    for i in 0..n {
        for (x, &m) in centered.row_mut(i).iter_mut().zip(&means) {
            *x -= m;
        }
    }

    if d > n {
        pca2_gram(&centered)
    } else {
        pca2_feature_space(&centered)
    }
}

/// Direct route: power iteration on the implicit covariance `v -> X^T(X v)`.
fn pca2_feature_space(centered: &Matrix) -> Result<Matrix> {
    let n = centered.rows();
    let d = centered.cols();
    let trace: f64 = centered.data().iter().map(|x| x * x).sum();

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut variances = [0.0f64; 2];
    for c in 0..2 {
        let mut v = deterministic_unit_vector(d, c as u64);
        orthogonalize(&mut v, &components);
        renormalize(&mut v);
        for _ in 0..MAX_ITERS {
            let mut next = apply_covariance(centered, &v);
            orthogonalize(&mut next, &components);
            // eigen-residual check keeps the previous (already orthogonal)
            // iterate when the deflated operator has nothing left to say
            let lambda = linalg::dot(&next, &v);
            let mut resid = next.clone();
            linalg::axpy(-lambda, &v, &mut resid);
            if linalg::l2_norm(&resid) <= TOL * trace.max(1e-300) {
                break;
            }
            let norm = linalg::l2_norm(&next);
            if norm < 1e-300 {
                break;
            }
            linalg::scale(1.0 / norm, &mut next);
            // re-orthogonalize after normalization so rounding remainders
            // cannot reintroduce earlier components
            orthogonalize(&mut next, &components);
            renormalize(&mut next);
            v = next;
        }
        fix_sign(&mut v);
        let proj = matvec(centered, &v);
        variances[c] = linalg::dot(&proj, &proj);
        components.push(v);
    }

    // deflation should already order them, but an unconverged iteration on
    // near-equal eigenvalues can swap; enforce the ordering
    if variances[1] > variances[0] {
        components.swap(0, 1);
    }

    let mut out = Matrix::zeros(n, 2);
    for (c, comp) in components.iter().enumerate() {
        let proj = matvec(centered, comp);
        for i in 0..n {
            out[(i, c)] = proj[i];
        }
    }
    Ok(out)
}

/// Wide route: eigenvectors of the n-by-n Gram matrix `X X^T`. For a left
/// pair `(sigma^2, u)` the principal direction is `X^T u / sigma` and the
/// projections are `sigma * u`.
fn pca2_gram(centered: &Matrix) -> Result<Matrix> {
    let n = centered.rows();
    let mut gram = Matrix::zeros(n, n);
    linalg::gemm(1.0, centered, false, centered, true, 0.0, &mut gram);
    let trace: f64 = (0..n).map(|i| gram[(i, i)]).sum();

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut sigmas = [0.0f64; 2];
    for c in 0..2 {
        let mut u = deterministic_unit_vector(n, c as u64);
        orthogonalize(&mut u, &left);
        renormalize(&mut u);
        let mut lambda = 0.0;
        for _ in 0..MAX_ITERS {
            let mut next = matvec(&gram, &u);
            orthogonalize(&mut next, &left);
            lambda = linalg::dot(&next, &u);
            let mut resid = next.clone();
            linalg::axpy(-lambda, &u, &mut resid);
            if linalg::l2_norm(&resid) <= TOL * trace.max(1e-300) {
                break;
            }
            let norm = linalg::l2_norm(&next);
            if norm < 1e-300 {
                break;
            }
            linalg::scale(1.0 / norm, &mut next);
            orthogonalize(&mut next, &left);
            renormalize(&mut next);
            u = next;
        }
        sigmas[c] = lambda.max(0.0).sqrt();
        left.push(u);
    }
    if sigmas[1] > sigmas[0] {
        left.swap(0, 1);
        sigmas.swap(0, 1);
    }

    let mut out = Matrix::zeros(n, 2);
    for c in 0..2 {
        // principal direction in feature space fixes the component sign
        let mut direction = matvec_transposed(centered, &left[c]);
        renormalize(&mut direction);
        let flip = sign_flip_needed(&direction);
        for i in 0..n {
            let value = sigmas[c] * left[c][i];
            out[(i, c)] = if flip { -value } else { value };
        }
    }
    Ok(out)
}

/// `X v` for row-major `X`.
fn matvec(x: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..x.rows()).map(|i| linalg::dot(x.row(i), v)).collect()
}

/// `X^T u` for row-major `X`.
fn matvec_transposed(x: &Matrix, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for (i, &ui) in u.iter().enumerate() {
        linalg::axpy(ui, x.row(i), &mut out);
    }
    out
}

/// `X^T (X v)`.
fn apply_covariance(x: &Matrix, v: &[f64]) -> Vec<f64> {
    let xv = matvec(x, v);
    matvec_transposed(x, &xv)
}

/// Seed-free deterministic start vector, distinct per component.
fn deterministic_unit_vector(d: usize, which: u64) -> Vec<f64> {
    let mut v = Vec::with_capacity(d);
    let mut state = 0x243f_6a88_85a3_08d3u64 ^ which.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for _ in 0..d {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        // map to (-1, 1)
        v.push((z >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0);
    }
    v
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj = linalg::dot(v, b);
        linalg::axpy(-proj, b, v);
    }
}

fn renormalize(v: &mut [f64]) {
    let norm = linalg::l2_norm(v);
    if norm > 0.0 {
        linalg::scale(1.0 / norm, v);
    }
}

fn sign_flip_needed(v: &[f64]) -> bool {
    let mut best = 0;
    for (j, x) in v.iter().enumerate().skip(1) {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    v[best] < 0.0
}

/// Flip so the largest-magnitude loading (lowest index on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    if sign_flip_needed(v) {
        linalg::scale(-1.0, v);
    }
}
