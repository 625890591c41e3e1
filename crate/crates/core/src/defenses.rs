//! Baseline byzantine-robust aggregation rules: Trimmed-Mean, Multi-Krum,
//! Bulyan, DnC, and FLTrust.
//!
//! All aggregators are pure functions over an update matrix (one row per
//! client) and are invariant to row permutation up to the reported selected
//! set. Rules that make a per-client accept/reject decision return it in
//! [`Selection::selected`]; dimension-wise rules (trimmed mean) have no such
//! decision.

use crate::error::{Result, SimError};
use crate::linalg::{self, Matrix};
use crate::nn::UpdateVector;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Outcome of a vector-wise aggregation rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Client row indices kept by the rule, ascending.
    pub selected: Vec<usize>,
    pub aggregate: UpdateVector,
}

/// Per-dimension trimmed mean: drop the `m` smallest and `m` largest values
/// of every column, average the rest.
pub fn trimmed_mean(updates: &Matrix, m: usize) -> Result<UpdateVector> {
    let n = updates.rows();
    if n == 0 {
        return Err(SimError::Aggregation("no updates to aggregate".into()));
    }
    if n <= 2 * m {
        return Err(SimError::Config(format!(
            "trimmed mean needs more than 2m = {} rows, got {n}",
            2 * m
        )));
    }
    let d = updates.cols();
    let mut out = vec![0.0; d];
    let mut col = vec![0.0; n];
    for j in 0..d {
        for i in 0..n {
            col[i] = updates[(i, j)];
        }
        col.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite update entries"));
        let kept = &col[m..n - m];
        out[j] = kept.iter().sum::<f64>() / kept.len() as f64;
    }
    Ok(UpdateVector::from_vec(out))
}

fn pairwise_sq_dists(updates: &Matrix) -> Vec<Vec<f64>> {
    let n = updates.rows();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = linalg::squared_distance(updates.row(i), updates.row(j));
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Krum-style iterative selection. Scores every remaining row by the sum of
/// squared distances to its `n_visible - m_assumed - 2` nearest remaining
/// neighbors, moves the lowest-scoring row into the selected set, and
/// repeats until `count` rows are selected. Scores are recomputed over the
/// shrinking pool; ties break to the lower row index.
fn krum_select(updates: &Matrix, m_assumed: usize, count: usize) -> Result<Vec<usize>> {
    let n = updates.rows();
    if n < m_assumed + 3 {
        return Err(SimError::Config(format!(
            "krum selection needs n >= M + 3 (n = {n}, M = {m_assumed})"
        )));
    }
    let dists = pairwise_sq_dists(updates);
    let neighbor_target = n - m_assumed - 2;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut selected = Vec::with_capacity(count);
    while selected.len() < count {
        let k = neighbor_target.min(remaining.len() - 1);
        let mut best: Option<(f64, usize)> = None;
        for &i in &remaining {
            let mut ds: Vec<f64> = remaining
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dists[i][j])
                .collect();
            ds.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let score: f64 = ds[..k].iter().sum();
            let better = match best {
                None => true,
                Some((s, bi)) => score < s || (score == s && i < bi),
            };
            if better {
                best = Some((score, i));
            }
        }
        let (_, pick) = best.expect("remaining pool is non-empty");
        selected.push(pick);
        remaining.retain(|&j| j != pick);
    }
    selected.sort_unstable();
    Ok(selected)
}

fn mean_of_rows(updates: &Matrix, rows: &[usize]) -> UpdateVector {
    let mut acc = vec![0.0; updates.cols()];
    for &i in rows {
        linalg::axpy(1.0, updates.row(i), &mut acc);
    }
    linalg::scale(1.0 / rows.len() as f64, &mut acc);
    UpdateVector::from_vec(acc)
}

/// Multi-Krum: iteratively select `c` rows where `c` is the largest value
/// with `N - c > 2M + 2`, then average them.
pub fn multi_krum(updates: &Matrix, m_assumed: usize) -> Result<Selection> {
    let n = updates.rows();
    let c = n as i64 - 2 * m_assumed as i64 - 3;
    if c < 1 {
        return Err(SimError::Config(format!(
            "multi-krum infeasible: no c >= 1 with N - c > 2M + 2 (N = {n}, M = {m_assumed})"
        )));
    }
    let selected = krum_select(updates, m_assumed, c as usize)?;
    let aggregate = mean_of_rows(updates, &selected);
    Ok(Selection {
        selected,
        aggregate,
    })
}

/// Bulyan: krum-select `theta = N - 2M` rows, then take the per-dimension
/// trimmed mean with `m = M` over the selected rows.
pub fn bulyan(updates: &Matrix, m_assumed: usize) -> Result<Selection> {
    let n = updates.rows();
    let theta = n as i64 - 2 * m_assumed as i64;
    if theta <= 2 * m_assumed as i64 {
        return Err(SimError::Config(format!(
            "bulyan infeasible: theta = N - 2M = {theta} must exceed 2M = {}",
            2 * m_assumed
        )));
    }
    let selected = krum_select(updates, m_assumed, theta as usize)?;
    let picked = updates.select_rows(&selected);
    let aggregate = trimmed_mean(&picked, m_assumed)?;
    Ok(Selection {
        selected,
        aggregate,
    })
}

/// Top right singular direction of a centered matrix, by power iteration on
/// the implicit Gram operator `v -> C^T (C v)`.
fn top_right_singular_vector(centered: &Matrix, rng: &mut ChaCha8Rng, iters: usize) -> Vec<f64> {
    use rand::Rng;
    let d = centered.cols();
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = linalg::l2_norm(&v);
    linalg::scale(1.0 / norm.max(f64::MIN_POSITIVE), &mut v);
    let vm = Matrix::from_vec(d, 1, v).expect("sized");
    let mut v = vm;
    let mut cu = Matrix::zeros(centered.rows(), 1);
    for _ in 0..iters {
        linalg::gemm(1.0, centered, false, &v, false, 0.0, &mut cu);
        let mut next = Matrix::zeros(d, 1);
        linalg::gemm(1.0, centered, true, &cu, false, 0.0, &mut next);
        let norm = linalg::l2_norm(next.data());
        if norm < 1e-300 {
            // rank-zero residual; any unit vector works
            break;
        }
        linalg::scale(1.0 / norm, next.data_mut());
        let drift: f64 = 1.0 - linalg::dot(next.data(), v.data()).abs();
        v = next;
        if drift < 1e-10 {
            break;
        }
    }
    v.into_data()
}

/// Divide-and-conquer aggregation. Each iteration samples `subdim`
/// coordinates, centers the sub-matrix, scores rows by their squared
/// projection on the top right singular direction, and discards the
/// `ceil(e * M)` highest scores. Rows surviving every iteration are averaged.
pub fn dnc(
    updates: &Matrix,
    m_assumed: usize,
    e: f64,
    iters: usize,
    subdim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Selection> {
    let n = updates.rows();
    if n == 0 {
        return Err(SimError::Aggregation("no updates to aggregate".into()));
    }
    if e <= 0.0 {
        return Err(SimError::Config(format!("dnc parameter e = {e} must be > 0")));
    }
    let remove = (e * m_assumed as f64).ceil() as usize;
    if remove >= n {
        return Err(SimError::Config(format!(
            "dnc would remove ceil(e*M) = {remove} of {n} rows"
        )));
    }
    let d = updates.cols();
    let sub = subdim.min(d);
    let mut survivors: Vec<bool> = vec![true; n];
    for _ in 0..iters.max(1) {
        let mut coords: Vec<usize> = (0..d).collect();
        coords.shuffle(rng);
        coords.truncate(sub);
        coords.sort_unstable();
        let mut sample = updates.select_cols(&coords);
        let means = sample.column_means();
        for i in 0..n {
            for (x, &mu) in sample.row_mut(i).iter_mut().zip(&means) {
                *x -= mu;
            }
        }
        let v = top_right_singular_vector(&sample, rng, 100);
        let mut scores: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let p = linalg::dot(sample.row(i), &v);
                (p * p, i)
            })
            .collect();
        // highest score first; ties drop the lower index
        scores.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
        for &(_, i) in scores.iter().take(remove) {
            survivors[i] = false;
        }
    }
    let selected: Vec<usize> = (0..n).filter(|&i| survivors[i]).collect();
    if selected.is_empty() {
        return Err(SimError::Aggregation(
            "dnc removed every row across iterations".into(),
        ));
    }
    let aggregate = mean_of_rows(updates, &selected);
    Ok(Selection {
        selected,
        aggregate,
    })
}

/// FLTrust aggregation against a server-computed root update.
///
/// Each client's trust score is the ReLU-clipped cosine similarity to
/// `server_update`; client updates are rescaled to the server update's norm
/// and combined by trust-weighted average. Returns the zero vector when all
/// trust scores vanish.
pub fn fltrust(updates: &Matrix, server_update: &UpdateVector) -> Result<Selection> {
    let n = updates.rows();
    if n == 0 {
        return Err(SimError::Aggregation("no updates to aggregate".into()));
    }
    let g0 = server_update.as_slice();
    let g0_norm = linalg::l2_norm(g0);
    if g0_norm == 0.0 {
        return Err(SimError::Degenerate(
            "server root update has zero norm".into(),
        ));
    }
    let mut acc = vec![0.0; updates.cols()];
    let mut ts_sum = 0.0;
    let mut selected = Vec::new();
    for i in 0..n {
        let gi = updates.row(i);
        let gi_norm = linalg::l2_norm(gi);
        if gi_norm == 0.0 {
            continue;
        }
        let cos = linalg::dot(gi, g0) / (gi_norm * g0_norm);
        let ts = cos.max(0.0);
        if ts > 0.0 {
            selected.push(i);
            ts_sum += ts;
            linalg::axpy(ts * g0_norm / gi_norm, gi, &mut acc);
        }
    }
    if ts_sum > 0.0 {
        linalg::scale(1.0 / ts_sum, &mut acc);
    }
    Ok(Selection {
        selected,
        aggregate: UpdateVector::from_vec(acc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn matrix(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn trimmed_mean_m0_is_mean() {
        let u = matrix(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let out = trimmed_mean(&u, 0).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn trimmed_mean_drops_outlier() {
        let u = matrix(&[&[1.0], &[2.0], &[3.0], &[4.0], &[100.0]]);
        let out = trimmed_mean(&u, 1).unwrap();
        assert_eq!(out.as_slice(), &[3.0]);
    }

    #[test]
    fn trimmed_mean_rejects_overtrim() {
        let u = matrix(&[&[1.0], &[2.0]]);
        assert!(matches!(
            trimmed_mean(&u, 1).unwrap_err(),
            SimError::Config(_)
        ));
    }

    #[test]
    fn trimmed_mean_row_permutation_invariant() {
        let u = matrix(&[&[1.0, 5.0], &[9.0, -2.0], &[4.0, 0.0], &[2.0, 2.0], &[0.0, 1.0]]);
        let p = matrix(&[&[0.0, 1.0], &[4.0, 0.0], &[9.0, -2.0], &[1.0, 5.0], &[2.0, 2.0]]);
        assert_eq!(
            trimmed_mean(&u, 1).unwrap().as_slice(),
            trimmed_mean(&p, 1).unwrap().as_slice()
        );
    }

    #[test]
    fn multi_krum_c_formula() {
        // N=6, M=1: largest c with 6 - c > 4 is c = 1
        let mut rng = stream_rng(3, Stream::Defense, 0, 0);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let u = Matrix::from_rows(&rows).unwrap();
        let sel = multi_krum(&u, 1).unwrap();
        assert_eq!(sel.selected.len(), 1);
    }

    #[test]
    fn multi_krum_excludes_far_outlier() {
        // 5 near-identical rows + 1 far outlier, M=1 -> c=1.. select near rows only
        let u = matrix(&[
            &[1.0, 1.0],
            &[1.01, 1.0],
            &[0.99, 1.0],
            &[1.0, 1.01],
            &[1.0, 0.99],
            &[50.0, -50.0],
        ]);
        let sel = multi_krum(&u, 1).unwrap();
        assert!(!sel.selected.contains(&5), "outlier selected: {:?}", sel.selected);
    }

    #[test]
    fn bulyan_m0_is_plain_mean() {
        let u = matrix(&[&[1.0, 2.0], &[3.0, 6.0], &[5.0, 4.0]]);
        let sel = bulyan(&u, 0).unwrap();
        assert_eq!(sel.selected, vec![0, 1, 2]);
        assert_eq!(sel.aggregate.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn bulyan_output_within_benign_box() {
        // N=8, M=1, single far outlier: per-dimension output stays inside the
        // benign bounding box
        let mut rng = stream_rng(8, Stream::Defense, 0, 0);
        let mut rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        rows.push(vec![100.0, 100.0, 100.0]);
        let u = Matrix::from_rows(&rows).unwrap();
        let sel = bulyan(&u, 1).unwrap();
        for j in 0..3 {
            let lo = (0..7).map(|i| rows[i][j]).fold(f64::INFINITY, f64::min);
            let hi = (0..7).map(|i| rows[i][j]).fold(f64::NEG_INFINITY, f64::max);
            let x = sel.aggregate[j];
            assert!(x >= lo && x <= hi, "dim {j}: {x} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn bulyan_rejects_infeasible() {
        let u = matrix(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        assert!(matches!(bulyan(&u, 1).unwrap_err(), SimError::Config(_)));
    }

    #[test]
    fn dnc_identical_rows_keep_the_row() {
        let u = matrix(&[&[2.0, 3.0], &[2.0, 3.0], &[2.0, 3.0], &[2.0, 3.0]]);
        let mut rng = stream_rng(1, Stream::Defense, 0, 0);
        let sel = dnc(&u, 1, 1.5, 1, 2, &mut rng).unwrap();
        assert_eq!(sel.selected.len(), 2); // ceil(1.5) = 2 removed
        assert_eq!(sel.aggregate.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn dnc_planted_outlier_has_max_score() {
        // rank-1 structure: benign along nothing, outlier along v
        let u = matrix(&[&[0.0, 0.0], &[0.1, 0.0], &[-0.1, 0.0], &[10.0, 0.0]]);
        let mut rng = stream_rng(2, Stream::Defense, 0, 0);
        let sel = dnc(&u, 1, 1.0, 1, 2, &mut rng).unwrap();
        assert!(!sel.selected.contains(&3));
    }

    #[test]
    fn dnc_removal_count_follows_e() {
        let mut rng = stream_rng(5, Stream::Defense, 0, 0);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let u = Matrix::from_rows(&rows).unwrap();
        let sel = dnc(&u, 2, 1.5, 1, 4, &mut rng).unwrap();
        assert_eq!(sel.selected.len(), 10 - 3); // ceil(1.5 * 2) = 3
    }

    #[test]
    fn dnc_deterministic_per_seed() {
        let mut r1 = stream_rng(9, Stream::Defense, 4, 0);
        let mut r2 = stream_rng(9, Stream::Defense, 4, 0);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0).collect())
            .collect();
        let u = Matrix::from_rows(&rows).unwrap();
        let a = dnc(&u, 1, 1.5, 2, 3, &mut r1).unwrap();
        let b = dnc(&u, 1, 1.5, 2, 3, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fltrust_identical_updates_pass_through() {
        let g0 = UpdateVector::from_vec(vec![1.0, 2.0]);
        let u = matrix(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let sel = fltrust(&u, &g0).unwrap();
        assert_eq!(sel.selected, vec![0, 1, 2]);
        for (a, b) in sel.aggregate.iter().zip(g0.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fltrust_clips_opposed_updates() {
        let g0 = UpdateVector::from_vec(vec![1.0, 0.0]);
        let u = matrix(&[&[-1.0, 0.0]]);
        let sel = fltrust(&u, &g0).unwrap();
        assert!(sel.selected.is_empty());
        assert_eq!(sel.aggregate.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn fltrust_mixed_set() {
        let g0 = UpdateVector::from_vec(vec![2.0, 0.0]);
        let u = matrix(&[&[2.0, 0.0], &[-2.0, 0.0], &[2.0, 0.0]]);
        let sel = fltrust(&u, &g0).unwrap();
        assert_eq!(sel.selected, vec![0, 2]);
        assert!((sel.aggregate[0] - 2.0).abs() < 1e-12);
        assert_eq!(sel.aggregate[1], 0.0);
    }

    #[test]
    fn fltrust_zero_server_update_errors() {
        let u = matrix(&[&[1.0]]);
        assert!(matches!(
            fltrust(&u, &UpdateVector::zeros(1)).unwrap_err(),
            SimError::Degenerate(_)
        ));
    }
}
