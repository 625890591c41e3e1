//! Single-linkage agglomerative clustering down to two clusters, and the
//! benign-cluster choice rule.

use crate::error::{Result, SimError};
use crate::linalg::Matrix;

/// Agglomerate points bottom-up under single linkage (Euclidean) until two
/// clusters remain.
///
/// At every step the pair of clusters with the smallest minimum point
/// distance merges; ties break on the lexicographically smallest pair of
/// cluster representatives (a cluster is represented by its smallest member
/// index). The two surviving clusters come back ordered by representative.
pub fn ahc_two_clusters(points: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = points.rows();
    if n < 2 {
        return Err(SimError::Input(format!(
            "clustering needs at least 2 points, got {n}"
        )));
    }
    // pairwise point distances once
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = crate::linalg::squared_distance(points.row(i), points.row(j)).sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > 2 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = single_linkage(&clusters[a], &clusters[b], &dist);
                // representatives are the smallest members; the cluster list
                // stays sorted by representative so (a, b) order is the
                // lexicographic tie-break
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd,
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two clusters remain");
        let merged_b = clusters.remove(b);
        clusters[a].extend(merged_b);
        clusters[a].sort_unstable();
        // keep the list ordered by smallest member
        clusters.sort_by_key(|c| c[0]);
    }
    let second = clusters.pop().expect("two clusters");
    let first = clusters.pop().expect("two clusters");
    Ok((first, second))
}

fn single_linkage(a: &[usize], b: &[usize], dist: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for &i in a {
        for &j in b {
            if dist[i][j] < min {
                min = dist[i][j];
            }
        }
    }
    min
}

/// Choose the benign cluster: the larger one; on a size tie the denser one
/// (smaller mean intra-cluster pairwise distance, with singletons counting
/// as zero); on a double tie the cluster containing index 0.
pub fn pick_benign(cluster_a: &[usize], cluster_b: &[usize], points: &Matrix) -> Vec<usize> {
    use std::cmp::Ordering;
    match cluster_a.len().cmp(&cluster_b.len()) {
        Ordering::Greater => return cluster_a.to_vec(),
        Ordering::Less => return cluster_b.to_vec(),
        Ordering::Equal => {}
    }
    let da = mean_intra_distance(cluster_a, points);
    let db = mean_intra_distance(cluster_b, points);
    if da < db {
        cluster_a.to_vec()
    } else if db < da {
        cluster_b.to_vec()
    } else if cluster_a.contains(&0) {
        cluster_a.to_vec()
    } else {
        cluster_b.to_vec()
    }
}

fn mean_intra_distance(cluster: &[usize], points: &Matrix) -> f64 {
    if cluster.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (t, &i) in cluster.iter().enumerate() {
        for &j in &cluster[t + 1..] {
            sum += crate::linalg::squared_distance(points.row(i), points.row(j)).sqrt();
            pairs += 1;
        }
    }
    sum / pairs as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn points_1d(xs: &[f64]) -> Matrix {
        Matrix::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn nearest_pair_merges_first() {
        let p = points_1d(&[0.0, 1.0, 10.0]);
        let (a, b) = ahc_two_clusters(&p).unwrap();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(b, vec![2]);
    }

    #[test]
    fn two_points_stay_singletons() {
        let p = points_1d(&[3.0, 5.0]);
        let (a, b) = ahc_two_clusters(&p).unwrap();
        assert_eq!(a, vec![0]);
        assert_eq!(b, vec![1]);
    }

    #[test]
    fn partition_covers_all_indices() {
        let mut rng = stream_rng(21, Stream::Defense, 0, 0);
        for _ in 0..50 {
            let n = rng.gen_range(2..9);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let p = Matrix::from_rows(&rows).unwrap();
            let (a, b) = ahc_two_clusters(&p).unwrap();
            let mut all: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn permutation_invariant_as_partition() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![0.05, 0.02],
        ];
        let p = Matrix::from_rows(&rows).unwrap();
        let (a, b) = ahc_two_clusters(&p).unwrap();
        // permute rows by reversal and map results back
        let perm: Vec<usize> = (0..rows.len()).rev().collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let pp = Matrix::from_rows(&permuted).unwrap();
        let (pa, pb) = ahc_two_clusters(&pp).unwrap();
        let unmap = |c: &[usize]| -> Vec<usize> {
            let mut v: Vec<usize> = c.iter().map(|&i| perm[i]).collect();
            v.sort_unstable();
            v
        };
        let mut orig = [a, b];
        orig.sort();
        let mut mapped = [unmap(&pa), unmap(&pb)];
        mapped.sort();
        assert_eq!(orig, mapped);
    }

    #[test]
    fn matches_exhaustive_single_linkage_oracle() {
        // independent oracle: recompute the full merge sequence from scratch
        // with its own representation
        fn oracle(points: &Matrix) -> Vec<Vec<usize>> {
            let n = points.rows();
            let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
            while clusters.len() > 2 {
                let mut best_d = f64::INFINITY;
                let mut best_pair = (0usize, 1usize);
                for x in 0..clusters.len() {
                    for y in (x + 1)..clusters.len() {
                        let mut d = f64::INFINITY;
                        for &i in &clusters[x] {
                            for &j in &clusters[y] {
                                let dd = crate::linalg::squared_distance(
                                    points.row(i),
                                    points.row(j),
                                )
                                .sqrt();
                                if dd < d {
                                    d = dd;
                                }
                            }
                        }
                        if d < best_d {
                            best_d = d;
                            best_pair = (x, y);
                        }
                    }
                }
                let (x, y) = best_pair;
                let merged = clusters.remove(y);
                clusters[x].extend(merged);
                clusters[x].sort_unstable();
                clusters.sort_by_key(|c| c[0]);
            }
            clusters.sort_by_key(|c| c[0]);
            clusters
        }

        let mut rng = stream_rng(22, Stream::Defense, 0, 0);
        for case in 0..100 {
            let n = rng.gen_range(2..9);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let p = Matrix::from_rows(&rows).unwrap();
            let (a, b) = ahc_two_clusters(&p).unwrap();
            let expected = oracle(&p);
            assert_eq!(vec![a, b], expected, "case {case}");
        }
    }

    #[test]
    fn pick_larger_cluster() {
        let p = Matrix::zeros(10, 2);
        let a: Vec<usize> = (0..7).collect();
        let b: Vec<usize> = (7..10).collect();
        assert_eq!(pick_benign(&a, &b, &p), a);
        assert_eq!(pick_benign(&b, &a, &p), a);
    }

    #[test]
    fn tie_prefers_denser_cluster() {
        // indices 0-4 tightly packed, 5-9 spread out
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.push(vec![i as f64 * 0.01, 0.0]);
        }
        for i in 0..5 {
            rows.push(vec![10.0 + i as f64 * 2.0, 0.0]);
        }
        let p = Matrix::from_rows(&rows).unwrap();
        let tight: Vec<usize> = (0..5).collect();
        let spread: Vec<usize> = (5..10).collect();
        assert_eq!(pick_benign(&spread, &tight, &p), tight);
    }

    #[test]
    fn double_tie_prefers_cluster_with_index_zero() {
        let p = Matrix::zeros(2, 2);
        assert_eq!(pick_benign(&[1], &[0], &p), vec![0]);
    }
}
