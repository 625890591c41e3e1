//! Brute-force reference oracles, exposed as a subcommand so the acceptance
//! suite (and anyone debugging) can cross-check the engine's implementations
//! against independently written naive code. Nothing here calls into the
//! engine's aggregation, clustering, or loss paths.

use serde::{Deserialize, Serialize};

#[derive(Deserialize)]
pub struct TrimmedMeanFixture {
    pub matrix: Vec<Vec<f64>>,
    pub m: usize,
}

#[derive(Serialize)]
pub struct TrimmedMeanResult {
    pub result: Vec<f64>,
}

/// Sort each column, drop `m` from both ends, average the rest.
pub fn trimmed_mean_oracle(fix: &TrimmedMeanFixture) -> Result<TrimmedMeanResult, String> {
    let n = fix.matrix.len();
    if n <= 2 * fix.m {
        return Err(format!("need more than 2m = {} rows, got {n}", 2 * fix.m));
    }
    let d = fix.matrix[0].len();
    let mut result = Vec::with_capacity(d);
    for j in 0..d {
        let mut col: Vec<f64> = fix.matrix.iter().map(|row| row[j]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).ok_or("non-finite value").unwrap());
        let kept = &col[fix.m..n - fix.m];
        result.push(kept.iter().sum::<f64>() / kept.len() as f64);
    }
    Ok(TrimmedMeanResult { result })
}

#[derive(Deserialize)]
pub struct KrumFixture {
    pub matrix: Vec<Vec<f64>>,
    pub m_assumed: usize,
    /// How many rows to select; defaults to the largest c with N - c > 2M + 2.
    pub count: Option<usize>,
}

#[derive(Serialize)]
pub struct KrumResult {
    /// Score of every row over the full pool (first selection step).
    pub scores: Vec<f64>,
    /// Rows selected by iterative lowest-score-first selection with
    /// rescoring over the shrinking pool, ascending.
    pub selected: Vec<usize>,
    pub mean: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// O(N^2 d) krum scoring with explicit rescoring per selection step.
pub fn krum_oracle(fix: &KrumFixture) -> Result<KrumResult, String> {
    let n = fix.matrix.len();
    let m = fix.m_assumed;
    if n < m + 3 {
        return Err(format!("need N >= M + 3, got N = {n}, M = {m}"));
    }
    let count = match fix.count {
        Some(c) => c,
        None => {
            let c = n as i64 - 2 * m as i64 - 3;
            if c < 1 {
                return Err(format!("no feasible c with N - c > 2M + 2 (N = {n}, M = {m})"));
            }
            c as usize
        }
    };
    let neighbor_target = n - m - 2;

    let score_pool = |pool: &[usize]| -> Vec<(usize, f64)> {
        let k = neighbor_target.min(pool.len() - 1);
        pool.iter()
            .map(|&i| {
                let mut ds: Vec<f64> = pool
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| sq_dist(&fix.matrix[i], &fix.matrix[j]))
                    .collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (i, ds[..k].iter().sum())
            })
            .collect()
    };

    let initial_pool: Vec<usize> = (0..n).collect();
    let scores: Vec<f64> = score_pool(&initial_pool).into_iter().map(|(_, s)| s).collect();

    let mut pool = initial_pool;
    let mut selected = Vec::new();
    while selected.len() < count {
        let scored = score_pool(&pool);
        let (best, _) = scored
            .iter()
            .fold(None::<(usize, f64)>, |acc, &(i, s)| match acc {
                None => Some((i, s)),
                Some((bi, bs)) if s < bs || (s == bs && i < bi) => Some((i, s)),
                keep => keep,
            })
            .expect("pool non-empty");
        selected.push(best);
        pool.retain(|&j| j != best);
    }
    selected.sort_unstable();

    let d = fix.matrix[0].len();
    let mut mean = vec![0.0; d];
    for &i in &selected {
        for (acc, &x) in mean.iter_mut().zip(&fix.matrix[i]) {
            *acc += x;
        }
    }
    for x in &mut mean {
        *x /= selected.len() as f64;
    }
    Ok(KrumResult {
        scores,
        selected,
        mean,
    })
}

#[derive(Deserialize)]
pub struct AhcFixture {
    pub points: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct AhcResult {
    pub clusters: Vec<Vec<usize>>,
}

/// Full single-linkage merge simulation until two clusters remain.
/// Clusters merge on minimum point distance; ties break on the smallest
/// (representative, representative) pair; output ordered by representative.
pub fn ahc_oracle(fix: &AhcFixture) -> Result<AhcResult, String> {
    let n = fix.points.len();
    if n < 2 {
        return Err(format!("need at least 2 points, got {n}"));
    }
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > 2 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut link = f64::INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        let d = sq_dist(&fix.points[i], &fix.points[j]).sqrt();
                        if d < link {
                            link = d;
                        }
                    }
                }
                if best.map_or(true, |(bd, _, _)| link < bd) {
                    best = Some((link, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        clusters[a].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(AhcResult { clusters })
}

#[derive(Deserialize)]
pub struct NtXentFixture {
    /// 2B rows; (2i, 2i+1) are positive pairs.
    pub z: Vec<Vec<f64>>,
    pub tau: f64,
}

#[derive(Serialize)]
pub struct NtXentResult {
    pub loss: f64,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
}

/// Direct double-loop evaluation of the contrastive loss.
pub fn nt_xent_oracle(fix: &NtXentFixture) -> Result<NtXentResult, String> {
    let n = fix.z.len();
    if n < 4 || n % 2 != 0 {
        return Err(format!("need an even number of rows >= 4, got {n}"));
    }
    let cos = |a: &[f64], b: &[f64]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut total = 0.0;
    for i in 0..n {
        let j = i ^ 1;
        let mut denom = 0.0;
        for k in 0..n {
            if k != i {
                denom += (cos(&fix.z[i], &fix.z[k]) / fix.tau).exp();
            }
        }
        let numer = (cos(&fix.z[i], &fix.z[j]) / fix.tau).exp();
        total += -(numer / denom).ln();
    }
    let b = n / 2;
    Ok(NtXentResult {
        loss: total / n as f64,
        positive_pairs: b,
        negative_pairs: b * (2 * b - 2),
    })
}

/// Run one oracle subcommand on a JSON fixture file; prints canonical JSON.
pub fn run_oracle(name: &str, fixture_path: &std::path::Path) -> Result<String, String> {
    let text = std::fs::read_to_string(fixture_path)
        .map_err(|e| format!("cannot read {}: {e}", fixture_path.display()))?;
    let parse_err = |e: serde_json::Error| format!("bad fixture: {e}");
    let out = match name {
        "trimmed-mean" => {
            let fix: TrimmedMeanFixture = serde_json::from_str(&text).map_err(parse_err)?;
            serde_json::to_string(&trimmed_mean_oracle(&fix)?)
        }
        "krum-score" => {
            let fix: KrumFixture = serde_json::from_str(&text).map_err(parse_err)?;
            serde_json::to_string(&krum_oracle(&fix)?)
        }
        "ahc" => {
            let fix: AhcFixture = serde_json::from_str(&text).map_err(parse_err)?;
            serde_json::to_string(&ahc_oracle(&fix)?)
        }
        "nt-xent" => {
            let fix: NtXentFixture = serde_json::from_str(&text).map_err(parse_err)?;
            serde_json::to_string(&nt_xent_oracle(&fix)?)
        }
        other => return Err(format!("unknown oracle `{other}` (trimmed-mean, krum-score, ahc, nt-xent)")),
    };
    out.map_err(|e| format!("serialization failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimmed_mean_fixture_from_the_book() {
        let fix = TrimmedMeanFixture {
            matrix: vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![100.0]],
            m: 1,
        };
        assert_eq!(trimmed_mean_oracle(&fix).unwrap().result, vec![3.0]);
    }

    #[test]
    fn ahc_three_points() {
        let fix = AhcFixture {
            points: vec![vec![0.0], vec![1.0], vec![10.0]],
        };
        let out = ahc_oracle(&fix).unwrap();
        assert_eq!(out.clusters, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn nt_xent_all_equal_is_ln3() {
        let fix = NtXentFixture {
            z: vec![vec![0.3, 0.3]; 4],
            tau: 0.01,
        };
        let out = nt_xent_oracle(&fix).unwrap();
        assert!((out.loss - 3f64.ln()).abs() < 1e-12);
        assert_eq!((out.positive_pairs, out.negative_pairs), (2, 4));
    }

    #[test]
    fn krum_outlier_never_selected() {
        let fix = KrumFixture {
            matrix: vec![
                vec![1.0, 1.0],
                vec![1.1, 1.0],
                vec![0.9, 1.0],
                vec![1.0, 1.1],
                vec![1.0, 0.9],
                vec![9.0, -9.0],
            ],
            m_assumed: 1,
            count: Some(3),
        };
        let out = krum_oracle(&fix).unwrap();
        assert!(!out.selected.contains(&5));
        assert_eq!(out.scores.len(), 6);
    }
}
