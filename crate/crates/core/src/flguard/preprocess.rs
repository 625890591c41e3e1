//! Update preprocessing: dimension-reducing feature selectors and the
//! max-absolute scaler.

use crate::error::{Result, SimError};
use crate::linalg::Matrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Feature count the local updates are reduced to before contrastive
/// training (or the full dimension when it is already smaller).
pub const WORKING_DIM: usize = 3072;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    LowVariance,
    Random,
}

/// A fitted coordinate subset of the raw update dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSelector {
    pub kind: SelectorKind,
    /// Strictly increasing, unique coordinates into the source dimension.
    pub indices: Vec<usize>,
    pub source_dim: usize,
}

impl FeatureSelector {
    pub fn output_dim(&self) -> usize {
        self.indices.len()
    }

    /// Project rows onto the selected coordinates.
    pub fn apply(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.source_dim {
            return Err(SimError::Config(format!(
                "selector fitted on dimension {} applied to rows of width {}",
                self.source_dim,
                rows.cols()
            )));
        }
        Ok(rows.select_cols(&self.indices))
    }
}

/// Keep the `target_dim` highest-variance columns of the training window
/// (population variance; ties keep the lower index). Identity when the
/// source dimension does not exceed the target.
pub fn fit_low_variance_selector(g_train: &Matrix, target_dim: usize) -> Result<FeatureSelector> {
    if g_train.rows() < 2 {
        return Err(SimError::Input(
            "variance filter needs at least 2 rows".into(),
        ));
    }
    let d = g_train.cols();
    if d < 2 {
        return Err(SimError::Config(format!(
            "update dimension {d} too small to filter"
        )));
    }
    let indices = if d <= target_dim {
        (0..d).collect()
    } else {
        let means = g_train.column_means();
        let stds = g_train.column_stds(&means);
        let mut order: Vec<usize> = (0..d).collect();
        // descending variance, ties to the lower index
        order.sort_by(|&a, &b| {
            stds[b]
                .partial_cmp(&stds[a])
                .expect("finite variances")
                .then(a.cmp(&b))
        });
        let mut kept: Vec<usize> = order[..target_dim].to_vec();
        kept.sort_unstable();
        kept
    };
    Ok(FeatureSelector {
        kind: SelectorKind::LowVariance,
        indices,
        source_dim: d,
    })
}

/// Sample `target_dim` distinct coordinates uniformly without replacement.
pub fn fit_random_selector(d: usize, target_dim: usize, rng: &mut ChaCha8Rng) -> FeatureSelector {
    let indices = if d <= target_dim {
        (0..d).collect()
    } else {
        let mut all: Vec<usize> = (0..d).collect();
        all.shuffle(rng);
        let mut kept: Vec<usize> = all[..target_dim].to_vec();
        kept.sort_unstable();
        kept
    };
    FeatureSelector {
        kind: SelectorKind::Random,
        indices,
        source_dim: d,
    }
}

/// Per-feature max-absolute scaling: `x / max|x|`, fitted on a training
/// window. Features whose fitted maximum is zero map to zero; later inputs
/// may exceed `[-1, 1]` (no clamping), and signs are always preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAbsScaler {
    pub max_abs: Vec<f64>,
}

impl MaxAbsScaler {
    pub fn fit(rows: &Matrix) -> Result<MaxAbsScaler> {
        if rows.rows() == 0 {
            return Err(SimError::Input("cannot fit scaler on 0 rows".into()));
        }
        let mut max_abs = vec![0.0; rows.cols()];
        for i in 0..rows.rows() {
            for (m, &x) in max_abs.iter_mut().zip(rows.row(i)) {
                let a = x.abs();
                if a > *m {
                    *m = a;
                }
            }
        }
        Ok(MaxAbsScaler { max_abs })
    }

    pub fn apply(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.max_abs.len() {
            return Err(SimError::Config(format!(
                "scaler fitted on {} features applied to width {}",
                self.max_abs.len(),
                rows.cols()
            )));
        }
        let mut out = rows.clone();
        for i in 0..out.rows() {
            for (x, &m) in out.row_mut(i).iter_mut().zip(&self.max_abs) {
                *x = if m > 0.0 { *x / m } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// The fitted scalers for both preprocessing branches.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub lv: MaxAbsScaler,
    pub rd: MaxAbsScaler,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn low_variance_identity_at_working_dim() {
        let g = Matrix::from_vec(2, 4, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let s = fit_low_variance_selector(&g, 4).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn low_variance_keeps_top_columns() {
        // column variances 0, 5-ish, 1-ish, 3-ish by construction
        let g = Matrix::from_rows(&[
            vec![1.0, -5.0, 0.0, 3.0],
            vec![1.0, 5.0, 2.0, -3.0],
        ])
        .unwrap();
        let s = fit_low_variance_selector(&g, 2).unwrap();
        assert_eq!(s.indices, vec![1, 3]);
    }

    #[test]
    fn constant_column_never_selected_when_reducing() {
        let mut rng = stream_rng(3, Stream::Contrastive, 0, 0);
        let mut rows = Vec::new();
        for _ in 0..6 {
            use rand::Rng;
            let mut r: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            r[2] = 0.75; // constant column
            rows.push(r);
        }
        let g = Matrix::from_rows(&rows).unwrap();
        let s = fit_low_variance_selector(&g, 4).unwrap();
        assert!(!s.indices.contains(&2));
    }

    #[test]
    fn random_selector_all_coordinates_when_small() {
        let mut rng = stream_rng(1, Stream::Contrastive, 0, 0);
        let s = fit_random_selector(10, 3072, &mut rng);
        assert_eq!(s.indices, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_selector_deterministic_and_sorted() {
        let mut r1 = stream_rng(2, Stream::Contrastive, 0, 0);
        let mut r2 = stream_rng(2, Stream::Contrastive, 0, 0);
        let a = fit_random_selector(100, 40, &mut r1);
        let b = fit_random_selector(100, 40, &mut r2);
        assert_eq!(a, b);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.indices.len(), 40);
    }

    #[test]
    fn random_selector_coverage_is_uniform() {
        // d = 2 * target: every coordinate kept with frequency ~0.5
        let d = 64;
        let target = 32;
        let trials = 1000;
        let mut counts = vec![0usize; d];
        for seed in 0..trials {
            let mut rng = stream_rng(seed, Stream::Contrastive, 0, 7);
            let s = fit_random_selector(d, target, &mut rng);
            for &i in &s.indices {
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.5).abs() < 0.05, "coordinate {i}: freq {freq}");
        }
    }

    #[test]
    fn maxabs_divides_by_column_max() {
        let g = Matrix::from_vec(3, 1, vec![2.0, -4.0, 1.0]).unwrap();
        let s = MaxAbsScaler::fit(&g).unwrap();
        let out = s.apply(&g).unwrap();
        assert_eq!(out.data(), &[0.5, -1.0, 0.25]);
    }

    #[test]
    fn maxabs_zero_column_maps_to_zero() {
        let g = Matrix::from_vec(2, 2, vec![0.0, 1.0, 0.0, -2.0]).unwrap();
        let s = MaxAbsScaler::fit(&g).unwrap();
        let out = s.apply(&g).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 0.0, -1.0]);
    }

    #[test]
    fn maxabs_preserves_sign() {
        let g = Matrix::from_vec(2, 3, vec![0.3, -0.4, 0.0, -0.1, 0.9, 2.0]).unwrap();
        let s = MaxAbsScaler::fit(&g).unwrap();
        let out = s.apply(&g).unwrap();
        for (a, b) in g.data().iter().zip(out.data()) {
            assert_eq!(a.signum() * (*a != 0.0) as i32 as f64, b.signum() * (*b != 0.0) as i32 as f64);
        }
    }
}
