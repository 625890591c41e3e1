//! Datasets: synthesis, IDX ingestion, client partitioning, label flips.

pub mod idx;

use crate::error::{Result, SimError};
use crate::linalg::Matrix;
use crate::nn::{self, ModelParameters};
use crate::rng::{normal, stream_rng, Stream};
use rand::Rng;

/// A labeled dataset with features in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Dataset> {
        if labels.len() != features.rows() {
            return Err(SimError::Input(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(SimError::Input(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows of this dataset at the given indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Parameters of the grouped non-IID partition procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionConfig {
    pub n_clients: usize,
    /// Probability that a sample lands in its own label's group.
    pub q: f64,
    pub seed: u64,
}

/// Gaussian blob dataset: one mean per class, per-coordinate noise `spread`,
/// clamped to `[0, 1]`. Fully determined by `seed`.
pub fn synth_dataset(
    n_classes: usize,
    dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(SimError::Config(format!(
            "synthetic dataset needs at least 2 classes, got {n_classes}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::DatasetSynth, 0, 0);
    // When the feature space is wide enough, class means sit on a randomly
    // rotated regular simplex centered in the unit box: every pair of
    // classes is equally separated, so task difficulty does not swing with
    // the seed. Narrow spaces fall back to uniform random means.
    const SIMPLEX_SIDE: f64 = 0.9;
    let means: Vec<Vec<f64>> = if n_classes <= dim {
        let basis = random_orthonormal(dim, n_classes, &mut rng);
        (0..n_classes)
            .map(|c| {
                let mut m = vec![0.5; dim];
                // regular simplex vertex c: (e_c - 1/n) scaled to the side
                for (k, b) in basis.iter().enumerate() {
                    let coord = if k == c { 1.0 } else { 0.0 } - 1.0 / n_classes as f64;
                    let coord = coord * SIMPLEX_SIDE / std::f64::consts::SQRT_2;
                    for (mj, bj) in m.iter_mut().zip(b) {
                        *mj += coord * bj;
                    }
                }
                m
            })
            .collect()
    } else {
        (0..n_classes)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.15..0.85)).collect())
            .collect()
    };
    let n = n_classes * n_per_class;
    let mut features = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..n_classes {
        for s in 0..n_per_class {
            let row = features.row_mut(c * n_per_class + s);
            for (x, &m) in row.iter_mut().zip(&means[c]) {
                *x = (m + normal(&mut rng, 0.0, spread)).clamp(0.0, 1.0);
            }
            labels.push(c);
        }
    }
    Dataset::new(features, labels, n_classes)
}

/// Gram-Schmidt basis of `count` random directions in `dim` dimensions.
fn random_orthonormal(dim: usize, count: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| normal(rng, 0.0, 1.0)).collect();
        for b in &basis {
            let proj = crate::linalg::dot(&v, b);
            crate::linalg::axpy(-proj, b, &mut v);
        }
        let norm = crate::linalg::l2_norm(&v);
        if norm > 1e-9 {
            crate::linalg::scale(1.0 / norm, &mut v);
            basis.push(v);
        }
    }
    basis
}

/// Split a dataset over `cfg.n_clients` clients.
///
/// Clients are divided contiguously into `n_classes` groups (any remainder
/// joins the last group). A sample with label `K` goes to group `K` with
/// probability `q` and to each other group with probability `(1-q)/(n-1)`;
/// within its group, samples spread evenly over the group's clients
/// (round-robin in arrival order), so client shards stay near-equal in
/// size. Every sample is assigned exactly once.
pub fn partition(dataset: &Dataset, cfg: &PartitionConfig) -> Result<Vec<Dataset>> {
    let n_groups = dataset.n_classes;
    if cfg.n_clients < n_groups {
        return Err(SimError::Config(format!(
            "cannot form {n_groups} groups from {} clients",
            cfg.n_clients
        )));
    }
    if !(cfg.q > 0.0 && cfg.q <= 1.0) {
        return Err(SimError::Config(format!("q = {} outside (0, 1]", cfg.q)));
    }
    let base = cfg.n_clients / n_groups;
    let group_clients = |g: usize| -> std::ops::Range<usize> {
        let start = g * base;
        let end = if g + 1 == n_groups {
            cfg.n_clients
        } else {
            (g + 1) * base
        };
        start..end
    };

    let mut rng = stream_rng(cfg.seed, Stream::Partition, 0, 0);
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_clients];
    let mut next_in_group: Vec<usize> = vec![0; n_groups];
    for i in 0..dataset.len() {
        let label = dataset.labels[i];
        let group = if rng.gen::<f64>() < cfg.q {
            label
        } else {
            // uniform among the other n-1 groups
            let mut g = rng.gen_range(0..n_groups - 1);
            if g >= label {
                g += 1;
            }
            g
        };
        let clients = group_clients(group);
        let span = clients.end - clients.start;
        let client = clients.start + next_in_group[group] % span;
        next_in_group[group] += 1;
        per_client[client].push(i);
    }
    Ok(per_client
        .into_iter()
        .map(|idx| dataset.subset(&idx))
        .collect())
}

/// Static label flip: class `c` becomes `n_classes - 1 - c`.
pub fn static_label_flip(dataset: &Dataset) -> Dataset {
    Dataset {
        features: dataset.features.clone(),
        labels: dataset
            .labels
            .iter()
            .map(|&c| dataset.n_classes - 1 - c)
            .collect(),
        n_classes: dataset.n_classes,
    }
}

/// Dynamic label flip: each label is replaced by the surrogate model's least
/// probable class for that sample (ties break to the lowest index).
pub fn dynamic_label_flip(dataset: &Dataset, surrogate: &ModelParameters) -> Result<Dataset> {
    if surrogate.output_dim() != dataset.n_classes {
        return Err(SimError::Config(format!(
            "surrogate has {} outputs for {} classes",
            surrogate.output_dim(),
            dataset.n_classes
        )));
    }
    let probs = nn::forward(surrogate, &dataset.features)?;
    let labels = (0..probs.rows())
        .map(|i| argmin(probs.row(i)))
        .collect();
    Ok(Dataset {
        features: dataset.features.clone(),
        labels,
        n_classes: dataset.n_classes,
    })
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate().skip(1) {
        if x < row[best] {
            best = j;
        }
    }
    best
}
