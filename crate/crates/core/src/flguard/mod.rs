//! Contrastive-ensemble filtering defense.
//!
//! Periodically (every `k` rounds) the server trains two contrastive
//! encoders on the recent window of uploaded updates — one over the
//! highest-variance coordinates, one over a random coordinate subset — with
//! a max-abs scaler fitted alongside. Each round, both encoders embed the
//! incoming updates; the embeddings are reduced to two principal components,
//! split into two single-linkage clusters, and the larger cluster is taken
//! as benign. Only clients accepted by **both** branches are aggregated.

pub mod cluster;
pub mod contrastive;
pub mod pca;
pub mod preprocess;

pub use cluster::{ahc_two_clusters, pick_benign};
pub use contrastive::{augment, nt_xent, nt_xent_with_grad, pair_counts, ContrastiveModel, TrainCurve};
pub use pca::pca2;
pub use preprocess::{
    fit_low_variance_selector, fit_random_selector, FeatureSelector, MaxAbsScaler, Scaler,
    SelectorKind, WORKING_DIM,
};

use crate::error::{Result, SimError};
use crate::linalg::{self, Matrix};
use crate::nn::UpdateVector;
use crate::rng::{stream_rng, Stream};
use serde::Serialize;

/// Hyper-parameters of the contrastive defense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FLGuardHyper {
    /// NT-Xent temperature.
    pub tau: f64,
    /// Variance of the augmentation noise.
    pub noise_var: f64,
    /// Probability that a coordinate is perturbed in a view.
    pub mask_ratio: f64,
    /// Adam learning rate for contrastive training.
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub pca_components: usize,
    pub n_clusters: usize,
}

impl Default for FLGuardHyper {
    fn default() -> FLGuardHyper {
        FLGuardHyper {
            tau: 0.01,
            noise_var: 0.01,
            mask_ratio: 0.1,
            lr: 0.001,
            epochs: 5,
            batch: 32,
            pca_components: 2,
            n_clusters: 2,
        }
    }
}

impl FLGuardHyper {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(SimError::Config(format!("tau = {} must be > 0", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(SimError::Config(format!(
                "mask_ratio = {} outside [0, 1]",
                self.mask_ratio
            )));
        }
        if self.noise_var < 0.0 {
            return Err(SimError::Config(format!(
                "noise_var = {} must be >= 0",
                self.noise_var
            )));
        }
        if self.epochs == 0 || self.batch < 2 {
            return Err(SimError::Config(
                "contrastive training needs epochs >= 1 and batch >= 2".into(),
            ));
        }
        if self.pca_components != 2 || self.n_clusters != 2 {
            return Err(SimError::Config(
                "filtering is defined for 2 PCA components and 2 clusters".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one training event produces: both encoders, both selectors,
/// and the fitted scaler, reused for the following `k` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FLGuardAssets {
    pub model_lv: ContrastiveModel,
    pub model_rd: ContrastiveModel,
    pub selector_lv: FeatureSelector,
    pub selector_rd: FeatureSelector,
    pub scaler: Scaler,
    pub trained_at_round: u64,
}

/// Loss curves from one training event (one per branch).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingStats {
    pub lv: TrainCurve,
    pub rd: TrainCurve,
}

/// Train both contrastive branches on the update window.
///
/// Fits the low-variance and random selectors plus the scaler on `g_train`,
/// then trains each branch's encoder for `hyper.epochs` epochs of shuffled
/// mini-batches. Fully determined by `(seed, round)`.
pub fn train_contrastive(
    g_train: &Matrix,
    hyper: &FLGuardHyper,
    seed: u64,
    round: u64,
) -> Result<(FLGuardAssets, TrainingStats)> {
    hyper.validate()?;
    if g_train.rows() < 2 {
        return Err(SimError::Input(format!(
            "training window has {} rows; need at least 2",
            g_train.rows()
        )));
    }
    let selector_lv = fit_low_variance_selector(g_train, WORKING_DIM)?;
    let mut rd_rng = stream_rng(seed, Stream::Contrastive, round, 0);
    let selector_rd = fit_random_selector(g_train.cols(), WORKING_DIM, &mut rd_rng);

    let lv_rows = selector_lv.apply(g_train)?;
    let rd_rows = selector_rd.apply(g_train)?;
    let scaler = Scaler {
        lv: MaxAbsScaler::fit(&lv_rows)?,
        rd: MaxAbsScaler::fit(&rd_rows)?,
    };
    let lv_scaled = scaler.lv.apply(&lv_rows)?;
    let rd_scaled = scaler.rd.apply(&rd_rows)?;

    let mut lv_init = stream_rng(seed, Stream::Contrastive, round, 1);
    let mut lv_epoch = stream_rng(seed, Stream::Contrastive, round, 2);
    let (model_lv, curve_lv) =
        contrastive::train_encoder(&lv_scaled, hyper, &mut lv_init, &mut lv_epoch)?;
    // when both filters pass the same coordinates the branches coincide by
    // construction and one trained encoder serves both
    let (model_rd, curve_rd) = if selector_rd.indices == selector_lv.indices {
        (model_lv.clone(), curve_lv.clone())
    } else {
        let mut rd_init = stream_rng(seed, Stream::Contrastive, round, 3);
        let mut rd_epoch = stream_rng(seed, Stream::Contrastive, round, 4);
        contrastive::train_encoder(&rd_scaled, hyper, &mut rd_init, &mut rd_epoch)?
    };

    Ok((
        FLGuardAssets {
            model_lv,
            model_rd,
            selector_lv,
            selector_rd,
            scaler,
            trained_at_round: round,
        },
        TrainingStats {
            lv: curve_lv,
            rd: curve_rd,
        },
    ))
}

/// Representations of raw update rows under one branch: select, scale,
/// encode.
pub fn encode_branch(
    rows: &Matrix,
    selector: &FeatureSelector,
    scaler: &MaxAbsScaler,
    model: &ContrastiveModel,
) -> Result<Matrix> {
    let selected = selector.apply(rows)?;
    let scaled = scaler.apply(&selected)?;
    model.encode(&scaled)
}

/// Result of one filtering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// Row indices accepted by the ensemble, ascending.
    pub selected: Vec<usize>,
    pub c_lv: Vec<usize>,
    pub c_rd: Vec<usize>,
    /// True when the branch intersection was empty and the low-variance
    /// branch was used alone.
    pub fallback_used: bool,
}

/// Run the full filtering pipeline on one round's update matrix.
///
/// Both branches embed, project to two principal components, cluster, and
/// vote benign per [`pick_benign`]; the accepted set is the intersection.
/// An empty intersection falls back to the low-variance branch.
pub fn filter_clients(g: &Matrix, assets: &FLGuardAssets) -> Result<FilterOutcome> {
    if g.rows() < 2 {
        // nothing to separate; accept everyone
        return Ok(FilterOutcome {
            selected: (0..g.rows()).collect(),
            c_lv: (0..g.rows()).collect(),
            c_rd: (0..g.rows()).collect(),
            fallback_used: false,
        });
    }
    let branch = |selector: &FeatureSelector,
                  scaler: &MaxAbsScaler,
                  model: &ContrastiveModel|
     -> Result<Vec<usize>> {
        let h = encode_branch(g, selector, scaler, model)?;
        let projected = pca2(&h)?;
        let (a, b) = ahc_two_clusters(&projected)?;
        Ok(pick_benign(&a, &b, &projected))
    };
    let c_lv = branch(&assets.selector_lv, &assets.scaler.lv, &assets.model_lv)?;
    let c_rd = branch(&assets.selector_rd, &assets.scaler.rd, &assets.model_rd)?;

    let mut selected: Vec<usize> = c_lv.iter().copied().filter(|i| c_rd.contains(i)).collect();
    selected.sort_unstable();
    let fallback_used = selected.is_empty();
    if fallback_used {
        selected = c_lv.clone();
        selected.sort_unstable();
    }
    Ok(FilterOutcome {
        selected,
        c_lv,
        c_rd,
        fallback_used,
    })
}

/// Mean of the accepted rows.
pub fn flguard_aggregate(g: &Matrix, c_good: &[usize]) -> Result<UpdateVector> {
    if c_good.is_empty() {
        return Err(SimError::Aggregation("empty accepted set".into()));
    }
    let mut acc = vec![0.0; g.cols()];
    for &i in c_good {
        linalg::axpy(1.0, g.row(i), &mut acc);
    }
    linalg::scale(1.0 / c_good.len() as f64, &mut acc);
    Ok(UpdateVector::from_vec(acc))
}

// --- binary asset blob ------------------------------------------------------
//
// Layout (all integers little-endian):
//   magic "FLGA", version u32, trained_at_round u64,
//   selector_lv, selector_rd, scaler_lv, scaler_rd, encoder_lv, encoder_rd
// where a selector is (kind u8, source_dim u64, len u64, indices u64...),
// a scaler is (len u64, f64...), and an encoder is
// (n_layers u64, then per layer: in u64, out u64, alpha f64 (0 = linear),
//  weights f64..., bias f64...).

const BLOB_MAGIC: &[u8; 4] = b"FLGA";
const BLOB_VERSION: u32 = 1;

impl FLGuardAssets {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&self.trained_at_round.to_le_bytes());
        write_selector(&mut out, &self.selector_lv);
        write_selector(&mut out, &self.selector_rd);
        write_f64s(&mut out, &self.scaler.lv.max_abs);
        write_f64s(&mut out, &self.scaler.rd.max_abs);
        write_encoder(&mut out, &self.model_lv);
        write_encoder(&mut out, &self.model_rd);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FLGuardAssets> {
        let mut r = BlobReader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != BLOB_MAGIC {
            return Err(SimError::Ingest {
                offset: 0,
                msg: "bad asset blob magic".into(),
            });
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != BLOB_VERSION {
            return Err(SimError::Ingest {
                offset: 4,
                msg: format!("unsupported asset blob version {version}"),
            });
        }
        let trained_at_round = r.u64()?;
        let selector_lv = read_selector(&mut r)?;
        let selector_rd = read_selector(&mut r)?;
        let scaler = Scaler {
            lv: MaxAbsScaler {
                max_abs: r.f64s()?,
            },
            rd: MaxAbsScaler {
                max_abs: r.f64s()?,
            },
        };
        let model_lv = read_encoder(&mut r)?;
        let model_rd = read_encoder(&mut r)?;
        if r.pos != bytes.len() {
            return Err(SimError::Ingest {
                offset: r.pos as u64,
                msg: "trailing bytes in asset blob".into(),
            });
        }
        Ok(FLGuardAssets {
            model_lv,
            model_rd,
            selector_lv,
            selector_rd,
            scaler,
            trained_at_round,
        })
    }
}

struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(SimError::Ingest {
                offset: self.pos as u64,
                msg: "truncated asset blob".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
}

fn write_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn write_selector(out: &mut Vec<u8>, s: &FeatureSelector) {
    out.push(match s.kind {
        SelectorKind::LowVariance => 0,
        SelectorKind::Random => 1,
    });
    out.extend_from_slice(&(s.source_dim as u64).to_le_bytes());
    out.extend_from_slice(&(s.indices.len() as u64).to_le_bytes());
    for &i in &s.indices {
        out.extend_from_slice(&(i as u64).to_le_bytes());
    }
}

fn read_selector(r: &mut BlobReader) -> Result<FeatureSelector> {
    let kind = match r.take(1)?[0] {
        0 => SelectorKind::LowVariance,
        1 => SelectorKind::Random,
        other => {
            return Err(SimError::Ingest {
                offset: r.pos as u64 - 1,
                msg: format!("unknown selector kind {other}"),
            })
        }
    };
    let source_dim = r.u64()? as usize;
    let n = r.u64()? as usize;
    let indices = (0..n)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureSelector {
        kind,
        indices,
        source_dim,
    })
}

fn write_encoder(out: &mut Vec<u8>, model: &ContrastiveModel) {
    let layers = model.encoder.layers();
    out.extend_from_slice(&(layers.len() as u64).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.in_dim() as u64).to_le_bytes());
        out.extend_from_slice(&(l.out_dim() as u64).to_le_bytes());
        let alpha = match l.activation {
            crate::nn::Activation::LeakyRelu(a) => a,
            crate::nn::Activation::Linear => 0.0,
            crate::nn::Activation::SoftmaxOut => f64::NAN,
        };
        out.extend_from_slice(&alpha.to_le_bytes());
        for x in l.weight.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in &l.bias {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn read_encoder(r: &mut BlobReader) -> Result<ContrastiveModel> {
    let n_layers = r.u64()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.u64()? as usize;
        let out_dim = r.u64()? as usize;
        let alpha = r.f64()?;
        let activation = if alpha == 0.0 {
            crate::nn::Activation::Linear
        } else {
            crate::nn::Activation::LeakyRelu(alpha)
        };
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weights.push(r.f64()?);
        }
        let mut bias = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            bias.push(r.f64()?);
        }
        layers.push(crate::nn::Layer {
            weight: Matrix::from_vec(in_dim, out_dim, weights).expect("sized by construction"),
            bias,
            activation,
        });
    }
    Ok(ContrastiveModel {
        encoder: crate::nn::ModelParameters::from_layers(layers)?,
    })
}
