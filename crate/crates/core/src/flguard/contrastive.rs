//! Contrastive representation learning over preprocessed local updates.
//!
//! Each training row is augmented into two views by masked Gaussian noise;
//! views of the same row are positive pairs, everything else in the batch is
//! negative. The NT-Xent loss is computed on the projection-head output and
//! both networks are trained jointly with Adam; only the encoder is kept.

use crate::error::{Result, SimError};
use crate::linalg::{self, Matrix};
use crate::nn::{
    adam_step, backward_from_output_grad, forward, forward_cached, AdamState, Architecture,
    LayerSpec, ModelParameters,
};
use crate::rng::normal;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::FLGuardHyper;

const ENCODER_ALPHA: f64 = 0.01;

/// A trained contrastive encoder. The projection head used during training
/// is discarded; inference uses the encoder alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveModel {
    pub encoder: ModelParameters,
}

impl ContrastiveModel {
    /// Representations of the (already preprocessed) rows.
    pub fn encode(&self, rows: &Matrix) -> Result<Matrix> {
        forward(&self.encoder, rows)
    }
}

/// Encoder/head shape: two `dim -> dim` affine layers with one leaky-ReLU
/// between them. Both networks share this shape.
fn tower_arch(dim: usize) -> Architecture {
    Architecture(vec![
        LayerSpec {
            in_dim: dim,
            out_dim: dim,
            activation: crate::nn::Activation::LeakyRelu(ENCODER_ALPHA),
        },
        LayerSpec {
            in_dim: dim,
            out_dim: dim,
            activation: crate::nn::Activation::Linear,
        },
    ])
}

/// Two views of one row: each coordinate independently receives
/// `N(0, noise_var)` noise with probability `mask_ratio`.
pub fn augment(
    row: &[f64],
    noise_var: f64,
    mask_ratio: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let std = noise_var.sqrt();
    let mut one_view = || -> Vec<f64> {
        row.iter()
            .map(|&x| {
                if rng.gen::<f64>() < mask_ratio {
                    x + normal(rng, 0.0, std)
                } else {
                    x
                }
            })
            .collect()
    };
    let a = one_view();
    let b = one_view();
    (a, b)
}

/// Positive and negative pair counts for a batch of `b` original rows
/// (unordered pairs among the `2b` views).
pub fn pair_counts(b: usize) -> (usize, usize) {
    (b, b * (2 * b - 2))
}

fn normalize_rows(z: &Matrix) -> (Matrix, Vec<f64>) {
    let mut zhat = z.clone();
    let mut norms = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let r = linalg::l2_norm(zhat.row(i));
        norms.push(r);
        if r > 0.0 {
            linalg::scale(1.0 / r, zhat.row_mut(i));
        }
    }
    (zhat, norms)
}

/// NT-Xent loss over `2B` latent rows arranged so that `(2i, 2i+1)` are the
/// positive pairs. Similarity is the cosine of the rows, scaled by `tau`;
/// each anchor's denominator runs over the other `2B - 1` rows.
pub fn nt_xent(z: &Matrix, tau: f64) -> Result<f64> {
    nt_xent_inner(z, tau, false).map(|(loss, _)| loss)
}

/// NT-Xent loss and its gradient with respect to the raw latent rows.
pub fn nt_xent_with_grad(z: &Matrix, tau: f64) -> Result<(f64, Matrix)> {
    let (loss, grad) = nt_xent_inner(z, tau, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn nt_xent_inner(z: &Matrix, tau: f64, want_grad: bool) -> Result<(f64, Option<Matrix>)> {
    let n = z.rows();
    if n < 4 || n % 2 != 0 {
        return Err(SimError::Degenerate(format!(
            "NT-Xent needs an even number of views from B >= 2 rows, got {n}"
        )));
    }
    if tau <= 0.0 {
        return Err(SimError::Config(format!("temperature {tau} must be > 0")));
    }

    let (zhat, norms) = normalize_rows(z);
    // similarity matrix s_ik = <zhat_i, zhat_k> / tau, with a fixed per-pair
    // summation order so identical rows give bit-identical similarities
    let mut sims = Matrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            sims[(i, k)] = linalg::dot(zhat.row(i), zhat.row(k)) / tau;
        }
    }

    // row-stochastic softmax over k != i, shifted by the row max for stability
    let mut probs = if want_grad {
        Some(Matrix::zeros(n, n))
    } else {
        None
    };
    let mut anchor_losses = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i ^ 1;
        let row = sims.row(i);
        let mut max = f64::NEG_INFINITY;
        for (k, &s) in row.iter().enumerate() {
            if k != i && s > max {
                max = s;
            }
        }
        let mut denom = 0.0;
        for (k, &s) in row.iter().enumerate() {
            if k != i {
                denom += (s - max).exp();
            }
        }
        anchor_losses.push((max - row[positive]) + denom.ln());
        if let Some(p) = probs.as_mut() {
            for k in 0..n {
                if k != i {
                    p[(i, k)] = (sims[(i, k)] - max).exp() / denom;
                }
            }
        }
    }
    // anchor-relative mean: exact when every anchor contributes the same loss
    let base = anchor_losses[0];
    let loss =
        base + anchor_losses.iter().map(|l| l - base).sum::<f64>() / n as f64;

    let grad = if let Some(mut p) = probs {
        // d loss / d s_ik for anchor i, averaged over the 2B anchors
        let inv = 1.0 / n as f64;
        for i in 0..n {
            let positive = i ^ 1;
            p[(i, positive)] -= 1.0;
            for k in 0..n {
                p[(i, k)] *= inv;
            }
        }
        // s_ik depends on both rows: dL/dzhat = (P + P^T) zhat / tau
        let mut coeff = Matrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                coeff[(i, k)] = p[(i, k)] + p[(k, i)];
            }
        }
        let mut d_zhat = Matrix::zeros(n, z.cols());
        linalg::gemm(1.0 / tau, &coeff, false, &zhat, false, 0.0, &mut d_zhat);
        // through the row normalization: dz = (g - (g.zhat) zhat) / ||z||
        let mut d_z = Matrix::zeros(n, z.cols());
        for i in 0..n {
            let r = norms[i];
            if r == 0.0 {
                continue;
            }
            let g = d_zhat.row(i);
            let zh = zhat.row(i);
            let proj = linalg::dot(g, zh);
            let out = d_z.row_mut(i);
            for ((o, &gv), &zv) in out.iter_mut().zip(g).zip(zh) {
                *o = (gv - proj * zv) / r;
            }
        }
        Some(d_z)
    } else {
        None
    };

    Ok((loss, grad))
}

/// Loss trajectory of one encoder training run (mean loss per epoch).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainCurve {
    pub epoch_mean_loss: Vec<f64>,
}

/// Train one encoder (plus its throwaway projection head) on preprocessed
/// rows. Mini-batches are shuffled per epoch; batches that would hold fewer
/// than two rows are skipped since they carry no negative pairs.
pub fn train_encoder(
    rows: &Matrix,
    hyper: &FLGuardHyper,
    init_rng: &mut ChaCha8Rng,
    epoch_rng: &mut ChaCha8Rng,
) -> Result<(ContrastiveModel, TrainCurve)> {
    let n = rows.rows();
    if n < 2 {
        return Err(SimError::Input(format!(
            "contrastive training needs at least 2 rows, got {n}"
        )));
    }
    let dim = rows.cols();
    let arch = tower_arch(dim);
    let mut encoder = ModelParameters::init(&arch, init_rng)?;
    let mut head = ModelParameters::init(&arch, init_rng)?;
    let mut enc_opt = AdamState::new(encoder.param_count(), hyper.lr);
    let mut head_opt = AdamState::new(head.param_count(), hyper.lr);

    let batch = hyper.batch.min(n).max(2);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(epoch_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch) {
            if chunk.len() < 2 {
                continue;
            }
            // two augmented views per row, positives at (2t, 2t+1)
            let mut views = Matrix::zeros(2 * chunk.len(), dim);
            for (t, &ri) in chunk.iter().enumerate() {
                let (a, b) = augment(rows.row(ri), hyper.noise_var, hyper.mask_ratio, epoch_rng);
                views.row_mut(2 * t).copy_from_slice(&a);
                views.row_mut(2 * t + 1).copy_from_slice(&b);
            }

            let enc_cache = forward_cached(&encoder, &views)?;
            let head_cache = forward_cached(&head, enc_cache.output())?;
            let (loss, d_latent) = nt_xent_with_grad(head_cache.output(), hyper.tau)?;
            let (head_grad, d_repr) = backward_from_output_grad(&head, &head_cache, d_latent);
            let (enc_grad, _) = backward_from_output_grad(&encoder, &enc_cache, d_repr);
            adam_step(&mut head_opt, &mut head, &head_grad)?;
            adam_step(&mut enc_opt, &mut encoder, &enc_grad)?;

            epoch_loss += loss;
            batches += 1;
        }
        if batches == 0 {
            return Err(SimError::Input(
                "no trainable batch of >= 2 rows in the window".into(),
            ));
        }
        curve.push(epoch_loss / batches as f64);
    }
    // the head is dropped here; only the encoder is used downstream
    Ok((
        ContrastiveModel { encoder },
        TrainCurve {
            epoch_mean_loss: curve,
        },
    ))
}
