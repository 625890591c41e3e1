//! Minimal dense neural-network engine: forward, backprop, SGD and Adam.
//!
//! Models are stacks of affine layers with an activation per layer. The
//! parameter vector of a model is the concatenation of every layer's weight
//! matrix (row-major, input x output) followed by its bias, in layer order;
//! [`flatten`] / [`unflatten`] convert between the two representations and
//! are exact inverses.

use crate::error::{Result, SimError};
use crate::linalg::{gemm, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `x if x >= 0 else alpha * x`.
    LeakyRelu(f64),
    Linear,
    /// Row-wise softmax, for the final layer of a classifier.
    SoftmaxOut,
}

impl Activation {
    fn apply_rows(self, m: &mut Matrix) {
        match self {
            Activation::Linear => {}
            Activation::LeakyRelu(alpha) => {
                for x in m.data_mut() {
                    if *x < 0.0 {
                        *x *= alpha;
                    }
                }
            }
            Activation::SoftmaxOut => {
                for i in 0..m.rows() {
                    softmax_in_place(m.row_mut(i));
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation, recovered from the
    /// post-activation value. Not defined for `SoftmaxOut` (handled jointly
    /// with the cross-entropy loss).
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            // alpha > 0 preserves sign, so the output sign identifies the branch.
            Activation::LeakyRelu(alpha) => {
                if y >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::SoftmaxOut => {
                unreachable!("softmax gradient is fused with the cross-entropy loss")
            }
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// One dense layer: `y = act(x W + b)` with `W` of shape input x output.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Shape and activation of one layer, without its values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Shape of a whole model; the template for [`unflatten`] and random init.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture(pub Vec<LayerSpec>);

impl Architecture {
    /// Dense feed-forward classifier: `input -> hidden.. -> n_classes` with
    /// leaky-ReLU hidden layers and a softmax output layer.
    pub fn fcn(input_dim: usize, hidden: &[usize], n_classes: usize, alpha: f64) -> Architecture {
        let mut specs = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            specs.push(LayerSpec {
                in_dim: prev,
                out_dim: h,
                activation: Activation::LeakyRelu(alpha),
            });
            prev = h;
        }
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: n_classes,
            activation: Activation::SoftmaxOut,
        });
        Architecture(specs)
    }

    pub fn param_count(&self) -> usize {
        self.0
            .iter()
            .map(|s| s.in_dim * s.out_dim + s.out_dim)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(SimError::Config("architecture has no layers".into()));
        }
        for w in self.0.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(SimError::Config(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        for s in &self.0 {
            if let Activation::LeakyRelu(alpha) = s.activation {
                if alpha <= 0.0 {
                    return Err(SimError::Config(format!("leaky-relu alpha {alpha} <= 0")));
                }
            }
        }
        Ok(())
    }
}

/// Full model state: ordered dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    layers: Vec<Layer>,
}

impl ModelParameters {
    /// Glorot-uniform weights (`+-sqrt(6 / (fan_in + fan_out))`), zero biases.
    pub fn init(arch: &Architecture, rng: &mut ChaCha8Rng) -> Result<ModelParameters> {
        arch.validate()?;
        let layers = arch
            .0
            .iter()
            .map(|spec| {
                let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
                let data = (0..spec.in_dim * spec.out_dim)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer {
                    weight: Matrix::from_vec(spec.in_dim, spec.out_dim, data)
                        .expect("sized by construction"),
                    bias: vec![0.0; spec.out_dim],
                    activation: spec.activation,
                }
            })
            .collect();
        Ok(ModelParameters { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<ModelParameters> {
        let model = ModelParameters { layers };
        model.arch().validate()?;
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn arch(&self) -> Architecture {
        Architecture(
            self.layers
                .iter()
                .map(|l| LayerSpec {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                })
                .collect(),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.arch().param_count()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }
}

/// A model update or gradient, flattened to the model's parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateVector(Vec<f64>);

impl UpdateVector {
    pub fn from_vec(values: Vec<f64>) -> UpdateVector {
        UpdateVector(values)
    }

    pub fn zeros(dim: usize) -> UpdateVector {
        UpdateVector(vec![0.0; dim])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Deref for UpdateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Post-activation outputs of every layer for one batch; `activations[0]`
/// is the input batch itself.
pub struct ForwardCache {
    pub activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.activations[self.activations.len() - 1]
    }
}

fn layer_forward(layer: &Layer, input: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(input.rows(), layer.out_dim());
    for i in 0..z.rows() {
        z.row_mut(i).copy_from_slice(&layer.bias);
    }
    gemm(1.0, input, false, &layer.weight, false, 1.0, &mut z);
    layer.activation.apply_rows(&mut z);
    z
}

/// Run the model on a batch, keeping every intermediate activation.
pub fn forward_cached(model: &ModelParameters, batch: &Matrix) -> Result<ForwardCache> {
    if batch.cols() != model.input_dim() {
        return Err(SimError::Config(format!(
            "batch width {} does not match model input {}",
            batch.cols(),
            model.input_dim()
        )));
    }
    let mut activations = Vec::with_capacity(model.layers.len() + 1);
    activations.push(batch.clone());
    for layer in &model.layers {
        let next = layer_forward(layer, &activations[activations.len() - 1]);
        activations.push(next);
    }
    Ok(ForwardCache { activations })
}

/// Run the model on a batch. Output is logits, or probabilities when the
/// final layer is `SoftmaxOut`.
pub fn forward(model: &ModelParameters, batch: &Matrix) -> Result<Matrix> {
    let mut cache = forward_cached(model, batch)?;
    Ok(cache.activations.pop().expect("at least one layer"))
}

/// Softmax cross-entropy loss (mean over the batch) and its gradient with
/// respect to every model parameter.
pub fn backward_cross_entropy(
    model: &ModelParameters,
    batch: &Matrix,
    labels: &[usize],
) -> Result<(f64, UpdateVector)> {
    let n_classes = model.output_dim();
    if labels.len() != batch.rows() {
        return Err(SimError::Input(format!(
            "{} labels for {} rows",
            labels.len(),
            batch.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(SimError::Input(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if batch.rows() == 0 {
        return Err(SimError::Input("empty batch".into()));
    }

    let cache = forward_cached(model, batch)?;
    let last = model.layers.last().expect("validated non-empty");

    // Probabilities of the final layer, and the stable per-row loss.
    // When the last activation is SoftmaxOut the cache already holds
    // probabilities but the loss is recomputed from them; for a Linear
    // output the softmax is applied here.
    let out = cache.output();
    let b = batch.rows() as f64;
    let mut d_last = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for i in 0..out.rows() {
        let row = out.row(i);
        let probs_row = d_last.row_mut(i);
        match last.activation {
            Activation::SoftmaxOut => probs_row.copy_from_slice(row),
            Activation::Linear => {
                probs_row.copy_from_slice(row);
                softmax_in_place(probs_row);
            }
            Activation::LeakyRelu(_) => {
                return Err(SimError::Config(
                    "cross-entropy needs a softmax or linear output layer".into(),
                ))
            }
        }
        loss -= probs_row[labels[i]].max(f64::MIN_POSITIVE).ln();
        // d loss / d logits = (p - onehot) / B
        probs_row[labels[i]] -= 1.0;
        for x in probs_row.iter_mut() {
            *x /= b;
        }
    }
    loss /= b;

    let (grad, _) = backprop_through(model, &cache, d_last, true);
    Ok((loss, grad))
}

/// Backpropagate an output-side gradient through the whole model.
///
/// `d_output` is the loss gradient with respect to the model output
/// (post-activation). The final layer must not be `SoftmaxOut`. Returns the
/// flattened parameter gradient and the gradient with respect to the input
/// batch.
pub fn backward_from_output_grad(
    model: &ModelParameters,
    cache: &ForwardCache,
    d_output: Matrix,
) -> (UpdateVector, Matrix) {
    backprop_through(model, cache, d_output, false)
}

/// Shared backprop walk. When `grad_is_pre_activation` the incoming gradient
/// is already with respect to the final layer's pre-activation (the fused
/// softmax/cross-entropy case); otherwise it is with respect to the final
/// post-activation output.
fn backprop_through(
    model: &ModelParameters,
    cache: &ForwardCache,
    d_out: Matrix,
    grad_is_pre_activation: bool,
) -> (UpdateVector, Matrix) {
    let n_layers = model.layers.len();
    let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(n_layers);
    let mut d_act = d_out;

    for (l, layer) in model.layers.iter().enumerate().rev() {
        let input = &cache.activations[l];
        let output = &cache.activations[l + 1];

        // Gradient w.r.t. the pre-activation z.
        let mut d_z = d_act;
        if !(l == n_layers - 1 && grad_is_pre_activation) {
            for (g, &y) in d_z.data_mut().iter_mut().zip(output.data()) {
                *g *= layer.activation.grad_from_output(y);
            }
        }

        // dW = input^T * dZ, db = column sums of dZ, dX = dZ * W^T.
        let mut d_w = Matrix::zeros(layer.in_dim(), layer.out_dim());
        gemm(1.0, input, true, &d_z, false, 0.0, &mut d_w);
        let mut d_b = vec![0.0; layer.out_dim()];
        for i in 0..d_z.rows() {
            for (acc, &g) in d_b.iter_mut().zip(d_z.row(i)) {
                *acc += g;
            }
        }
        let mut d_x = Matrix::zeros(d_z.rows(), layer.in_dim());
        gemm(1.0, &d_z, false, &layer.weight, true, 0.0, &mut d_x);

        grads.push((d_w, d_b));
        d_act = d_x;
    }

    grads.reverse();
    let mut flat = Vec::with_capacity(model.param_count());
    for (d_w, d_b) in grads {
        flat.extend_from_slice(d_w.data());
        flat.extend_from_slice(&d_b);
    }
    (UpdateVector(flat), d_act)
}

/// In-place SGD step: `params -= lr * grad` in flat parameter order.
pub fn sgd_step(model: &mut ModelParameters, grad: &UpdateVector, lr: f64) -> Result<()> {
    if grad.len() != model.param_count() {
        return Err(SimError::Input(format!(
            "gradient length {} does not match parameter count {}",
            grad.len(),
            model.param_count()
        )));
    }
    for (p, &g) in model.params_mut().zip(grad.iter()) {
        *p -= lr * g;
    }
    Ok(())
}

/// Adam optimizer state for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> AdamState {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias correction; increments the step count.
pub fn adam_step(
    state: &mut AdamState,
    model: &mut ModelParameters,
    grad: &UpdateVector,
) -> Result<()> {
    if grad.len() != model.param_count() || grad.len() != state.m.len() {
        return Err(SimError::Input(format!(
            "adam dimensions disagree: grad {}, params {}, state {}",
            grad.len(),
            model.param_count(),
            state.m.len()
        )));
    }
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for ((p, &g), (m, v)) in model
        .params_mut()
        .zip(grad.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / b1t;
        let v_hat = *v / b2t;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Concatenate all parameters in layer order: weights row-major, then bias.
pub fn flatten(model: &ModelParameters) -> UpdateVector {
    let mut flat = Vec::with_capacity(model.param_count());
    for layer in &model.layers {
        flat.extend_from_slice(layer.weight.data());
        flat.extend_from_slice(&layer.bias);
    }
    UpdateVector(flat)
}

/// Rebuild a model from a flat vector; exact inverse of [`flatten`].
pub fn unflatten(flat: &UpdateVector, arch: &Architecture) -> Result<ModelParameters> {
    arch.validate()?;
    if flat.len() != arch.param_count() {
        return Err(SimError::Input(format!(
            "vector length {} does not match architecture parameter count {}",
            flat.len(),
            arch.param_count()
        )));
    }
    let mut layers = Vec::with_capacity(arch.0.len());
    let mut offset = 0;
    for spec in &arch.0 {
        let w_len = spec.in_dim * spec.out_dim;
        let weight = Matrix::from_vec(
            spec.in_dim,
            spec.out_dim,
            flat.0[offset..offset + w_len].to_vec(),
        )
        .expect("sized by construction");
        offset += w_len;
        let bias = flat.0[offset..offset + spec.out_dim].to_vec();
        offset += spec.out_dim;
        layers.push(Layer {
            weight,
            bias,
            activation: spec.activation,
        });
    }
    Ok(ModelParameters { layers })
}
