//! Minimal dense feedforward networks with hand-written backpropagation.
//!
//! Two fixed architectures matter here: the GAN discriminator
//! (2 -> 32 LeakyReLU -> 1 sigmoid, 129 trainable parameters) and the
//! classical baseline generator (6 -> 2 with batch norm and ReLU -> 2
//! sigmoid, 24 trainable parameters — deliberately the same budget as the
//! 24-angle quantum generator). Everything is plain `Vec<f64>` math;
//! gradients are validated against central finite differences in the
//! tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major matrix of f64 used for batches and per-layer buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(
                "matrix rows must be non-empty and of equal length".into(),
            ));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        Matrix {
            rows: points.len(),
            cols: 2,
            data: points.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Pointwise nonlinearity applied after the affine map (and batch norm,
/// when present).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed in terms of the pre-activation `z` and the
    /// already-computed output `y` (the sigmoid case uses `y`).
    #[inline]
    fn derivative(&self, z: f64, y: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Batch normalization with trainable affine parameters and running
/// statistics for eval mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.1,
            epsilon: 1e-5,
        }
    }
}

/// One dense layer: `y = act(bn(x W^T + b))`, batch norm optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNorm>,
}

impl Layer {
    fn trainable_params(&self) -> usize {
        let bn = self.batch_norm.as_ref().map_or(0, |b| b.gamma.len() * 2);
        self.weights.len() + self.biases.len() + bn
    }
}

/// Architecture descriptor consumed by [`Mlp::init`].
#[derive(Clone, Copy, Debug)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

/// The GAN discriminator: 2 -> 32 (LeakyReLU 0.01) -> 1 (sigmoid).
pub fn discriminator_arch() -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            in_dim: 2,
            out_dim: 32,
            activation: Activation::LeakyRelu(0.01),
            batch_norm: false,
        },
        LayerSpec {
            in_dim: 32,
            out_dim: 1,
            activation: Activation::Sigmoid,
            batch_norm: false,
        },
    ]
}

/// The classical baseline generator: 6 -> 2 (batch norm, ReLU) -> 2
/// (sigmoid); 24 trainable parameters, matching the quantum generator.
pub fn classical_generator_arch() -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            in_dim: 6,
            out_dim: 2,
            activation: Activation::Relu,
            batch_norm: true,
        },
        LayerSpec {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Sigmoid,
            batch_norm: false,
        },
    ]
}

/// Whether a forward pass uses batch statistics (training) or running
/// statistics (evaluation) in batch-norm layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
struct BnCache {
    mean: Vec<f64>,
    var_biased: Vec<f64>,
    inv_std: Vec<f64>,
    x_hat: Matrix,
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Matrix,
    preact: Matrix,
    bn: Option<BnCache>,
    act_input: Matrix,
    output: Matrix,
}

/// Intermediate values from one forward pass, consumed by [`Mlp::backward`]
/// and by the running-statistics update.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    mode: Mode,
}

/// Per-parameter gradients in the same order as [`Mlp::params_flat`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub flat: Vec<f64>,
    /// Gradient of the loss with respect to the network input, needed to
    /// chain the discriminator's gradient into a generator.
    pub input: Matrix,
}

/// A feedforward network as an ordered list of layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Deterministic initialization: weights uniform in
    /// `[-sqrt(1/fan_in), +sqrt(1/fan_in)]`, biases zero, batch norm at
    /// identity (gamma 1, beta 0).
    pub fn init(arch: &[LayerSpec], seed: u64) -> Result<Self> {
        if arch.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for w in arch.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer output {} does not feed layer input {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .iter()
            .map(|spec| {
                if spec.in_dim == 0 || spec.out_dim == 0 {
                    return Err(Error::InvalidConfig("zero-width layer".into()));
                }
                let bound = (1.0 / spec.in_dim as f64).sqrt();
                let weights = (0..spec.in_dim * spec.out_dim)
                    .map(|_| rng.gen_range(-bound..=bound))
                    .collect();
                Ok(Layer {
                    in_dim: spec.in_dim,
                    out_dim: spec.out_dim,
                    weights,
                    biases: vec![0.0; spec.out_dim],
                    activation: spec.activation,
                    batch_norm: spec.batch_norm.then(|| BatchNorm::new(spec.out_dim)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Number of trainable parameters (weights, biases, gamma, beta).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::trainable_params).sum()
    }

    /// Flattens trainable parameters layer by layer:
    /// weights (row-major), biases, then gamma and beta when present.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
            if let Some(bn) = &layer.batch_norm {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out
    }

    /// Inverse of [`Mlp::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "network has {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &flat[pos..pos + n];
            pos += n;
            s.to_vec()
        };
        for layer in &mut self.layers {
            layer.weights = take(layer.weights.len());
            layer.biases = take(layer.biases.len());
            if let Some(bn) = &mut layer.batch_norm {
                bn.gamma = take(bn.gamma.len());
                bn.beta = take(bn.beta.len());
            }
        }
        Ok(())
    }

    /// Runs the network on a batch (rows are samples), returning the
    /// output and the cache needed for [`Mlp::backward`]. Does not mutate
    /// the network; running statistics are folded in separately via
    /// [`Mlp::update_running_stats`].
    pub fn forward(&self, batch: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        if batch.cols != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch width {} does not match input dimension {}",
                batch.cols,
                self.input_dim()
            )));
        }
        if batch.rows == 0 {
            return Err(Error::NotEnoughData {
                context: "Mlp::forward",
                min: 1,
                got: 0,
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for layer in &self.layers {
            let input = current;
            let b = input.rows;

            let mut preact = Matrix::zeros(b, layer.out_dim);
            for r in 0..b {
                let x = input.row(r);
                for o in 0..layer.out_dim {
                    let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let z: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                    *preact.at_mut(r, o) = z + layer.biases[o];
                }
            }

            let (act_input, bn_cache) = match (&layer.batch_norm, mode) {
                (Some(bn), Mode::Train) => {
                    let mut mean = vec![0.0; layer.out_dim];
                    let mut var = vec![0.0; layer.out_dim];
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            mean[o] += preact.at(r, o);
                        }
                    }
                    for m in &mut mean {
                        *m /= b as f64;
                    }
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            let d = preact.at(r, o) - mean[o];
                            var[o] += d * d;
                        }
                    }
                    for v in &mut var {
                        *v /= b as f64; // biased, as used for normalization
                    }
                    let inv_std: Vec<f64> =
                        var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
                    let mut x_hat = Matrix::zeros(b, layer.out_dim);
                    let mut out = Matrix::zeros(b, layer.out_dim);
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            let xh = (preact.at(r, o) - mean[o]) * inv_std[o];
                            *x_hat.at_mut(r, o) = xh;
                            *out.at_mut(r, o) = bn.gamma[o] * xh + bn.beta[o];
                        }
                    }
                    (
                        out,
                        Some(BnCache {
                            mean,
                            var_biased: var,
                            inv_std,
                            x_hat,
                        }),
                    )
                }
                (Some(bn), Mode::Eval) => {
                    let mut out = Matrix::zeros(b, layer.out_dim);
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            let xh = (preact.at(r, o) - bn.running_mean[o])
                                / (bn.running_var[o] + bn.epsilon).sqrt();
                            *out.at_mut(r, o) = bn.gamma[o] * xh + bn.beta[o];
                        }
                    }
                    (out, None)
                }
                (None, _) => (preact.clone(), None),
            };

            let mut output = Matrix::zeros(b, layer.out_dim);
            for i in 0..act_input.data.len() {
                output.data[i] = layer.activation.apply(act_input.data[i]);
            }

            current = output.clone();
            caches.push(LayerCache {
                input,
                preact,
                bn: bn_cache,
                act_input,
                output,
            });
        }
        Ok((
            current,
            ForwardCache {
                layers: caches,
                mode,
            },
        ))
    }

    /// Folds the batch statistics recorded in a training-mode cache into
    /// the running statistics: `running = (1 - m) * running + m * batch`
    /// (unbiased variance when the batch has more than one row).
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        if cache.mode != Mode::Train {
            return;
        }
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(bnc)) = (&mut layer.batch_norm, &lc.bn) {
                let b = lc.preact.rows as f64;
                let unbias = if b > 1.0 { b / (b - 1.0) } else { 1.0 };
                for o in 0..bn.gamma.len() {
                    bn.running_mean[o] =
                        (1.0 - bn.momentum) * bn.running_mean[o] + bn.momentum * bnc.mean[o];
                    bn.running_var[o] = (1.0 - bn.momentum) * bn.running_var[o]
                        + bn.momentum * bnc.var_biased[o] * unbias;
                }
            }
        }
    }

    /// Backpropagates `upstream` (dLoss/dOutput, same shape as the forward
    /// output) through the cached pass, producing flat parameter gradients
    /// and the gradient with respect to the input batch.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        let last = cache.layers.last().ok_or_else(|| {
            Error::InvalidConfig("backward called with an empty forward cache".into())
        })?;
        if upstream.rows != last.output.rows || upstream.cols != last.output.cols {
            return Err(Error::DimensionMismatch(format!(
                "upstream gradient is {}x{}, forward output was {}x{}",
                upstream.rows, upstream.cols, last.output.rows, last.output.cols
            )));
        }

        let mut per_layer: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut d_out = upstream.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let b = lc.input.rows;

            // Through the activation.
            let mut d_act = Matrix::zeros(b, layer.out_dim);
            for i in 0..d_act.data.len() {
                d_act.data[i] = d_out.data[i]
                    * layer
                        .activation
                        .derivative(lc.act_input.data[i], lc.output.data[i]);
            }

            // Through batch norm (training mode) when present.
            let (d_pre, d_gamma_beta) = match (&layer.batch_norm, &lc.bn, cache.mode) {
                (Some(bn), Some(bnc), Mode::Train) => {
                    let bf = b as f64;
                    let mut d_gamma = vec![0.0; layer.out_dim];
                    let mut d_beta = vec![0.0; layer.out_dim];
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            d_gamma[o] += d_act.at(r, o) * bnc.x_hat.at(r, o);
                            d_beta[o] += d_act.at(r, o);
                        }
                    }
                    let mut d_pre = Matrix::zeros(b, layer.out_dim);
                    for o in 0..layer.out_dim {
                        let inv_std = bnc.inv_std[o];
                        let mut d_var = 0.0;
                        let mut sum_dxhat = 0.0;
                        let mut sum_centered = 0.0;
                        for r in 0..b {
                            let dxh = d_act.at(r, o) * bn.gamma[o];
                            let centered = lc.preact.at(r, o) - bnc.mean[o];
                            d_var += dxh * centered;
                            sum_dxhat += dxh;
                            sum_centered += centered;
                        }
                        d_var *= -0.5 * inv_std * inv_std * inv_std;
                        let d_mean =
                            -inv_std * sum_dxhat + d_var * (-2.0 / bf) * sum_centered;
                        for r in 0..b {
                            let dxh = d_act.at(r, o) * bn.gamma[o];
                            let centered = lc.preact.at(r, o) - bnc.mean[o];
                            *d_pre.at_mut(r, o) =
                                dxh * inv_std + d_var * 2.0 * centered / bf + d_mean / bf;
                        }
                    }
                    (d_pre, Some((d_gamma, d_beta)))
                }
                (Some(bn), None, Mode::Eval) => {
                    // Eval-mode batch norm is a fixed affine map.
                    let mut d_pre = Matrix::zeros(b, layer.out_dim);
                    let mut d_gamma = vec![0.0; layer.out_dim];
                    let mut d_beta = vec![0.0; layer.out_dim];
                    for r in 0..b {
                        for o in 0..layer.out_dim {
                            let inv_std = 1.0 / (bn.running_var[o] + bn.epsilon).sqrt();
                            let xh = (lc.preact.at(r, o) - bn.running_mean[o]) * inv_std;
                            d_gamma[o] += d_act.at(r, o) * xh;
                            d_beta[o] += d_act.at(r, o);
                            *d_pre.at_mut(r, o) = d_act.at(r, o) * bn.gamma[o] * inv_std;
                        }
                    }
                    (d_pre, Some((d_gamma, d_beta)))
                }
                _ => (d_act, None),
            };

            // Through the affine map.
            let mut d_weights = vec![0.0; layer.weights.len()];
            let mut d_biases = vec![0.0; layer.out_dim];
            let mut d_input = Matrix::zeros(b, layer.in_dim);
            for r in 0..b {
                let x = lc.input.row(r);
                for o in 0..layer.out_dim {
                    let g = d_pre.at(r, o);
                    d_biases[o] += g;
                    let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for i in 0..layer.in_dim {
                        d_weights[o * layer.in_dim + i] += g * x[i];
                        *d_input.at_mut(r, i) += g * wrow[i];
                    }
                }
            }

            let mut flat = d_weights;
            flat.extend_from_slice(&d_biases);
            if let Some((d_gamma, d_beta)) = d_gamma_beta {
                flat.extend_from_slice(&d_gamma);
                flat.extend_from_slice(&d_beta);
            }
            per_layer.push(flat);
            d_out = d_input;
        }

        per_layer.reverse();
        Ok(Gradients {
            flat: per_layer.concat(),
            input: d_out,
        })
    }

    /// Serializes the network (weights and biases row-major per layer).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serialization cannot fail")
    }

    /// Parses and validates a network checkpoint; never panics on
    /// malformed input.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let net: Mlp = serde_json::from_slice(bytes)?;
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::BadCheckpoint("network has no layers".into()));
        }
        let mut prev_out = None;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(Error::BadCheckpoint(format!("layer {i} has a zero dimension")));
            }
            let expected = layer
                .in_dim
                .checked_mul(layer.out_dim)
                .ok_or_else(|| Error::BadCheckpoint(format!("layer {i} dimensions overflow")))?;
            if layer.weights.len() != expected || layer.biases.len() != layer.out_dim {
                return Err(Error::BadCheckpoint(format!(
                    "layer {i} weight/bias shapes do not match {}x{}",
                    layer.out_dim, layer.in_dim
                )));
            }
            if let Some(prev) = prev_out {
                if layer.in_dim != prev {
                    return Err(Error::BadCheckpoint(format!(
                        "layer {i} input {} does not compose with previous output {prev}",
                        layer.in_dim
                    )));
                }
            }
            if let Some(bn) = &layer.batch_norm {
                let d = layer.out_dim;
                if bn.gamma.len() != d
                    || bn.beta.len() != d
                    || bn.running_mean.len() != d
                    || bn.running_var.len() != d
                {
                    return Err(Error::BadCheckpoint(format!(
                        "layer {i} batch-norm vectors do not match width {d}"
                    )));
                }
                if !(bn.momentum.is_finite() && (0.0..=1.0).contains(&bn.momentum))
                    || !(bn.epsilon.is_finite() && bn.epsilon > 0.0)
                    || bn.running_var.iter().any(|v| !v.is_finite() || *v < 0.0)
                {
                    return Err(Error::BadCheckpoint(format!(
                        "layer {i} batch-norm constants out of range"
                    )));
                }
            }
            if let Activation::LeakyRelu(slope) = layer.activation {
                if !slope.is_finite() {
                    return Err(Error::BadCheckpoint(format!("layer {i} has a non-finite slope")));
                }
            }
            let all_finite = layer.weights.iter().chain(&layer.biases).all(|x| x.is_finite())
                && layer.batch_norm.as_ref().map_or(true, |bn| {
                    bn.gamma
                        .iter()
                        .chain(&bn.beta)
                        .chain(&bn.running_mean)
                        .all(|x| x.is_finite())
                });
            if !all_finite {
                return Err(Error::BadCheckpoint(format!(
                    "layer {i} contains non-finite parameters"
                )));
            }
            prev_out = Some(layer.out_dim);
        }
        Ok(())
    }
}

/// Central finite differences of `loss(forward(net, input, mode))` with
/// respect to every trainable parameter — the oracle analytic gradients
/// are checked against.
pub fn numeric_loss_gradient<L>(
    net: &Mlp,
    input: &Matrix,
    mode: Mode,
    loss: L,
    h: f64,
) -> Result<Vec<f64>>
where
    L: Fn(&Matrix) -> f64,
{
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut grads = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut params = base.clone();
        params[i] = base[i] + h;
        probe.set_params_flat(&params)?;
        let up = loss(&probe.forward(input, mode)?.0);
        params[i] = base[i] - h;
        probe.set_params_flat(&params)?;
        let down = loss(&probe.forward(input, mode)?.0);
        grads.push((up - down) / (2.0 * h));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mse_loss(output: &Matrix, targets: &Matrix) -> f64 {
        output
            .data
            .iter()
            .zip(&targets.data)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / output.data.len() as f64
    }

    fn mse_upstream(output: &Matrix, targets: &Matrix) -> Matrix {
        let mut up = Matrix::zeros(output.rows, output.cols);
        for i in 0..output.data.len() {
            up.data[i] = 2.0 * (output.data[i] - targets.data[i]) / output.data.len() as f64;
        }
        up
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(rows, cols);
        for x in &mut m.data {
            *x = rng.gen_range(-1.0..1.0);
        }
        m
    }

    #[test]
    fn architecture_parameter_counts() {
        let d = Mlp::init(&discriminator_arch(), 0).unwrap();
        assert_eq!(d.param_count(), 129);
        let g = Mlp::init(&classical_generator_arch(), 0).unwrap();
        assert_eq!(g.param_count(), 24);
    }

    #[test]
    fn init_is_deterministic_and_fan_in_bounded() {
        let a = Mlp::init(&discriminator_arch(), 7).unwrap();
        let b = Mlp::init(&discriminator_arch(), 7).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        let bound0 = (1.0_f64 / 2.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound0));
        assert!(a.layers[0].biases.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_weights_sigmoid_outputs_half() {
        let mut net = Mlp::init(&discriminator_arch(), 0).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        let batch = random_matrix(4, 2, 1);
        let (out, _) = net.forward(&batch, Mode::Eval).unwrap();
        for y in &out.data {
            assert_abs_diff_eq!(*y, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn leaky_relu_definition() {
        let a = Activation::LeakyRelu(0.01);
        assert_abs_diff_eq!(a.apply(-1.0), -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(a.apply(2.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_outputs_are_strictly_interior() {
        let net = Mlp::init(&discriminator_arch(), 3).unwrap();
        let batch = random_matrix(16, 2, 4);
        let (out, _) = net.forward(&batch, Mode::Eval).unwrap();
        for y in &out.data {
            assert!(*y > 0.0 && *y < 1.0);
        }
    }

    #[test]
    fn batch_norm_zero_variance_batch_outputs_beta() {
        let mut net = Mlp::init(
            &[LayerSpec {
                in_dim: 2,
                out_dim: 2,
                activation: Activation::Identity,
                batch_norm: true,
            }],
            0,
        )
        .unwrap();
        if let Some(bn) = &mut net.layers[0].batch_norm {
            bn.beta = vec![0.7, -0.3];
        }
        // Identical rows -> zero batch variance.
        let batch = Matrix::from_rows(&[vec![0.4, 0.6], vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        let (out, _) = net.forward(&batch, Mode::Train).unwrap();
        for r in 0..3 {
            assert_abs_diff_eq!(out.at(r, 0), 0.7, epsilon = 1e-9);
            assert_abs_diff_eq!(out.at(r, 1), -0.3, epsilon = 1e-9);
        }
    }

    #[test]
    fn eval_mode_is_row_wise_and_batch_size_independent() {
        let mut net = Mlp::init(&classical_generator_arch(), 5).unwrap();
        // Make running stats non-trivial first.
        let warm = random_matrix(32, 6, 6);
        let (_, cache) = net.forward(&warm, Mode::Train).unwrap();
        net.update_running_stats(&cache);

        let batch = random_matrix(8, 6, 7);
        let (full, _) = net.forward(&batch, Mode::Eval).unwrap();
        for r in 0..batch.rows {
            let single = Matrix {
                rows: 1,
                cols: 6,
                data: batch.row(r).to_vec(),
            };
            let (one, _) = net.forward(&single, Mode::Eval).unwrap();
            for c in 0..2 {
                assert_abs_diff_eq!(one.at(0, c), full.at(r, c), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_bad_batches() {
        let net = Mlp::init(&discriminator_arch(), 0).unwrap();
        assert!(net.forward(&Matrix::zeros(0, 2), Mode::Eval).is_err());
        assert!(net.forward(&random_matrix(3, 5, 0), Mode::Eval).is_err());
    }

    #[test]
    fn single_linear_layer_gradient_closed_form() {
        // L = mean (Wx + b - y)^2 over a batch; compare dW to the analytic
        // value 2/(B*out) * sum_r d_r x_r^T.
        let mut net = Mlp::init(
            &[LayerSpec {
                in_dim: 3,
                out_dim: 2,
                activation: Activation::Identity,
                batch_norm: false,
            }],
            11,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for w in &mut net.layers[0].weights {
            *w = rng.gen_range(-1.0..1.0);
        }
        let batch = random_matrix(5, 3, 13);
        let targets = random_matrix(5, 2, 14);
        let (out, cache) = net.forward(&batch, Mode::Train).unwrap();
        let grads = net.backward(&cache, &mse_upstream(&out, &targets)).unwrap();

        let scale = 2.0 / (5.0 * 2.0);
        for o in 0..2 {
            for i in 0..3 {
                let mut expect = 0.0;
                for r in 0..5 {
                    expect += scale * (out.at(r, o) - targets.at(r, o)) * batch.at(r, i);
                }
                assert_abs_diff_eq!(grads.flat[o * 3 + i], expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::init(&discriminator_arch(), 2).unwrap();
        let batch = random_matrix(4, 2, 3);
        let (out, cache) = net.forward(&batch, Mode::Train).unwrap();
        let grads = net
            .backward(&cache, &Matrix::zeros(out.rows, out.cols))
            .unwrap();
        assert!(grads.flat.iter().all(|g| *g == 0.0));
        assert!(grads.input.data.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn backprop_matches_finite_differences_on_random_nets() {
        // 20 random nets across both architectures, training mode, h = 1e-5,
        // relative error <= 1e-4 (absolute floor for near-zero entries).
        for seed in 0..20u64 {
            let (arch, in_dim) = if seed % 2 == 0 {
                (discriminator_arch(), 2)
            } else {
                (classical_generator_arch(), 6)
            };
            let net = Mlp::init(&arch, seed).unwrap();
            let batch = random_matrix(6, in_dim, 100 + seed);
            let targets = random_matrix(6, net.output_dim(), 200 + seed);

            let (out, cache) = net.forward(&batch, Mode::Train).unwrap();
            let analytic = net.backward(&cache, &mse_upstream(&out, &targets)).unwrap();
            let numeric = numeric_loss_gradient(
                &net,
                &batch,
                Mode::Train,
                |o| mse_loss(o, &targets),
                1e-5,
            )
            .unwrap();

            for (i, (a, n)) in analytic.flat.iter().zip(&numeric).enumerate() {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                assert!(
                    rel <= 1e-4,
                    "seed {seed} param {i}: analytic {a} vs numeric {n} (rel {rel})"
                );
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        // The input gradient is what chains the discriminator into the
        // classical generator, so it gets its own check.
        let net = Mlp::init(&discriminator_arch(), 21).unwrap();
        let batch = random_matrix(3, 2, 22);
        let targets = random_matrix(3, 1, 23);
        let (out, cache) = net.forward(&batch, Mode::Train).unwrap();
        let grads = net.backward(&cache, &mse_upstream(&out, &targets)).unwrap();

        let h = 1e-6;
        for r in 0..batch.rows {
            for c in 0..batch.cols {
                let mut up = batch.clone();
                *up.at_mut(r, c) += h;
                let mut down = batch.clone();
                *down.at_mut(r, c) -= h;
                let lu = mse_loss(&net.forward(&up, Mode::Train).unwrap().0, &targets);
                let ld = mse_loss(&net.forward(&down, Mode::Train).unwrap().0, &targets);
                let fd = (lu - ld) / (2.0 * h);
                let a = grads.input.at(r, c);
                assert!(
                    (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6) <= 1e-4,
                    "input ({r},{c}): analytic {a} vs numeric {fd}"
                );
            }
        }
    }

    #[test]
    fn running_stats_update_uses_momentum() {
        let mut net = Mlp::init(&classical_generator_arch(), 1).unwrap();
        let batch = random_matrix(16, 6, 2);
        let (_, cache) = net.forward(&batch, Mode::Train).unwrap();
        let before = net.layers[0].batch_norm.as_ref().unwrap().running_mean.clone();
        net.update_running_stats(&cache);
        let bn = net.layers[0].batch_norm.as_ref().unwrap();
        // Started at zero, so the new mean is 0.9 * 0 + 0.1 * batch_mean.
        assert_eq!(before, vec![0.0, 0.0]);
        assert!(bn.running_mean.iter().any(|m| *m != 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::init(&classical_generator_arch(), 9).unwrap();
        let json = net.to_json();
        let back = Mlp::parse(json.as_bytes()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_rejects_malformed_payloads() {
        assert!(Mlp::parse(b"[1,2,3]").is_err());
        // Weight count not matching the declared shape.
        let bad = r#"{"layers":[{"in_dim":2,"out_dim":2,"weights":[0.0],"biases":[0.0,0.0],"activation":"relu","batch_norm":null}]}"#;
        assert!(Mlp::parse(bad.as_bytes()).is_err());
        // Non-composing layers.
        let bad = r#"{"layers":[
            {"in_dim":2,"out_dim":3,"weights":[0,0,0,0,0,0],"biases":[0,0,0],"activation":"relu","batch_norm":null},
            {"in_dim":2,"out_dim":1,"weights":[0,0],"biases":[0],"activation":"sigmoid","batch_norm":null}
        ]}"#;
        assert!(Mlp::parse(bad.as_bytes()).is_err());
        // Non-finite weight.
        let bad = r#"{"layers":[{"in_dim":1,"out_dim":1,"weights":[null],"biases":[0.0],"activation":"identity","batch_norm":null}]}"#;
        assert!(Mlp::parse(bad.as_bytes()).is_err());
    }
}
