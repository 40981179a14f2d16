//! Small dense classifiers with exact per-example gradients.
//!
//! A [`ModelSpec`] is a list of layer widths `input → hidden… → classes`.
//! Hidden layers use tanh, the output layer is linear and feeds a softmax
//! cross-entropy loss. With no hidden layer the model is multinomial logistic
//! regression.
//!
//! Parameters live in one flat [`ParamVector`]. Layer `l` occupies a weight
//! block of `fan_out × fan_in` entries (row-major, one row per output unit)
//! followed by `fan_out` biases; layers are laid out in order.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Sample { features, label }
    }
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    num_classes: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, num_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::shape("a dataset needs at least two classes"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::shape(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::shape(format!(
                    "sample {i} has label {} but only {num_classes} classes",
                    s.label
                )));
            }
        }
        Ok(Dataset {
            dim,
            num_classes,
            samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// The neighbouring dataset `D ∪ {sample}`.
    pub fn with_sample(&self, sample: Sample) -> Result<Dataset> {
        let mut samples = self.samples.clone();
        samples.push(sample);
        Dataset::new(self.dim, self.num_classes, samples)
    }
}

/// Layer widths from input to output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    widths: Vec<usize>,
}

/// Offsets of one layer inside a [`ParamVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerLayout {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.fan_out
    }
}

impl ModelSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::shape("a model needs at least an input and an output width"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::shape("layer widths must be positive"));
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::shape("the output layer needs at least two classes"));
        }
        Ok(ModelSpec { widths })
    }

    /// Multinomial logistic regression.
    pub fn logistic(input: usize, classes: usize) -> Result<Self> {
        ModelSpec::new(vec![input, classes])
    }

    /// `input → hidden[0] → … → classes` with tanh hidden layers.
    pub fn dense(input: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(classes);
        ModelSpec::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layers(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let layout = LayerLayout {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                };
                offset += fan_in * fan_out + fan_out;
                layout
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::shape(format!(
                "parameter vector has {} entries, model expects {}",
                params.len(),
                self.num_params()
            )));
        }
        Ok(())
    }

    pub fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.features.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "sample has {} features, model expects {}",
                sample.features.len(),
                self.input_dim()
            )));
        }
        if sample.label >= self.num_classes() {
            return Err(Error::shape(format!(
                "label {} out of range for {} classes",
                sample.label,
                self.num_classes()
            )));
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.input_dim() || data.num_classes() != self.num_classes() {
            return Err(Error::shape(format!(
                "dataset is {}-dim with {} classes, model is {}-dim with {} classes",
                data.dim(),
                data.num_classes(),
                self.input_dim(),
                self.num_classes()
            )));
        }
        Ok(())
    }
}

/// Flattened model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One layer's weights (row-major, `fan_out × fan_in`) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub fn unflatten(spec: &ModelSpec, params: &ParamVector) -> Result<Vec<LayerParams>> {
    spec.check_params(params)?;
    Ok(spec
        .layers()
        .iter()
        .map(|l| LayerParams {
            weights: params.0[l.weight_range()].to_vec(),
            biases: params.0[l.bias_range()].to_vec(),
        })
        .collect())
}

pub fn flatten(spec: &ModelSpec, layers: &[LayerParams]) -> Result<ParamVector> {
    let layouts = spec.layers();
    if layers.len() != layouts.len() {
        return Err(Error::shape("layer count does not match the model"));
    }
    let mut out = Vec::with_capacity(spec.num_params());
    for (l, p) in layouts.iter().zip(layers) {
        if p.weights.len() != l.fan_in * l.fan_out || p.biases.len() != l.fan_out {
            return Err(Error::shape("layer parameter block has the wrong size"));
        }
        out.extend_from_slice(&p.weights);
        out.extend_from_slice(&p.biases);
    }
    Ok(ParamVector(out))
}

/// Activations of every layer: `acts[0]` is the input, `acts[L]` the logits.
fn forward_activations(spec: &ModelSpec, params: &[f64], features: &[f64]) -> Vec<Vec<f64>> {
    let layers = spec.layers();
    let last = layers.len() - 1;
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(features.to_vec());
    for (idx, l) in layers.iter().enumerate() {
        let input = &acts[idx];
        let w = &params[l.weight_range()];
        let b = &params[l.bias_range()];
        let out: Vec<f64> = (0..l.fan_out)
            .map(|j| {
                let row = &w[j * l.fan_in..(j + 1) * l.fan_in];
                let z = b[j] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
                if idx == last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
        acts.push(out);
    }
    acts
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Output-layer logits.
pub fn logits(spec: &ModelSpec, params: &ParamVector, features: &[f64]) -> Result<Vec<f64>> {
    spec.check_params(params)?;
    if features.len() != spec.input_dim() {
        return Err(Error::shape(format!(
            "{} features given, model expects {}",
            features.len(),
            spec.input_dim()
        )));
    }
    let mut acts = forward_activations(spec, params.as_slice(), features);
    let out = acts.pop().unwrap();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Divergence { iteration: None })
    }
}

/// Softmax cross-entropy `−log softmax(logits)[label]`.
pub fn forward_loss(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<f64> {
    spec.check_sample(sample)?;
    let z = logits(spec, params, &sample.features)?;
    let loss = log_sum_exp(&z) - z[sample.label];
    if loss.is_finite() {
        // Rounding can push a saturated loss a hair below zero.
        Ok(loss.max(0.0))
    } else {
        Err(Error::Divergence { iteration: None })
    }
}

/// Loss and gradient, writing the gradient into `grad`.
pub(crate) fn loss_and_gradient_into(
    spec: &ModelSpec,
    params: &[f64],
    sample: &Sample,
    grad: &mut [f64],
) -> Result<f64> {
    let layers = spec.layers();
    let acts = forward_activations(spec, params, &sample.features);
    let z = acts.last().unwrap();
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence { iteration: None });
    }
    let lse = log_sum_exp(z);
    let loss = (lse - z[sample.label]).max(0.0);

    // dL/dlogits = softmax − onehot.
    let mut delta: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
    delta[sample.label] -= 1.0;

    for (idx, l) in layers.iter().enumerate().rev() {
        let input = &acts[idx];
        let (w_range, b_range) = (l.weight_range(), l.bias_range());
        {
            let gw = &mut grad[w_range.clone()];
            for j in 0..l.fan_out {
                let dj = delta[j];
                let row = &mut gw[j * l.fan_in..(j + 1) * l.fan_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g = dj * x;
                }
            }
        }
        grad[b_range].copy_from_slice(&delta);
        if idx == 0 {
            break;
        }
        // Back through the weights, then through tanh of the layer below.
        let w = &params[w_range];
        let mut below = vec![0.0; l.fan_in];
        for (j, &dj) in delta.iter().enumerate() {
            let row = &w[j * l.fan_in..(j + 1) * l.fan_in];
            for (acc, wji) in below.iter_mut().zip(row) {
                *acc += dj * wji;
            }
        }
        for (d, h) in below.iter_mut().zip(input) {
            *d *= 1.0 - h * h;
        }
        delta = below;
    }
    Ok(loss)
}

/// Exact gradient of [`forward_loss`] with respect to every parameter.
pub fn per_example_gradient(
    spec: &ModelSpec,
    params: &ParamVector,
    sample: &Sample,
) -> Result<ParamVector> {
    spec.check_params(params)?;
    spec.check_sample(sample)?;
    let mut grad = vec![0.0; params.len()];
    loss_and_gradient_into(spec, params.as_slice(), sample, &mut grad)?;
    Ok(ParamVector(grad))
}

/// Index of the largest logit.
pub fn predict(spec: &ModelSpec, params: &ParamVector, features: &[f64]) -> Result<usize> {
    let z = logits(spec, params, features)?;
    Ok(argmax(&z))
}

pub(crate) fn argmax(z: &[f64]) -> usize {
    z.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Fraction of samples classified correctly.
pub fn accuracy(spec: &ModelSpec, params: &ParamVector, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in data.samples() {
        if predict(spec, params, &s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Xavier/Glorot uniform weights, zero biases.
pub fn xavier_init(spec: &ModelSpec, seed: u64) -> ParamVector {
    let mut rng = stream_rng(seed, 0);
    let mut params = vec![0.0; spec.num_params()];
    for l in spec.layers() {
        let bound = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        for w in &mut params[l.weight_range()] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    ParamVector(params)
}

/// Non-private mini-batch SGD settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 5,
            learning_rate: 0.01,
            batch_size: 32,
        }
    }
}

/// Plain mini-batch SGD from `xavier_init(spec, seed)`; no clipping, no noise.
pub fn sgd_pretrain(
    spec: &ModelSpec,
    aux: &Dataset,
    config: &PretrainConfig,
    seed: u64,
) -> Result<ParamVector> {
    sgd_pretrain_with(spec, aux, config, seed, |_, _| Ok(()))
}

/// [`sgd_pretrain`], calling `on_epoch(epoch, params)` before the first epoch
/// and after each one.
pub fn sgd_pretrain_with<F>(
    spec: &ModelSpec,
    aux: &Dataset,
    config: &PretrainConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<ParamVector>
where
    F: FnMut(usize, &ParamVector) -> Result<()>,
{
    spec.check_dataset(aux)?;
    if aux.is_empty() {
        return Err(Error::shape("pretraining needs a non-empty auxiliary dataset"));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::domain("pretraining needs batch_size ≥ 1 and learning_rate > 0"));
    }
    let mut params = xavier_init(spec, seed);
    on_epoch(0, &params)?;
    let mut order: Vec<usize> = (0..aux.len()).collect();
    let mut shuffle_rng = stream_rng(seed, 1);
    let mut grad = vec![0.0; params.len()];
    let mut batch_grad = vec![0.0; params.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                loss_and_gradient_into(spec, params.as_slice(), &aux.samples()[i], &mut grad)?;
                for (acc, g) in batch_grad.iter_mut().zip(&grad) {
                    *acc += g;
                }
            }
            let step = config.learning_rate / batch.len() as f64;
            for (p, g) in params.0.iter_mut().zip(&batch_grad) {
                *p -= step * g;
            }
            if !params.is_finite() {
                return Err(Error::Divergence { iteration: Some(epoch) });
            }
        }
        on_epoch(epoch + 1, &params)?;
    }
    Ok(params)
}
