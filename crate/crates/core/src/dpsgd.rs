//! Full-batch DP-SGD.
//!
//! Each iteration computes every per-example gradient, clips it to L2 norm
//! `C`, sums, adds `N(0, C²σ²I)` noise, divides by the batch size `B` and
//! takes a step of size η. There is no sub-sampling: every step uses the whole
//! dataset, and configurations with `B` smaller than the dataset are rejected.
//!
//! Noise for iteration `t` is drawn from ChaCha20 stream `t` of the run seed
//! through `rand_distr::StandardNormal` (ziggurat), so a run replays
//! bit-for-bit. This is a statistical generator: fine for auditing, not for
//! protecting real data.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{l2_norm, loss_and_gradient_into, Dataset, ModelSpec, ParamVector};
use crate::seeding::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub noise_multiplier: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iterations == 0 {
            problems.push("iterations must be ≥ 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be ≥ 1".to_string());
        }
        if !(self.clip_norm > 0.0) {
            problems.push(format!("clip_norm {} must be > 0", self.clip_norm));
        }
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            problems.push(format!("noise_multiplier {} must be ≥ 0", self.noise_multiplier));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Scales `g` in place by `1 / max(1, ‖g‖₂ / C)`.
pub fn clip_in_place(g: &mut [f64], clip_norm: f64) {
    let norm = l2_norm(g);
    let scale = 1.0 / (norm / clip_norm).max(1.0);
    if scale < 1.0 {
        g.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn clip_gradient(g: &ParamVector, clip_norm: f64) -> ParamVector {
    let mut out = g.clone();
    clip_in_place(out.as_mut_slice(), clip_norm);
    out
}

/// Observer for the internals of a training run.
pub trait TrainHook {
    /// Called with each clipped per-example gradient before it enters the sum.
    fn on_clipped(&mut self, _iteration: usize, _sample: usize, _clipped: &[f64]) {}

    /// Called with the raw noise vector `N(0, C²σ²I)` of each iteration.
    fn on_noise(&mut self, _iteration: usize, _noise: &[f64]) {}
}

/// A hook that observes nothing.
pub struct NoHook;

impl TrainHook for NoHook {}

/// Sum of clipped per-example gradients at `params`.
pub fn clipped_gradient_sum(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &Dataset,
    clip_norm: f64,
) -> Result<ParamVector> {
    spec.check_params(params)?;
    spec.check_dataset(data)?;
    let mut sum = vec![0.0; params.len()];
    let mut scratch = vec![0.0; params.len()];
    accumulate_clipped(spec, params.as_slice(), data, clip_norm, 0, &mut sum, &mut scratch, &mut NoHook)?;
    Ok(ParamVector::from_vec(sum))
}

#[allow(clippy::too_many_arguments)]
fn accumulate_clipped<H: TrainHook>(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    clip_norm: f64,
    iteration: usize,
    sum: &mut [f64],
    scratch: &mut [f64],
    hook: &mut H,
) -> Result<()> {
    sum.iter_mut().for_each(|v| *v = 0.0);
    for (i, sample) in data.samples().iter().enumerate() {
        loss_and_gradient_into(spec, params, sample, scratch)
            .map_err(|_| Error::Divergence { iteration: Some(iteration) })?;
        clip_in_place(scratch, clip_norm);
        debug_assert!(l2_norm(scratch) <= clip_norm * (1.0 + 1e-12));
        hook.on_clipped(iteration, i, scratch);
        for (acc, g) in sum.iter_mut().zip(scratch.iter()) {
            *acc += g;
        }
    }
    Ok(())
}

/// Mean L2 norm of the clipped per-example gradients at `params`.
pub fn mean_clipped_gradient_norm(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &Dataset,
    clip_norm: f64,
) -> Result<f64> {
    struct Norms(f64);
    impl TrainHook for Norms {
        fn on_clipped(&mut self, _: usize, _: usize, g: &[f64]) {
            self.0 += l2_norm(g);
        }
    }
    spec.check_params(params)?;
    spec.check_dataset(data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut norms = Norms(0.0);
    let mut sum = vec![0.0; params.len()];
    let mut scratch = vec![0.0; params.len()];
    accumulate_clipped(spec, params.as_slice(), data, clip_norm, 0, &mut sum, &mut scratch, &mut norms)?;
    Ok(norms.0 / data.len() as f64)
}

/// Runs `hp.iterations` full-batch DP-SGD steps from `theta0`.
pub fn dpsgd_train(
    data: &Dataset,
    spec: &ModelSpec,
    theta0: &ParamVector,
    hp: &HyperParams,
    seed: u64,
) -> Result<ParamVector> {
    dpsgd_train_with_hook(data, spec, theta0, hp, seed, &mut NoHook)
}

pub fn dpsgd_train_with_hook<H: TrainHook>(
    data: &Dataset,
    spec: &ModelSpec,
    theta0: &ParamVector,
    hp: &HyperParams,
    seed: u64,
    hook: &mut H,
) -> Result<ParamVector> {
    hp.validate()?;
    spec.check_params(theta0)?;
    spec.check_dataset(data)?;
    if data.is_empty() {
        return Err(Error::shape("DP-SGD needs a non-empty dataset"));
    }
    if hp.batch_size < data.len() {
        return Err(Error::InvalidConfig(vec![format!(
            "batch_size {} is smaller than the dataset ({}); only full-batch training is supported",
            hp.batch_size,
            data.len()
        )]));
    }

    let mut theta = theta0.clone();
    let dim = theta.len();
    let mut sum = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    // σ = 0 means no noise even when C = ∞.
    let noise_std = if hp.noise_multiplier == 0.0 { 0.0 } else { hp.clip_norm * hp.noise_multiplier };
    let step = hp.learning_rate / hp.batch_size as f64;

    for t in 0..hp.iterations {
        accumulate_clipped(spec, theta.as_slice(), data, hp.clip_norm, t, &mut sum, &mut scratch, hook)?;
        let mut rng = stream_rng(seed, t as u64);
        for v in noise.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = noise_std * z;
        }
        hook.on_noise(t, &noise);
        for ((p, s), n) in theta.as_mut_slice().iter_mut().zip(&sum).zip(&noise) {
            *p -= step * (s + n);
        }
        if !theta.is_finite() {
            return Err(Error::Divergence { iteration: Some(t) });
        }
    }
    Ok(theta)
}
