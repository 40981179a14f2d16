#![allow(dead_code)]

use dpsgd_audit::audit::{AuditConfig, InitStrategy, ThresholdSelection};
use dpsgd_audit::canary::CanarySpec;
use dpsgd_audit::dpsgd::HyperParams;
use dpsgd_audit::nncore::{per_example_gradient, Dataset, ModelSpec, ParamVector, Sample};
use dpsgd_audit::seeding::stream_rng;
use rand::Rng;

/// A logistic model whose biases are saturated on class 0, so every class-0
/// sample has an exactly-zero gradient, and a blank class-1 canary whose
/// gradient `(1, −1)` on the biases has norm √2 > C = 1.
pub struct SaturatedInstance {
    pub spec: ModelSpec,
    pub private: Dataset,
    pub aux: Dataset,
    pub theta0: ParamVector,
    pub canary: Sample,
}

pub fn saturated_instance(n: usize, seed: u64) -> SaturatedInstance {
    let dim = 2;
    let spec = ModelSpec::logistic(dim, 2).unwrap();
    let mut rng = stream_rng(seed, 0);
    let mut draw = |m: usize| {
        let samples = (0..m)
            .map(|_| Sample::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(), 0))
            .collect();
        Dataset::new(dim, 2, samples).unwrap()
    };
    let private = draw(n);
    let aux = draw(n);
    // Optimum of the one-class aux problem, up to floating point: softmax
    // returns exactly (1, 0).
    let mut theta0 = ParamVector::zeros(spec.num_params());
    let bias = spec.layers()[0].bias_range();
    theta0.as_mut_slice()[bias].copy_from_slice(&[1000.0, 0.0]);
    for s in aux.samples().iter().chain(private.samples()) {
        assert!(per_example_gradient(&spec, &theta0, s).unwrap().as_slice().iter().all(|&g| g == 0.0));
    }
    let canary = Sample::new(vec![0.0; dim], 1);
    SaturatedInstance { spec, private, aux, theta0, canary }
}

pub fn mechanism_audit_config(spec: &ModelSpec, n: usize, runs: usize, sigma: f64) -> AuditConfig {
    AuditConfig {
        runs_per_world: runs,
        confidence: 0.95,
        target_delta: 1e-5,
        canary: CanarySpec::Blank { label: 1 },
        init: InitStrategy::AverageCase,
        hyper: HyperParams {
            iterations: 1,
            learning_rate: 1.0,
            batch_size: n + 1,
            clip_norm: 1.0,
            noise_multiplier: sigma,
        },
        model: spec.clone(),
        threshold_selection: ThresholdSelection::Optimistic,
        workers: None,
        exclude_diverged: false,
    }
}

pub fn random_spec(rng: &mut impl Rng) -> ModelSpec {
    let input = rng.random_range(1..6);
    let classes = rng.random_range(2..6);
    let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..6)).collect();
    ModelSpec::dense(input, &hidden, classes).unwrap()
}

pub fn random_params(spec: &ModelSpec, rng: &mut impl Rng) -> ParamVector {
    ParamVector::from_vec((0..spec.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect())
}

pub fn random_sample(spec: &ModelSpec, rng: &mut impl Rng) -> Sample {
    Sample::new(
        (0..spec.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        rng.random_range(0..spec.num_classes()),
    )
}

pub fn random_dataset(spec: &ModelSpec, n: usize, rng: &mut impl Rng) -> Dataset {
    let samples = (0..n).map(|_| random_sample(spec, rng)).collect();
    Dataset::new(spec.input_dim(), spec.num_classes(), samples).unwrap()
}

/// Norm-wise relative error of `got` against central finite differences of
/// the loss with step `h`.
pub fn finite_difference_error(spec: &ModelSpec, params: &ParamVector, sample: &Sample, h: f64) -> f64 {
    use dpsgd_audit::nncore::forward_loss;
    let g = per_example_gradient(spec, params, sample).unwrap();
    let mut diff = 0.0;
    let mut norm_fd = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.as_mut_slice()[i] += h;
        let mut minus = params.clone();
        minus.as_mut_slice()[i] -= h;
        let fd = (forward_loss(spec, &plus, sample).unwrap() - forward_loss(spec, &minus, sample).unwrap()) / (2.0 * h);
        diff += (fd - g.as_slice()[i]).powi(2);
        norm_fd += fd * fd;
    }
    diff.sqrt() / g.l2_norm().max(norm_fd.sqrt()).max(1e-12)
}

/// Φ by quadrature of the density, independent of the library's erfc.
pub fn normal_cdf_by_quadrature(x: f64) -> f64 {
    fn upper_tail(z: f64) -> f64 {
        // Simpson's rule on [z, z + 14]; the density beyond is negligible.
        let steps = 20_000;
        let h = 14.0 / steps as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = pdf(z) + pdf(z + 14.0);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * pdf(z + i as f64 * h);
        }
        sum * h / 3.0
    }
    if x < 0.0 {
        upper_tail(-x)
    } else {
        1.0 - upper_tail(x)
    }
}

pub fn bisect(mut lo: f64, mut hi: f64, increasing: impl Fn(f64) -> f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if increasing(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// ε at which the μ-GDP trade-off curve reaches `delta`, using only
/// quadrature Φ and bisection.
pub fn epsilon_oracle(mu: f64, delta: f64) -> f64 {
    let phi = normal_cdf_by_quadrature;
    let delta_at = |eps: f64| phi(-eps / mu + mu / 2.0) - eps.exp() * phi(-eps / mu - mu / 2.0);
    // δ(ε) is decreasing; bisect on −δ.
    bisect(0.0, 100.0, |e| -delta_at(e), -delta)
}
