//! Audits a single noisy step whose only non-zero gradient is the canary's,
//! so the empirical ε should approach the theoretical one as runs grow.
//!
//! Usage: `cargo run --release --example mechanism_audit -- [epsilon] [runs]`

use dpsgd_audit::audit::{best_threshold_eps, collect_observations, AuditConfig, InitStrategy, ThresholdSelection};
use dpsgd_audit::canary::CanarySpec;
use dpsgd_audit::dpsgd::HyperParams;
use dpsgd_audit::gdp::{calibrate_sigma, PrivacyBudget};
use dpsgd_audit::nncore::{Dataset, ModelSpec, ParamVector, Sample};

fn main() -> dpsgd_audit::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(2.0, |a| a.parse().expect("epsilon"));
    let runs: usize = args.next().map_or(2000, |a| a.parse().expect("runs"));

    // Class-0 data under a bias so large that softmax is exactly (1, 0):
    // every real gradient is zero.
    let spec = ModelSpec::logistic(2, 2)?;
    let private = Dataset::new(2, 2, (0..50).map(|i| Sample::new(vec![i as f64 / 50.0, 0.5], 0)).collect())?;
    let mut theta0 = ParamVector::zeros(spec.num_params());
    theta0.as_mut_slice()[spec.layers()[0].bias_range()].copy_from_slice(&[1000.0, 0.0]);

    let sigma = calibrate_sigma(PrivacyBudget::new(epsilon, 1e-5)?, 1)?;
    let config = AuditConfig {
        runs_per_world: runs,
        confidence: 0.95,
        target_delta: 1e-5,
        canary: CanarySpec::Blank { label: 1 },
        init: InitStrategy::AverageCase,
        hyper: HyperParams {
            iterations: 1,
            learning_rate: 1.0,
            batch_size: private.len() + 1,
            clip_norm: 1.0,
            noise_multiplier: sigma,
        },
        model: spec,
        threshold_selection: ThresholdSelection::Optimistic,
        workers: None,
        exclude_diverged: false,
    };
    let canary = config.canary.build(&private, &config.model, &theta0)?;
    let obs = collect_observations(&config, &private, &canary, &theta0, 7)?;
    let report = best_threshold_eps(&obs, &config)?;
    println!("{}", report.to_json_line()?);
    println!("theoretical ε {epsilon}, empirical ε {:.4} (μ {:.4})", report.epsilon_emp, report.mu_emp);
    Ok(())
}
