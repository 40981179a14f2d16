//! Average-case (random) versus worst-case (pretrained) initialisation on
//! the same private data, canary and noise level. One audit at this size is
//! noisy; `campaigns/init_comparison.toml` repeats the comparison at scale.
//!
//! Usage: `cargo run --release --example init_comparison -- [epsilon] [runs]`

use dpsgd_audit::audit::{run_audit, AuditConfig, InitStrategy, ThresholdSelection};
use dpsgd_audit::canary::CanarySpec;
use dpsgd_audit::data::{split_private_aux, synth_blobs, SplitSpec};
use dpsgd_audit::dpsgd::{mean_clipped_gradient_norm, HyperParams};
use dpsgd_audit::gdp::{calibrate_sigma, PrivacyBudget};
use dpsgd_audit::nncore::{ModelSpec, PretrainConfig};

fn main() -> dpsgd_audit::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(10.0, |a| a.parse().expect("epsilon"));
    let runs: usize = args.next().map_or(50, |a| a.parse().expect("runs"));

    let full = synth_blobs(4, 20, 100, 2.0, 3)?;
    let (private, aux) = split_private_aux(&full, &SplitSpec { fraction: 0.5, seed: 4, subsample: None })?;
    let model = ModelSpec::dense(20, &[32], 4)?;
    let iterations = 25;
    let sigma = calibrate_sigma(PrivacyBudget::new(epsilon, 1e-5)?, iterations as u64)?;
    let pretrain = PretrainConfig { epochs: 5, learning_rate: 0.1, batch_size: 8 };

    for (name, init) in [("average", InitStrategy::AverageCase), ("worst", InitStrategy::WorstCase { pretrain })] {
        let config = AuditConfig {
            runs_per_world: runs,
            confidence: 0.95,
            target_delta: 1e-5,
            canary: CanarySpec::Blank { label: 0 },
            init,
            hyper: HyperParams {
                iterations,
                learning_rate: 4.0,
                batch_size: private.len() + 1,
                clip_norm: 1.0,
                noise_multiplier: sigma,
            },
            model: model.clone(),
            threshold_selection: ThresholdSelection::Optimistic,
            workers: None,
            exclude_diverged: false,
        };
        let outcome = run_audit(&config, &private, Some(&aux), 5, 6)?;
        let norm = mean_clipped_gradient_norm(&model, &outcome.initial_params, &private, 1.0)?;
        println!(
            "{name:>8}: ε_emp {:.3}  μ_emp {:.3}  fp {}/{}  fn {}/{}  mean clipped grad norm at θ₀ {norm:.3}",
            outcome.report.epsilon_emp,
            outcome.report.mu_emp,
            outcome.report.fp,
            runs,
            outcome.report.fn_count,
            runs,
        );
    }
    Ok(())
}
