//! Trains one hidden-layer networks with DP-SGD on synthetic blobs at a few
//! privacy levels and prints train/test accuracy.

use dpsgd_audit::data::{split_private_aux, synth_blobs, SplitSpec};
use dpsgd_audit::dpsgd::{dpsgd_train, HyperParams};
use dpsgd_audit::gdp::{calibrate_sigma, PrivacyBudget};
use dpsgd_audit::nncore::{accuracy, xavier_init, ModelSpec};

fn main() -> dpsgd_audit::Result<()> {
    let full = synth_blobs(4, 10, 200, 3.0, 1)?;
    let (train, test) = split_private_aux(&full, &SplitSpec { fraction: 0.5, seed: 2, subsample: None })?;
    let spec = ModelSpec::dense(10, &[16], 4)?;
    let theta0 = xavier_init(&spec, 3);
    let iterations = 50;
    println!("{:>8} {:>10} {:>8} {:>8}", "ε", "σ", "train", "test");
    for eps in [f64::INFINITY, 10.0, 2.0, 0.5] {
        let sigma = if eps.is_finite() {
            calibrate_sigma(PrivacyBudget::new(eps, 1e-5)?, iterations as u64)?
        } else {
            0.0
        };
        let hp = HyperParams {
            iterations,
            learning_rate: 2.0,
            batch_size: train.len(),
            clip_norm: 1.0,
            noise_multiplier: sigma,
        };
        let theta = dpsgd_train(&train, &spec, &theta0, &hp, 4)?;
        println!(
            "{eps:>8} {sigma:>10.4} {:>8.3} {:>8.3}",
            accuracy(&spec, &theta, &train)?,
            accuracy(&spec, &theta, &test)?
        );
    }
    Ok(())
}
