//! Noise multipliers for a grid of (ε, δ) budgets under μ-GDP composition,
//! and the ε each one actually spends.
//!
//! Usage: `cargo run --example gdp_calibration -- [iterations] [delta]`

use dpsgd_audit::gdp::{calibrate_sigma, compose_mu, epsilon_of_training, PrivacyBudget};

fn main() -> dpsgd_audit::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(25, |a| a.parse().expect("iterations"));
    let delta: f64 = args.next().map_or(1e-5, |a| a.parse().expect("delta"));
    println!("T = {steps}, δ = {delta:e}");
    println!("{:>6} {:>12} {:>10} {:>12}", "ε", "σ", "μ", "ε(σ)");
    for eps in [0.5, 1.0, 2.0, 4.0, 10.0, 50.0] {
        let sigma = calibrate_sigma(PrivacyBudget::new(eps, delta)?, steps)?;
        let mu = compose_mu(sigma, steps)?.mu();
        println!("{eps:>6} {sigma:>12.6} {mu:>10.5} {:>12.8}", epsilon_of_training(sigma, steps, delta)?);
    }
    Ok(())
}
