//! Gaussian differential privacy accounting.
//!
//! Full-batch DP-SGD is a composition of `T` Gaussian mechanisms with noise
//! multiplier σ, which is exactly `√T/σ`-GDP. The clipping norm never enters
//! μ: the noise standard deviation is `C·σ` and the sensitivity is `C`, so
//! they cancel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{log_std_normal_cdf, phi, Probability};

/// Upper end of the ε search bracket.
pub const EPSILON_SEARCH_MAX: f64 = 100.0;

const SIGMA_BRACKET: (f64, f64) = (1e-3, 1e6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon {epsilon} must be finite and ≥ 0")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("delta {delta} outside (0, 1)")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// The μ of a μ-GDP guarantee.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GdpParam(f64);

impl GdpParam {
    pub fn new(mu: f64) -> Result<Self> {
        if mu >= 0.0 && mu.is_finite() {
            Ok(GdpParam(mu))
        } else {
            Err(Error::domain(format!("mu {mu} must be finite and ≥ 0")))
        }
    }

    pub fn mu(self) -> f64 {
        self.0
    }
}

/// δ(ε) = Φ(−ε/μ + μ/2) − e^ε Φ(−ε/μ − μ/2).
pub fn delta_for_epsilon(mu: GdpParam, epsilon: f64) -> Result<Probability> {
    if !(epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon {epsilon} must be ≥ 0")));
    }
    let mu = mu.mu();
    if mu == 0.0 {
        return Ok(Probability::ZERO);
    }
    if epsilon.is_infinite() {
        return Ok(Probability::ZERO);
    }
    let a = -epsilon / mu + mu / 2.0;
    let b = -epsilon / mu - mu / 2.0;
    // e^ε·Φ(b) through logs: Φ(b) alone underflows long before the product does.
    let second = (epsilon + log_std_normal_cdf(b)).exp();
    Probability::clamped(phi(a) - second)
}

/// Smallest ε ≥ 0 with δ(ε) ≤ `delta`, by bisection on `[0, 100]`.
pub fn epsilon_for_delta(mu: GdpParam, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta {delta} outside (0, 1)")));
    }
    if mu.mu() == 0.0 || delta_for_epsilon(mu, 0.0)?.get() <= delta {
        return Ok(0.0);
    }
    if delta_for_epsilon(mu, EPSILON_SEARCH_MAX)?.get() > delta {
        return Err(Error::EpsilonOutOfRange {
            mu: mu.mu(),
            delta,
            max: EPSILON_SEARCH_MAX,
        });
    }
    let (mut lo, mut hi) = (0.0, EPSILON_SEARCH_MAX);
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if delta_for_epsilon(mu, mid)?.get() > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// μ = √steps / σ for `steps` full-batch Gaussian steps.
pub fn compose_mu(sigma: f64, steps: u64) -> Result<GdpParam> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("noise multiplier {sigma} must be > 0")));
    }
    if steps == 0 {
        return Err(Error::domain("at least one step is required"));
    }
    GdpParam::new((steps as f64).sqrt() / sigma)
}

/// Theoretical ε of `steps` full-batch steps with noise multiplier `sigma`.
pub fn epsilon_of_training(sigma: f64, steps: u64, delta: f64) -> Result<f64> {
    epsilon_for_delta(compose_mu(sigma, steps)?, delta)
}

/// Noise multiplier σ that makes `steps` full-batch steps (ε, δ)-DP.
///
/// Bisects log σ over `[1e-3, 1e6]`. An ε beyond the search bracket counts as
/// "too little noise".
pub fn calibrate_sigma(target: PrivacyBudget, steps: u64) -> Result<f64> {
    if target.epsilon <= 0.0 {
        return Err(Error::Calibration("target epsilon must be > 0".into()));
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        match epsilon_of_training(sigma, steps, target.delta) {
            Err(Error::EpsilonOutOfRange { .. }) => Ok(f64::INFINITY),
            other => other,
        }
    };
    let (lo_sigma, hi_sigma) = SIGMA_BRACKET;
    if eps_at(hi_sigma)? > target.epsilon {
        return Err(Error::Calibration(format!(
            "epsilon {} needs more noise than sigma = {hi_sigma}",
            target.epsilon
        )));
    }
    if eps_at(lo_sigma)? < target.epsilon {
        return Err(Error::Calibration(format!(
            "epsilon {} is not reached even at sigma = {lo_sigma}",
            target.epsilon
        )));
    }
    let (mut lo, mut hi) = (lo_sigma.ln(), hi_sigma.ln());
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid.exp())? > target.epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(v: f64) -> GdpParam {
        GdpParam::new(v).unwrap()
    }

    /// Forward δ(ε) root in μ, by bisection. Independent of `epsilon_for_delta`.
    fn mu_for_epsilon(epsilon: f64, delta: f64) -> f64 {
        let (mut lo, mut hi) = (1e-6, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let d = phi(-epsilon / mid + mid / 2.0)
                - epsilon.exp() * phi(-epsilon / mid - mid / 2.0);
            if d < delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn delta_examples() {
        let d = delta_for_epsilon(mu(1.0), 0.0).unwrap().get();
        assert!((d - (2.0 * phi(0.5) - 1.0)).abs() < 1e-15);
        assert!((d - 0.382_924_922_548_026).abs() < 1e-12);
        assert_eq!(delta_for_epsilon(mu(0.0), 5.0).unwrap().get(), 0.0);
        assert!(delta_for_epsilon(mu(1.0), 30.0).unwrap().get() < 1e-100);
    }

    #[test]
    fn delta_is_monotone_on_grid() {
        let mus = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
        for &m in &mus {
            let mut prev = f64::INFINITY;
            for e in 0..=20 {
                let d = delta_for_epsilon(mu(m), f64::from(e)).unwrap().get();
                if prev > 1e-280 {
                    assert!(d < prev, "δ not decreasing at μ={m} ε={e}");
                }
                prev = d;
            }
        }
        for e in 0..=20 {
            let mut prev = -1.0;
            for &m in &mus {
                let d = delta_for_epsilon(mu(m), f64::from(e)).unwrap().get();
                if d > 1e-280 {
                    assert!(d > prev, "δ not increasing in μ at μ={m} ε={e}");
                }
                prev = d;
            }
        }
    }

    #[test]
    fn epsilon_round_trip() {
        let d = delta_for_epsilon(mu(2.0), 3.0).unwrap().get();
        let e = epsilon_for_delta(mu(2.0), d).unwrap();
        assert!((e - 3.0).abs() < 1e-6);
    }

    #[test]
    fn epsilon_zero_when_delta_already_met() {
        assert_eq!(epsilon_for_delta(mu(0.01), 0.5).unwrap(), 0.0);
        assert_eq!(epsilon_for_delta(mu(0.0), 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_for_independently_solved_mu() {
        let m = mu_for_epsilon(10.0, 1e-5);
        let e = epsilon_for_delta(mu(m), 1e-5).unwrap();
        assert!((e - 10.0).abs() < 1e-6, "{e}");
    }

    #[test]
    fn epsilon_out_of_range() {
        assert!(matches!(
            epsilon_for_delta(mu(40.0), 1e-5),
            Err(Error::EpsilonOutOfRange { .. })
        ));
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose_mu(10.0, 100).unwrap().mu(), 1.0);
        assert_eq!(compose_mu(1.0, 1).unwrap().mu(), 1.0);
        assert!((compose_mu(2.0, 8).unwrap().mu() - 1.414_213_562_373_095).abs() < 1e-14);
        for (s, t) in [(0.7, 3), (3.3, 25), (12.0, 200)] {
            assert_eq!(
                compose_mu(s, 4 * t).unwrap().mu(),
                2.0 * compose_mu(s, t).unwrap().mu()
            );
        }
        assert!(compose_mu(0.0, 1).is_err());
        assert!(compose_mu(1.0, 0).is_err());
    }

    #[test]
    fn calibration_round_trip_grid() {
        for eps in [1.0, 2.0, 4.0, 10.0] {
            for steps in [1, 25, 100, 200] {
                let budget = PrivacyBudget::new(eps, 1e-5).unwrap();
                let sigma = calibrate_sigma(budget, steps).unwrap();
                let back = epsilon_of_training(sigma, steps, 1e-5).unwrap();
                assert!((back - eps).abs() / eps < 1e-4, "ε={eps} T={steps}: {back}");
            }
        }
    }

    #[test]
    fn single_step_calibration_matches_single_mechanism_solver() {
        let sigma = calibrate_sigma(PrivacyBudget::new(1.0, 1e-5).unwrap(), 1).unwrap();
        let m = mu_for_epsilon(1.0, 1e-5);
        assert!((sigma - 1.0 / m).abs() / sigma < 1e-6);
        // Cross-checked against an arbitrary-precision solver.
        assert!((m - 0.268_051_123_211_294_5).abs() < 1e-9);
    }

    #[test]
    fn more_privacy_needs_more_noise() {
        let s1 = calibrate_sigma(PrivacyBudget::new(1.0, 1e-5).unwrap(), 100).unwrap();
        let s10 = calibrate_sigma(PrivacyBudget::new(10.0, 1e-5).unwrap(), 100).unwrap();
        assert!(s1 > s10);
    }

    #[test]
    fn calibration_rejects_zero_epsilon() {
        let b = PrivacyBudget::new(0.0, 1e-5).unwrap();
        assert!(matches!(calibrate_sigma(b, 10), Err(Error::Calibration(_))));
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(-1.0, 1e-5).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(GdpParam::new(-0.1).is_err());
    }
}
