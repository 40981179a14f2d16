//! Scalar statistics: the standard normal CDF and quantile, and one-sided
//! Clopper–Pearson upper bounds for binomial proportions.
//!
//! Everything is double precision. Φ goes through a hand-rolled `erfc` (power
//! series below 2, continued fraction above), accurate to a few ulps over the
//! whole real line; the quantile starts from Acklam's rational approximation
//! and is polished with one Newton step against Φ.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN is rejected.
    pub(crate) fn clamped(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::domain("probability is NaN"));
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// `successes` out of `trials` Bernoulli outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinomialCount {
    successes: u64,
    trials: u64,
}

impl BinomialCount {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("binomial count needs at least one trial"));
        }
        if successes > trials {
            return Err(Error::domain(format!(
                "{successes} successes exceed {trials} trials"
            )));
        }
        Ok(BinomialCount { successes, trials })
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Raw proportion `successes / trials`.
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() * erfcx_continued_fraction(x)
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`, for `x ≥ 0`.
///
/// Stays finite and relatively accurate far into the tail where `erfc`
/// underflows.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 2.0 {
        (x * x).exp() * (1.0 - erf_series(x))
    } else {
        erfcx_continued_fraction(x)
    }
}

/// erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)). All terms are
/// positive, so there is no cancellation for moderate x.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    while term > sum * 1e-17 {
        n += 1;
        term *= 2.0 * x2 / f64::from(2 * n + 1);
        sum += term;
        if n > 500 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))), evaluated with
/// the modified Lentz method. Converges quickly for x ≥ 2.
fn erfcx_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..2000 {
        let a = f64::from(k) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// Φ(x) without input validation.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal CDF argument {x} is not finite")));
    }
    Probability::clamped(phi(x))
}

/// ln Φ(x), accurate in the far lower tail where Φ itself underflows.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x >= -1.0 {
        // Φ(x) = 1 − Q(x); ln_1p keeps the upper tail precise.
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else {
        let z = -x * FRAC_1_SQRT_2;
        (0.5 * erfcx(z)).ln() - z * z
    }
}

// Acklam's rational approximation, relative error < 1.15e-9.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_P_LOW: f64 = 0.02425;

fn acklam_lower(p: f64) -> f64 {
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Quantile for p ≤ 1/2, where Φ(x) − p is computed without cancellation.
fn quantile_lower(p: f64) -> f64 {
    let x = acklam_lower(p);
    let err = phi(x) - p;
    x - err / normal_pdf(x)
}

/// Standard normal quantile Φ⁻¹(p).
///
/// `p ∈ {0, 1}` yields [`Error::InfiniteQuantile`] so the caller can choose a
/// clamp; anything outside `[0, 1]` is a domain error.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("quantile probability {p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Err(Error::InfiniteQuantile { p });
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        Ok(quantile_lower(p))
    } else {
        // 1 − p is exact for p ≥ 1/2.
        Ok(-quantile_lower(1.0 - p))
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub(crate) fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast on this side of the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// P(X ≤ k) for X ~ Binomial(n, p).
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    regularized_incomplete_beta(1.0 - p, (n - k) as f64, (k + 1) as f64)
}

/// One-sided Clopper–Pearson upper confidence bound on a binomial rate.
///
/// Returns the `u ≥ successes/trials` with `BinomCDF(successes; trials, u) =
/// 1 − confidence`, found by bisection. Exactly 1 when every trial succeeded.
pub fn clopper_pearson_upper(count: BinomialCount, confidence: f64) -> Result<Probability> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let (k, n) = (count.successes, count.trials);
    if k == n {
        return Ok(Probability::ONE);
    }
    let target = 1.0 - confidence;
    let mut lo = count.rate();
    let mut hi = 1.0;
    // Binomial CDF is decreasing in p.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binomial_cdf(k, n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Probability::new(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values computed with 40-digit arithmetic.
    const CDF_REFERENCE: [(f64, f64); 12] = [
        (-38.0, 2.885_428_360_068_784_3e-316),
        (-20.0, 2.753_624_118_606_233_7e-89),
        (-10.0, 7.619_853_024_160_526e-24),
        (-5.0, 2.866_515_718_791_939_1e-7),
        (-2.5, 0.006_209_665_325_776_135),
        (-1.0, 0.158_655_253_931_457_05),
        (-0.3, 0.382_088_577_811_047_37),
        (0.0, 0.5),
        (0.7, 0.758_036_347_776_926_97),
        (1.959_964, 0.975_000_000_903_557_6),
        (3.0, 0.998_650_101_968_369_9),
        (8.0, 0.999_999_999_999_999_4),
    ];

    const ERFC_REFERENCE: [(f64, f64); 8] = [
        (0.1, 0.887_537_083_981_715_1),
        (0.5, 0.479_500_122_186_953_46),
        (1.5, 0.033_894_853_524_689_27),
        (2.0, 0.004_677_734_981_047_266),
        (3.0, 2.209_049_699_858_544e-5),
        (5.0, 1.537_459_794_428_034_9e-12),
        (10.0, 2.088_487_583_762_544_8e-45),
        (26.0, 5.663_192_408_856_143e-296),
    ];

    #[test]
    fn erfc_matches_high_precision_reference() {
        for (x, want) in ERFC_REFERENCE {
            assert_relative_eq!(erfc(x), want, max_relative = 1e-14);
        }
    }

    #[test]
    fn cdf_matches_reference_in_absolute_and_tail_relative_terms() {
        for (x, want) in CDF_REFERENCE {
            let got = std_normal_cdf(x).unwrap().get();
            assert!((got - want).abs() <= 1e-12, "Φ({x}) = {got}, want {want}");
            if want > 1e-300 {
                assert_relative_eq!(got, want, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0).unwrap().get(), 0.5);
        assert!((std_normal_cdf(1.959_964).unwrap().get() - 0.975).abs() < 1e-8);
        assert!(std_normal_cdf(-10.0).unwrap().get() < 1e-20);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_is_strictly_increasing_on_a_grid() {
        let mut prev = 0.0;
        for i in 0..=1600 {
            let x = -8.0 + 0.01 * f64::from(i);
            let v = std_normal_cdf(x).unwrap().get();
            // Above ~6 the spacing of doubles near 1 exceeds the increments.
            if x < 6.0 {
                assert!(v > prev, "not increasing at {x}");
            } else {
                assert!(v >= prev, "decreasing at {x}");
            }
            prev = v;
        }
    }

    #[test]
    fn log_cdf_agrees_with_cdf_and_survives_underflow() {
        for x in [-30.0, -5.0, -1.5, -0.2, 0.0, 2.0, 6.0] {
            let direct = phi(x).ln();
            assert_relative_eq!(log_std_normal_cdf(x), direct, max_relative = 1e-12);
        }
        // Φ(−40) underflows; ln Φ(−40) ≈ −x²/2 − ln(−x√(2π)).
        let asymptotic = -800.0 - (40.0 * SQRT_2PI).ln() - 1.0 / 1600.0;
        assert!((log_std_normal_cdf(-40.0) - asymptotic).abs() < 1e-5);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        let x = std_normal_quantile(std_normal_cdf(1.234).unwrap().get()).unwrap();
        assert!((x - 1.234).abs() < 1e-9);
    }

    #[test]
    fn quantile_matches_bisection_on_cdf() {
        for p in [1e-10, 1e-6, 0.01, 0.3, 0.975, 0.999_999] {
            let (mut lo, mut hi) = (-40.0, 40.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if phi(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let q = std_normal_quantile(p).unwrap();
            assert!((q - lo).abs() < 1e-8, "p={p}: {q} vs {lo}");
        }
    }

    #[test]
    fn quantile_edge_errors() {
        assert!(matches!(
            std_normal_quantile(0.0),
            Err(Error::InfiniteQuantile { .. })
        ));
        assert!(matches!(
            std_normal_quantile(1.0),
            Err(Error::InfiniteQuantile { .. })
        ));
        assert!(matches!(std_normal_quantile(1.5), Err(Error::Domain(_))));
        assert!(matches!(std_normal_quantile(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_and_quantile_are_mutual_inverses_across_the_range() {
        // Log-spaced probabilities in [1e-10, 1 − 1e-10].
        for i in 0..=400 {
            let t = f64::from(i) / 400.0;
            let lower = 10f64.powf(-10.0 + 9.698_97 * t);
            for p in [lower, 1.0 - lower] {
                let x = std_normal_quantile(p).unwrap();
                assert!((phi(x) - p).abs() <= 1e-10 * p.max(1e-3));
                let back = std_normal_quantile(phi(x)).unwrap();
                assert!((back - x).abs() <= 1e-9, "p={p}");
            }
        }
    }

    #[test]
    fn binomial_count_invariants() {
        assert!(BinomialCount::new(3, 2).is_err());
        assert!(BinomialCount::new(0, 0).is_err());
        assert_eq!(BinomialCount::new(2, 4).unwrap().rate(), 0.5);
    }

    /// Direct pmf summation in log space.
    fn binomial_cdf_by_summation(k: u64, n: u64, p: f64) -> f64 {
        (0..=k)
            .map(|i| {
                let (i, nf) = (i as f64, n as f64);
                (ln_gamma(nf + 1.0) - ln_gamma(i + 1.0) - ln_gamma(nf - i + 1.0)
                    + i * p.ln()
                    + (nf - i) * (1.0 - p).ln())
                .exp()
            })
            .sum()
    }

    #[test]
    fn binomial_cdf_matches_summation() {
        for &(k, n, p) in &[(0, 10, 0.3), (3, 20, 0.1), (10, 100, 0.17), (60, 200, 0.35)] {
            assert_relative_eq!(
                binomial_cdf(k, n, p),
                binomial_cdf_by_summation(k, n, p),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn clopper_pearson_examples() {
        let all = BinomialCount::new(37, 37).unwrap();
        assert_eq!(clopper_pearson_upper(all, 0.9).unwrap().get(), 1.0);

        let zero = BinomialCount::new(0, 100).unwrap();
        let closed_form = 1.0 - 0.05f64.powf(0.01);
        let got = clopper_pearson_upper(zero, 0.95).unwrap().get();
        assert!((got - closed_form).abs() < 1e-13);
        assert!((got - 0.029_513_049_607_039_93).abs() < 1e-13);

        let ten = BinomialCount::new(10, 100).unwrap();
        let u = clopper_pearson_upper(ten, 0.975).unwrap().get();
        assert!((binomial_cdf_by_summation(10, 100, u) - 0.025).abs() < 1e-12);
        assert!((u - 0.176_222_597_740_022_67).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_reference_values() {
        let cases = [
            (3, 20, 0.9, 0.304_186_811_407_478_74),
            (49, 50, 0.975, 0.999_493_772_016_959_2),
            (0, 1, 0.975, 0.975),
        ];
        for (k, n, c, want) in cases {
            let got = clopper_pearson_upper(BinomialCount::new(k, n).unwrap(), c).unwrap();
            assert!((got.get() - want).abs() < 1e-12, "({k},{n},{c}) → {}", got.get());
        }
    }

    #[test]
    fn clopper_pearson_rejects_bad_confidence() {
        let c = BinomialCount::new(1, 10).unwrap();
        assert!(clopper_pearson_upper(c, 0.0).is_err());
        assert!(clopper_pearson_upper(c, 1.0).is_err());
    }

    #[test]
    fn clopper_pearson_is_monotone() {
        let n = 60;
        for conf in [0.8, 0.95, 0.995] {
            let mut prev = 0.0;
            for k in 0..=n {
                let u = clopper_pearson_upper(BinomialCount::new(k, n).unwrap(), conf)
                    .unwrap()
                    .get();
                assert!(u >= prev);
                assert!(u >= k as f64 / n as f64);
                prev = u;
            }
        }
        let c = BinomialCount::new(7, 40).unwrap();
        let lo = clopper_pearson_upper(c, 0.9).unwrap().get();
        let hi = clopper_pearson_upper(c, 0.99).unwrap().get();
        assert!(hi > lo);
    }
}
