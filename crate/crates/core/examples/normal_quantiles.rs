//! Normal quantiles and one-sided Clopper–Pearson upper bounds.

use dpsgd_audit::stats::{clopper_pearson_upper, std_normal_cdf, std_normal_quantile, BinomialCount};

fn main() -> dpsgd_audit::Result<()> {
    println!("{:>10} {:>22} {:>10}", "p", "quantile", "round trip");
    for p in [1e-300, 1e-10, 1e-5, 0.025, 0.5, 0.975, 1.0 - 1e-10] {
        let z = std_normal_quantile(p)?;
        println!("{p:>10.3e} {z:>22.15} {:>10.2e}", (std_normal_cdf(z)?.get() - p).abs() / p);
    }

    println!("\n{:>6} {:>6} {:>10} {:>10}", "k", "n", "rate", "upper 95%");
    for (k, n) in [(0, 10), (0, 100), (5, 100), (50, 100), (100, 100), (3, 1000)] {
        let count = BinomialCount::new(k, n)?;
        let upper = clopper_pearson_upper(count, 0.95)?;
        println!("{k:>6} {n:>6} {:>10.4} {:>10.6}", count.rate(), upper.get());
    }
    Ok(())
}
