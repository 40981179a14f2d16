//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Positional arguments select criteria by substring
//! of their label (e.g. `cargo test --test acceptance -- c3`).

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dpsgd_audit::audit::{
    best_threshold_eps, collect_observations, collect_observations_between, estimate_eps,
};
use dpsgd_audit::campaign::{repeat_data, repeat_seeds, run_campaign, CampaignConfig, CellReport, InitKind, RunOptions};
use dpsgd_audit::dpsgd::{dpsgd_train, mean_clipped_gradient_norm, HyperParams};
use dpsgd_audit::gdp::{calibrate_sigma, compose_mu, epsilon_for_delta, PrivacyBudget};
use dpsgd_audit::nncore::{per_example_gradient, sgd_pretrain, PretrainConfig};
use dpsgd_audit::seeding::{derive_seed, stream_rng};
use dpsgd_audit::stats::{clopper_pearson_upper, BinomialCount};
use rand::Rng;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Suite {
    filters: Vec<String>,
    failures: usize,
}

impl Suite {
    fn selected(&self, label: &str) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| label.contains(f.as_str()))
    }

    fn report(&mut self, label: &str, budget: Duration, elapsed: Duration, v: Verdict) {
        let within = elapsed <= budget;
        let pass = v.pass && within;
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} {label}: {} [{:.1}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if within { "" } else { ", OVER BUDGET" }
        );
    }

    fn run(&mut self, label: &str, budget: Duration, f: impl FnOnce() -> Verdict) {
        if !self.selected(label) {
            return;
        }
        let start = Instant::now();
        let v = f();
        self.report(label, budget, start.elapsed(), v);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn c1_calibration_round_trip() -> Verdict {
    let mut worst = 0.0f64;
    for eps in [1.0, 2.0, 4.0, 10.0] {
        for t in [1u64, 25, 100, 200] {
            let budget = PrivacyBudget::new(eps, 1e-5).unwrap();
            let sigma = calibrate_sigma(budget, t).unwrap();
            let back = epsilon_for_delta(compose_mu(sigma, t).unwrap(), 1e-5).unwrap();
            worst = worst.max((back - eps).abs() / eps);
        }
    }
    verdict(worst <= 1e-3, format!("max relative error {worst:.2e} over 16 (ε, T) pairs (tol 1e-3)"))
}

fn c2_estimator_golden() -> Verdict {
    let zero = BinomialCount::new(0, 100).unwrap();
    let e = estimate_eps(zero, zero, 0.95, 1e-5).unwrap();
    // Closed-form CP for zero successes, quantile by bisection on a
    // quadrature Φ, δ-inversion by bisection.
    let u = 1.0 - 0.025f64.powf(1.0 / 100.0);
    let x = bisect(-10.0, 10.0, normal_cdf_by_quadrature, 1.0 - u);
    let mu_oracle = 2.0 * x;
    let eps_oracle = epsilon_oracle(mu_oracle, 1e-5);
    let mu_ok = (e.mu_emp - mu_oracle).abs() <= 1e-6 && (e.mu_emp - 3.592_769_024_660_129).abs() <= 1e-6;
    let eps_ok = (e.epsilon_emp - eps_oracle).abs() <= 1e-4 && (e.epsilon_emp - 21.120_338_661_824_98).abs() <= 1e-4;
    verdict(
        mu_ok && eps_ok,
        format!(
            "μ_emp {:.9} (oracle {mu_oracle:.9}), ε_emp {:.6} (oracle {eps_oracle:.6})",
            e.mu_emp, e.epsilon_emp
        ),
    )
}

fn c3_mechanism_tightness() -> Verdict {
    let n = 100;
    let inst = saturated_instance(n, 3);
    let sigma = calibrate_sigma(PrivacyBudget::new(1.0, 1e-5).unwrap(), 1).unwrap();
    let cfg = mechanism_audit_config(&inst.spec, n, 5000, sigma);
    let obs = collect_observations(&cfg, &inst.private, &inst.canary, &inst.theta0, 0xC3).unwrap();
    let r = best_threshold_eps(&obs, &cfg).unwrap();
    verdict(
        (0.5..=1.0).contains(&r.epsilon_emp),
        format!(
            "ε_emp {:.4} (want [0.5, 1.0]); μ_emp {:.4} vs theoretical μ {:.4}; fp {}/5000 fn {}/5000",
            r.epsilon_emp,
            r.mu_emp,
            1.0 / sigma,
            r.fp,
            r.fn_count
        ),
    )
}

fn c4_null_soundness() -> Verdict {
    let n = 100;
    let inst = saturated_instance(n, 4);
    let sigma = calibrate_sigma(PrivacyBudget::new(1.0, 1e-5).unwrap(), 1).unwrap();
    let cfg = mechanism_audit_config(&inst.spec, n, 50, sigma);
    let mut zero = 0;
    let mut worst = 0.0f64;
    for rep in 0..100u64 {
        // D′ = D: the canary is observed but never trained on.
        let obs = collect_observations_between(
            &cfg,
            &inst.private,
            &inst.private,
            &inst.canary,
            &inst.theta0,
            derive_seed(0xC4, &[rep]),
        )
        .unwrap();
        let r = best_threshold_eps(&obs, &cfg).unwrap();
        if r.epsilon_emp == 0.0 {
            zero += 1;
        }
        worst = worst.max(r.epsilon_emp);
    }
    verdict(zero >= 95, format!("ε_emp = 0 in {zero}/100 audits (want ≥ 95); largest false ε_emp {worst:.3}"))
}

fn c7_gradient_check() -> Verdict {
    let mut rng = stream_rng(0xC7, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let spec = random_spec(&mut rng);
        let params = random_params(&spec, &mut rng);
        let sample = random_sample(&spec, &mut rng);
        worst = worst.max(finite_difference_error(&spec, &params, &sample, 1e-5));
    }
    verdict(worst <= 1e-5, format!("max relative error {worst:.2e} over 100 instances (tol 1e-5)"))
}

fn c8_cp_coverage() -> Verdict {
    let draws = 2000;
    let trials = 100;
    let confidence = 0.95;
    let mut rng = stream_rng(0xC8, 0);
    let se = (confidence * (1.0 - confidence) / draws as f64).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [0.01, 0.1, 0.5] {
        let mut covered = 0;
        for _ in 0..draws {
            let k = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
            let u = clopper_pearson_upper(BinomialCount::new(k, trials).unwrap(), confidence).unwrap();
            if u.get() >= p {
                covered += 1;
            }
        }
        let rate = covered as f64 / draws as f64;
        pass &= rate >= confidence - 3.0 * se;
        parts.push(format!("p={p}: {rate:.4}"));
    }
    verdict(
        pass,
        format!("coverage {} (want ≥ {:.4})", parts.join(", "), confidence - 3.0 * se),
    )
}

fn c9_dpsgd_mechanics() -> Verdict {
    // (a) σ = 0 and C = ∞ reduce to full-batch gradient descent.
    let mut rng = stream_rng(0xC9, 0);
    let mut worst_gd = 0.0f64;
    for _ in 0..10 {
        let spec = random_spec(&mut rng);
        let data = random_dataset(&spec, 8, &mut rng);
        let theta0 = random_params(&spec, &mut rng);
        let hp = HyperParams {
            iterations: 5,
            learning_rate: 0.5,
            batch_size: data.len(),
            clip_norm: f64::INFINITY,
            noise_multiplier: 0.0,
        };
        let got = dpsgd_train(&data, &spec, &theta0, &hp, 1).unwrap();
        let mut theta = theta0.clone().into_vec();
        for _ in 0..hp.iterations {
            let current = dpsgd_audit::nncore::ParamVector::from_vec(theta.clone());
            let mut sum = vec![0.0; theta.len()];
            for s in data.samples() {
                let g = per_example_gradient(&spec, &current, s).unwrap();
                sum.iter_mut().zip(g.as_slice()).for_each(|(a, b)| *a += b);
            }
            for (t, g) in theta.iter_mut().zip(&sum) {
                *t -= hp.learning_rate * g / data.len() as f64;
            }
        }
        for (a, b) in got.as_slice().iter().zip(&theta) {
            worst_gd = worst_gd.max((a - b).abs());
        }
    }

    // (b) With every gradient exactly zero the update is pure noise with
    // per-coordinate std ηCσ/B.
    let n = 20;
    let inst = saturated_instance(n, 9);
    let hp = HyperParams { iterations: 1, learning_rate: 2.0, batch_size: n, clip_norm: 1.5, noise_multiplier: 1.0 };
    let expected = hp.learning_rate * hp.clip_norm * hp.noise_multiplier / n as f64;
    let runs = 10_000;
    let d = inst.theta0.len();
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for r in 0..runs {
        let th = dpsgd_train(&inst.private, &inst.spec, &inst.theta0, &hp, derive_seed(0xC9, &[r])).unwrap();
        for i in 0..d {
            let step = th.as_slice()[i] - inst.theta0.as_slice()[i];
            sum[i] += step;
            sq[i] += step * step;
        }
    }
    let mut mean_ok = true;
    let mut worst_std = 0.0f64;
    for i in 0..d {
        let mean = sum[i] / runs as f64;
        let std = (sq[i] / runs as f64 - mean * mean).sqrt();
        mean_ok &= mean.abs() <= 4.0 * expected / (runs as f64).sqrt();
        worst_std = worst_std.max((std / expected - 1.0).abs());
    }
    verdict(
        worst_gd <= 1e-10 && mean_ok && worst_std <= 0.05,
        format!(
            "GD equivalence max |Δθ| {worst_gd:.1e} (tol 1e-10); noise means within 4 SE: {mean_ok}; std off by at most {:.2}% (tol 5%)",
            100.0 * worst_std
        ),
    )
}

fn init_campaign_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/campaigns/init_comparison.toml")
}

fn campaign_eps(reports: &[CellReport], init: InitKind, epochs: usize) -> Vec<f64> {
    let mut rs: Vec<&CellReport> =
        reports.iter().filter(|r| r.cell.init == init && r.cell.pretrain_epochs == epochs).collect();
    rs.sort_by_key(|r| r.repeat);
    rs.iter().map(|r| r.report.epsilon_emp).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn c5_init_ordering(reports: &[CellReport]) -> Verdict {
    let avg = campaign_eps(reports, InitKind::Average, 0);
    let worst = campaign_eps(reports, InitKind::Worst, 5);
    let ordered = avg.len() == 3 && worst.len() == 3 && avg.iter().zip(&worst).all(|(a, w)| w > a);
    verdict(
        ordered && mean(&worst) > mean(&avg),
        format!(
            "per-repeat ε_emp worst-case [{}] vs average-case [{}]; means {:.3} vs {:.3}",
            fmt(&worst),
            fmt(&avg),
            mean(&worst),
            mean(&avg)
        ),
    )
}

fn c6_pretraining_sweep(cfg: &CampaignConfig, reports: &[CellReport]) -> Verdict {
    let epochs = [0usize, 1, 3, 5];
    let mut norms = vec![0.0; epochs.len()];
    for repeat in 0..cfg.repeats {
        let (private, aux) = repeat_data(cfg, repeat, None).unwrap();
        let spec = cfg.model_spec(&private).unwrap();
        let seeds = repeat_seeds(cfg.master_seed, repeat);
        for (k, &e) in epochs.iter().enumerate() {
            let theta0 = sgd_pretrain(&spec, &aux, &PretrainConfig { epochs: e, ..cfg.pretrain }, seeds.init).unwrap();
            norms[k] += mean_clipped_gradient_norm(&spec, &theta0, &private, 1.0).unwrap() / cfg.repeats as f64;
        }
    }
    let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    let eps: Vec<f64> = epochs
        .iter()
        .map(|&e| {
            let init = if e == 0 { InitKind::Average } else { InitKind::Worst };
            mean(&campaign_eps(reports, init, e))
        })
        .collect();
    verdict(
        decreasing && eps[3] > eps[0],
        format!("mean clipped-gradient norm at epochs 0/1/3/5: [{}]; mean ε_emp: [{}]", fmt(&norms), fmt(&eps)),
    )
}

fn run_init_campaign(out: &Path) -> Vec<CellReport> {
    let opts = RunOptions { out: out.to_path_buf(), ..RunOptions::default() };
    run_campaign(&init_campaign_path(), &opts).unwrap().reports
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut suite = Suite { filters, failures: 0 };

    suite.run("[1] calibration round trip", secs(1), c1_calibration_round_trip);
    suite.run("[2] estimator golden values", secs(1), c2_estimator_golden);
    suite.run("[3] mechanism-level tightness", secs(120), c3_mechanism_tightness);
    suite.run("[4] null soundness", secs(300), c4_null_soundness);

    let campaign_labels = ["[5] worst-case vs average-case init", "[6] pretraining epochs sweep", "[10] campaign determinism"];
    if campaign_labels.iter().any(|l| suite.selected(l)) {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = CampaignConfig::load(&init_campaign_path()).unwrap();
        let start = Instant::now();
        let first = run_init_campaign(&tmp.path().join("first"));
        let first_time = start.elapsed();
        if suite.selected(campaign_labels[0]) {
            suite.report(campaign_labels[0], secs(1800), first_time, c5_init_ordering(&first));
        }
        if suite.selected(campaign_labels[1]) {
            let start = Instant::now();
            let v = c6_pretraining_sweep(&cfg, &first);
            suite.report(campaign_labels[1], secs(1800), first_time + start.elapsed(), v);
        }
        if suite.selected(campaign_labels[2]) {
            let start = Instant::now();
            let second = run_init_campaign(&tmp.path().join("second"));
            let bits = |rs: &[CellReport]| -> Vec<(String, usize, u64)> {
                let mut v: Vec<_> = rs.iter().map(|r| (r.cell.id(), r.repeat, r.report.epsilon_emp.to_bits())).collect();
                v.sort();
                v
            };
            let same = bits(&first) == bits(&second) && !first.is_empty();
            suite.report(
                campaign_labels[2],
                secs(3600),
                first_time + start.elapsed(),
                verdict(same, format!("{} ε_emp values compared bit-for-bit across two runs", first.len())),
            );
        }
    }

    suite.run("[7] gradient vs finite differences", secs(10), c7_gradient_check);
    suite.run("[8] Clopper-Pearson coverage", secs(10), c8_cp_coverage);
    suite.run("[9] DP-SGD mechanics", secs(60), c9_dpsgd_mechanics);

    if suite.failures == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criterion/criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
