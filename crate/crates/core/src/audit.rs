//! Black-box audit of DP-SGD.
//!
//! Train `R` models on `D` and `R` on `D′ = D ∪ {canary}`, all from the same
//! initial parameters, and record the canary's loss under each final model.
//! A threshold on that loss is a membership test; its false positive and false
//! negative counts are turned into Clopper–Pearson upper bounds, then into a
//! lower bound on μ (GDP) and finally into ε at the target δ.

use std::collections::HashMap;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canary::CanarySpec;
use crate::dpsgd::{dpsgd_train, HyperParams};
use crate::error::{Error, Result};
use crate::gdp::{epsilon_for_delta, epsilon_of_training, GdpParam};
use crate::nncore::{
    accuracy, forward_loss, sgd_pretrain, xavier_init, Dataset, ModelSpec, ParamVector,
    PretrainConfig, Sample,
};
use crate::seeding::derive_seed;
use crate::stats::{clopper_pearson_upper, std_normal_quantile, BinomialCount, Probability};

/// How θ₀ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Xavier-initialised parameters.
    AverageCase,
    /// Xavier followed by non-private SGD on auxiliary data, which drives the
    /// gradients of ordinary samples towards zero.
    WorstCase { pretrain: PretrainConfig },
}

impl InitStrategy {
    pub fn initial_params(&self, spec: &ModelSpec, aux: Option<&Dataset>, seed: u64) -> Result<ParamVector> {
        match self {
            InitStrategy::AverageCase => Ok(xavier_init(spec, seed)),
            InitStrategy::WorstCase { pretrain } => {
                let aux = aux.ok_or_else(|| {
                    Error::InvalidConfig(vec!["worst-case init needs an auxiliary dataset".into()])
                })?;
                sgd_pretrain(spec, aux, pretrain, seed)
            }
        }
    }
}

/// How the decision threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSelection {
    /// Pick the ε-maximising threshold on all observations (common practice;
    /// slightly optimistic).
    #[default]
    Optimistic,
    /// Pick the threshold on the first half of the runs of each world and
    /// estimate on the second half. A strictly valid lower bound.
    HeldOut,
}

/// Which side of the threshold is declared "canary was in the training set".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Member iff loss ≥ τ: `fp = #{o ∈ O : o ≥ τ}`, `fn = #{o ∈ O′ : o < τ}`.
    LossAtLeast,
    /// Member iff loss < τ: `fp = #{o ∈ O : o < τ}`, `fn = #{o ∈ O′ : o ≥ τ}`.
    LossBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub runs_per_world: usize,
    /// Confidence level α of the joint (FPR, FNR) upper bounds, e.g. 0.95.
    pub confidence: f64,
    pub target_delta: f64,
    pub canary: CanarySpec,
    pub init: InitStrategy,
    pub hyper: HyperParams,
    pub model: ModelSpec,
    #[serde(default)]
    pub threshold_selection: ThresholdSelection,
    /// Training-run worker threads; `None` uses the ambient rayon pool.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Drop diverged runs instead of failing. Off by default: dropping runs
    /// biases FPR/FNR.
    #[serde(default)]
    pub exclude_diverged: bool,
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.runs_per_world == 0 {
            problems.push("runs_per_world must be ≥ 1".to_string());
        }
        if self.threshold_selection == ThresholdSelection::HeldOut && self.runs_per_world < 2 {
            problems.push("held-out threshold selection needs runs_per_world ≥ 2".to_string());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            problems.push(format!("confidence {} outside (0, 1)", self.confidence));
        }
        if !(self.target_delta > 0.0 && self.target_delta < 1.0) {
            problems.push(format!("target_delta {} outside (0, 1)", self.target_delta));
        }
        if self.workers == Some(0) {
            problems.push("workers must be ≥ 1".to_string());
        }
        if let Err(Error::InvalidConfig(hp)) = self.hyper.validate() {
            problems.extend(hp);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum World {
    /// Trained on `D`.
    Without,
    /// Trained on `D′ = D ∪ {canary}`.
    With,
}

impl World {
    fn index(self) -> u64 {
        match self {
            World::Without => 0,
            World::With => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            World::Without => "without",
            World::With => "with",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub world: World,
    pub run: usize,
    pub seed: u64,
    pub loss: f64,
    pub train_accuracy: f64,
}

/// Canary losses without (`O`) and with (`O′`) the canary in training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    pub without_target: Vec<f64>,
    pub with_target: Vec<f64>,
    /// Per-run metadata in run order, when the observations came from training.
    pub runs: Vec<RunRecord>,
}

impl ObservationSet {
    pub fn new(without_target: Vec<f64>, with_target: Vec<f64>) -> Result<Self> {
        if without_target.is_empty() || with_target.is_empty() {
            return Err(Error::domain("both worlds need at least one observation"));
        }
        if !without_target.iter().chain(&with_target).all(|v| v.is_finite()) {
            return Err(Error::domain("observations must be finite"));
        }
        Ok(ObservationSet {
            without_target,
            with_target,
            runs: Vec::new(),
        })
    }

    fn from_runs(runs: Vec<RunRecord>) -> Result<Self> {
        let pick = |w: World| runs.iter().filter(|r| r.world == w).map(|r| r.loss).collect();
        let mut set = ObservationSet::new(pick(World::Without), pick(World::With))?;
        set.runs = runs;
        Ok(set)
    }

    /// Writes `world,run,seed,loss` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["world", "run", "seed", "loss"])?;
        for r in &self.runs {
            w.write_record([
                r.world.as_str().to_string(),
                r.run.to_string(),
                r.seed.to_string(),
                format!("{:?}", r.loss),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed of run `run` in `world`.
pub fn run_seed(master_seed: u64, world: World, run: usize) -> u64 {
    derive_seed(master_seed, &[world.index(), run as u64])
}

/// Runs `R` trainings on `D` and `R` on `D′ = D ∪ {canary}` from `theta0`.
pub fn collect_observations(
    config: &AuditConfig,
    private_data: &Dataset,
    canary: &Sample,
    theta0: &ParamVector,
    master_seed: u64,
) -> Result<ObservationSet> {
    let with_canary = private_data.with_sample(canary.clone())?;
    collect_observations_between(config, private_data, &with_canary, canary, theta0, master_seed)
}

/// [`collect_observations`] with explicit datasets for both worlds.
pub fn collect_observations_between(
    config: &AuditConfig,
    without: &Dataset,
    with: &Dataset,
    canary: &Sample,
    theta0: &ParamVector,
    master_seed: u64,
) -> Result<ObservationSet> {
    config.validate()?;
    config.model.check_params(theta0)?;
    config.model.check_sample(canary)?;
    let r = config.runs_per_world;
    let jobs: Vec<(World, usize)> = [World::Without, World::With]
        .into_iter()
        .flat_map(|w| (0..r).map(move |i| (w, i)))
        .collect();

    let run_one = |&(world, run): &(World, usize)| -> Result<RunRecord> {
        let data = match world {
            World::Without => without,
            World::With => with,
        };
        let seed = run_seed(master_seed, world, run);
        let theta = dpsgd_train(data, &config.model, theta0, &config.hyper, seed)?;
        Ok(RunRecord {
            world,
            run,
            seed,
            loss: forward_loss(&config.model, &theta, canary)?,
            train_accuracy: accuracy(&config.model, &theta, data)?,
        })
    };

    let results: Vec<Result<RunRecord>> = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Campaign(format!("cannot build worker pool: {e}")))?
            .install(|| jobs.par_iter().map(run_one).collect()),
        None => jobs.par_iter().map(run_one).collect(),
    };

    let mut runs = Vec::with_capacity(results.len());
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(rec) => runs.push(rec),
            Err(e @ Error::Divergence { .. }) if config.exclude_diverged => {
                warn!("excluding diverged run {} in world {}: {e}", job.1, job.0.as_str());
            }
            Err(e) => return Err(e),
        }
    }
    ObservationSet::from_runs(runs)
}

fn count_below(sorted: &[f64], tau: f64) -> usize {
    sorted.partition_point(|&v| v < tau)
}

/// Counts under the literal decision rule: `fp = #{o ∈ O : o ≥ τ}`,
/// `fn = #{o ∈ O′ : o < τ}`.
pub fn rates_at_threshold(obs: &ObservationSet, tau: f64) -> Result<(BinomialCount, BinomialCount)> {
    rates_at_threshold_directed(obs, tau, Direction::LossAtLeast)
}

pub fn rates_at_threshold_directed(
    obs: &ObservationSet,
    tau: f64,
    direction: Direction,
) -> Result<(BinomialCount, BinomialCount)> {
    let below_o = obs.without_target.iter().filter(|&&v| v < tau).count() as u64;
    let below_w = obs.with_target.iter().filter(|&&v| v < tau).count() as u64;
    let (n_o, n_w) = (obs.without_target.len() as u64, obs.with_target.len() as u64);
    let (fp, fn_) = match direction {
        Direction::LossAtLeast => (n_o - below_o, below_w),
        Direction::LossBelow => (below_o, n_w - below_w),
    };
    Ok((BinomialCount::new(fp, n_o)?, BinomialCount::new(fn_, n_w)?))
}

/// Output of [`estimate_eps`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsEstimate {
    pub fpr_upper: Probability,
    pub fnr_upper: Probability,
    pub mu_emp: f64,
    pub epsilon_emp: f64,
}

/// Confidence of each one-sided bound so that both hold jointly with
/// probability ≥ `confidence` (union bound).
pub fn per_bound_confidence(confidence: f64) -> f64 {
    1.0 - (1.0 - confidence) / 2.0
}

/// μ lower bound from FPR/FNR upper bounds, clamped at 0.
pub fn mu_from_bounds(fpr_upper: f64, fnr_upper: f64) -> Result<f64> {
    if fpr_upper >= 1.0 || fnr_upper >= 1.0 {
        return Ok(0.0);
    }
    // Φ⁻¹(1 − a) = −Φ⁻¹(a), without the rounding of 1 − a.
    let mu = -std_normal_quantile(fpr_upper)? - std_normal_quantile(fnr_upper)?;
    Ok(mu.max(0.0))
}

/// ε lower bound from false positive/negative counts.
pub fn estimate_eps(
    fp: BinomialCount,
    fn_: BinomialCount,
    confidence: f64,
    delta: f64,
) -> Result<EpsEstimate> {
    let level = per_bound_confidence(confidence);
    let fpr_upper = clopper_pearson_upper(fp, level)?;
    let fnr_upper = clopper_pearson_upper(fn_, level)?;
    let mu_emp = mu_from_bounds(fpr_upper.get(), fnr_upper.get())?;
    let epsilon_emp = epsilon_from_mu(mu_emp, delta)?;
    Ok(EpsEstimate {
        fpr_upper,
        fnr_upper,
        mu_emp,
        epsilon_emp,
    })
}

fn epsilon_from_mu(mu: f64, delta: f64) -> Result<f64> {
    if mu <= 0.0 {
        Ok(0.0)
    } else {
        epsilon_for_delta(GdpParam::new(mu)?, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
    pub trials_without: u64,
    pub trials_with: u64,
    pub fpr: Probability,
    pub fnr: Probability,
    pub fpr_upper: Probability,
    pub fnr_upper: Probability,
    pub mu_emp: f64,
    pub epsilon_emp: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub direction: Direction,
    pub threshold_selection: ThresholdSelection,
    pub confidence: f64,
    pub delta: f64,
    pub noise_multiplier: f64,
    /// ε of the trained mechanism under GDP accounting; absent without noise.
    pub theoretical_epsilon: Option<f64>,
    pub runs: Vec<RunRecord>,
}

impl AuditReport {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// ±∞ thresholds are written as the strings `"inf"` / `"-inf"`.
mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad threshold {s:?}"))),
        }
    }
}

/// Candidate thresholds: midpoints between consecutive distinct values of
/// `O ∪ O′`, plus ±∞.
pub fn candidate_thresholds(obs: &ObservationSet) -> Vec<f64> {
    let mut values: Vec<f64> = obs.without_target.iter().chain(&obs.with_target).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(f64::INFINITY);
    out
}

struct Selected {
    threshold: f64,
    direction: Direction,
    mu: f64,
}

/// Memoised μ evaluation over many thresholds.
struct Sweep<'a> {
    without: Vec<f64>,
    with: Vec<f64>,
    level: f64,
    upper: HashMap<(u64, u64), f64>,
    obs: &'a ObservationSet,
}

impl<'a> Sweep<'a> {
    fn new(obs: &'a ObservationSet, confidence: f64) -> Self {
        let mut without = obs.without_target.clone();
        let mut with = obs.with_target.clone();
        without.sort_by(f64::total_cmp);
        with.sort_by(f64::total_cmp);
        Sweep {
            without,
            with,
            level: per_bound_confidence(confidence),
            upper: HashMap::new(),
            obs,
        }
    }

    fn counts(&self, tau: f64, direction: Direction) -> (u64, u64) {
        let below_o = count_below(&self.without, tau) as u64;
        let below_w = count_below(&self.with, tau) as u64;
        let (n_o, n_w) = (self.without.len() as u64, self.with.len() as u64);
        match direction {
            Direction::LossAtLeast => (n_o - below_o, below_w),
            Direction::LossBelow => (below_o, n_w - below_w),
        }
    }

    fn bound(&mut self, k: u64, n: u64) -> Result<f64> {
        if let Some(&u) = self.upper.get(&(k, n)) {
            return Ok(u);
        }
        let u = clopper_pearson_upper(BinomialCount::new(k, n)?, self.level)?.get();
        self.upper.insert((k, n), u);
        Ok(u)
    }

    fn mu_at(&mut self, tau: f64, direction: Direction) -> Result<f64> {
        let (fp, fn_) = self.counts(tau, direction);
        let a = self.bound(fp, self.without.len() as u64)?;
        let b = self.bound(fn_, self.with.len() as u64)?;
        mu_from_bounds(a, b)
    }

    /// Maximises μ (equivalently ε) over all candidates and both directions;
    /// the first maximiser in order of increasing τ wins.
    fn best(&mut self) -> Result<Selected> {
        let mut best = Selected {
            threshold: f64::NEG_INFINITY,
            direction: Direction::LossAtLeast,
            mu: -1.0,
        };
        for tau in candidate_thresholds(self.obs) {
            for direction in [Direction::LossAtLeast, Direction::LossBelow] {
                let mu = self.mu_at(tau, direction)?;
                if mu > best.mu {
                    best = Selected { threshold: tau, direction, mu };
                }
            }
        }
        Ok(best)
    }
}

/// Sweeps thresholds (and both decision directions) and reports the
/// ε-maximising one.
pub fn best_threshold_eps(obs: &ObservationSet, config: &AuditConfig) -> Result<AuditReport> {
    let (selected, evaluation) = match config.threshold_selection {
        ThresholdSelection::Optimistic => {
            let selected = Sweep::new(obs, config.confidence).best()?;
            (selected, obs.clone())
        }
        ThresholdSelection::HeldOut => {
            let split = |v: &[f64]| {
                let half = v.len() / 2;
                (v[..half].to_vec(), v[half..].to_vec())
            };
            let (sel_o, est_o) = split(&obs.without_target);
            let (sel_w, est_w) = split(&obs.with_target);
            let selection = ObservationSet::new(sel_o, sel_w)?;
            let selected = Sweep::new(&selection, config.confidence).best()?;
            (selected, ObservationSet::new(est_o, est_w)?)
        }
    };
    let (fp, fn_) = rates_at_threshold_directed(&evaluation, selected.threshold, selected.direction)?;
    let est = estimate_eps(fp, fn_, config.confidence, config.target_delta)?;
    let hp = &config.hyper;
    let theoretical_epsilon = if hp.noise_multiplier > 0.0 {
        epsilon_of_training(hp.noise_multiplier, hp.iterations as u64, config.target_delta).ok()
    } else {
        None
    };
    Ok(AuditReport {
        fp: fp.successes(),
        fn_count: fn_.successes(),
        trials_without: fp.trials(),
        trials_with: fn_.trials(),
        fpr: Probability::new(fp.rate())?,
        fnr: Probability::new(fn_.rate())?,
        fpr_upper: est.fpr_upper,
        fnr_upper: est.fnr_upper,
        mu_emp: est.mu_emp,
        epsilon_emp: est.epsilon_emp,
        threshold: selected.threshold,
        direction: selected.direction,
        threshold_selection: config.threshold_selection,
        confidence: config.confidence,
        delta: config.target_delta,
        noise_multiplier: hp.noise_multiplier,
        theoretical_epsilon,
        runs: obs.runs.clone(),
    })
}

/// Everything produced by [`run_audit`].
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub observations: ObservationSet,
    pub canary: Sample,
    pub initial_params: ParamVector,
}

/// Builds θ₀ and the canary, collects observations and estimates ε.
///
/// `init_seed` seeds θ₀ (Xavier draw and pretraining shuffles); `master_seed`
/// seeds the DP-SGD runs.
pub fn run_audit(
    config: &AuditConfig,
    private_data: &Dataset,
    aux: Option<&Dataset>,
    init_seed: u64,
    master_seed: u64,
) -> Result<AuditOutcome> {
    config.validate()?;
    config.model.check_dataset(private_data)?;
    let theta0 = config.init.initial_params(&config.model, aux, init_seed)?;
    let canary = config.canary.build(private_data, &config.model, &theta0)?;
    let observations = collect_observations(config, private_data, &canary, &theta0, master_seed)?;
    let report = best_threshold_eps(&observations, config)?;
    Ok(AuditOutcome {
        report,
        observations,
        canary,
        initial_params: theta0,
    })
}
