//! Campaign runner: a TOML file describing a data source, a model, DP-SGD and
//! audit settings and a grid over (ε, C, n, init, pretraining epochs). Every
//! cell is audited `repeats` times and the results are written as
//!
//! ```text
//! <out>/campaign.toml                        copy of the input
//! <out>/cells/<cell>/report.jsonl            one AuditReport per repeat
//! <out>/cells/<cell>/observations_repeat<k>.csv
//! <out>/summary.csv
//! ```
//!
//! See `examples/campaigns/` for annotated configs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, AuditConfig, AuditReport, InitStrategy, ThresholdSelection};
use crate::canary::CanarySpec;
use crate::data::{load_feature_csv, load_idx_with_classes, split_private_aux, synth_blobs, SplitSpec};
use crate::dpsgd::HyperParams;
use crate::error::{Error, Result};
use crate::gdp::{calibrate_sigma, PrivacyBudget};
use crate::nncore::{Dataset, ModelSpec, PretrainConfig};
use crate::seeding::derive_seed;

/// Environment variable read by the CLI for the default worker count.
pub const WORKERS_ENV: &str = "DPSGD_AUDIT_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub repeats: usize,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub model: ModelSection,
    pub training: TrainingSection,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    pub audit: AuditSection,
    pub grid: GridSection,
}

fn default_name() -> String {
    "campaign".into()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Blobs {
        classes: usize,
        dim: usize,
        per_class: usize,
        separation: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default = "ten")]
        classes: usize,
    },
    Csv {
        path: PathBuf,
        classes: usize,
    },
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Fraction of the data trained on privately; the rest is auxiliary.
    pub fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Hidden-layer widths; empty means logistic regression.
    #[serde(default)]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Dataset size at which `learning_rate` applies; other sizes use
    /// `learning_rate · n / lr_reference_n`. Defaults to the first `n` on the
    /// grid, or no scaling when the grid has no `n` axis.
    pub lr_reference_n: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub runs_per_world: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub threshold_selection: ThresholdSelection,
    #[serde(default)]
    pub exclude_diverged: bool,
    #[serde(default)]
    pub canary: CanarySpec,
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Average,
    Worst,
}

impl InitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::Average => "average",
            InitKind::Worst => "worst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub epsilon: Vec<f64>,
    #[serde(default = "default_clip")]
    pub clip_norm: Vec<f64>,
    /// Private-set sizes; empty means the whole private split.
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "default_init")]
    pub init: Vec<InitKind>,
    /// Pretraining epochs for worst-case cells; defaults to `pretrain.epochs`.
    #[serde(default)]
    pub pretrain_epochs: Vec<usize>,
}

fn default_clip() -> Vec<f64> {
    vec![1.0]
}

fn default_init() -> Vec<InitKind> {
    vec![InitKind::Average, InitKind::Worst]
}

/// One grid cell. `pretrain_epochs` is 0 for average-case cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub epsilon: f64,
    pub clip_norm: f64,
    pub n: Option<usize>,
    pub init: InitKind,
    pub pretrain_epochs: usize,
}

impl CellKey {
    /// Directory-safe identifier.
    pub fn id(&self) -> String {
        let n = self.n.map_or_else(|| "all".to_string(), |n| n.to_string());
        match self.init {
            InitKind::Average => format!("eps{}_C{}_n{}_average", self.epsilon, self.clip_norm, n),
            InitKind::Worst => format!(
                "eps{}_C{}_n{}_worst{}",
                self.epsilon, self.clip_norm, n, self.pretrain_epochs
            ),
        }
    }

    fn sort_key(&self) -> (f64, f64, usize, InitKind, usize) {
        (self.epsilon, self.clip_norm, self.n.unwrap_or(usize::MAX), self.init, self.pretrain_epochs)
    }

    fn seed_path(&self, repeat: usize) -> [u64; 7] {
        [
            repeat as u64,
            3,
            self.epsilon.to_bits(),
            self.clip_norm.to_bits(),
            self.n.map_or(u64::MAX, |n| n as u64),
            self.init as u64,
            self.pretrain_epochs as u64,
        ]
    }
}

fn cmp_keys(a: &CellKey, b: &CellKey) -> std::cmp::Ordering {
    let (a, b) = (a.sort_key(), b.sort_key());
    a.0.total_cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .then(a.3.cmp(&b.3))
        .then(a.4.cmp(&b.4))
}

/// One line of `report.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub campaign: String,
    pub cell: CellKey,
    pub repeat: usize,
    pub audit_seed: u64,
    pub private_size: usize,
    pub learning_rate: f64,
    pub pretrain: Option<PretrainConfig>,
    #[serde(flatten)]
    pub report: AuditReport,
}

impl CampaignConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            offset: e.span().map_or(0, |s| s.start as u64),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(path, &text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without loading data and lists
    /// every violation.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.repeats == 0 {
            p.push("repeats must be ≥ 1".to_string());
        }
        match &self.data {
            DataSource::Blobs { classes, dim, per_class, separation } => {
                if *classes < 2 {
                    p.push("data.classes must be ≥ 2".into());
                }
                if *dim == 0 || *per_class == 0 {
                    p.push("data.dim and data.per_class must be ≥ 1".into());
                }
                if !separation.is_finite() || *separation < 0.0 {
                    p.push(format!("data.separation {separation} must be finite and ≥ 0"));
                }
            }
            DataSource::Idx { classes, .. } | DataSource::Csv { classes, .. } => {
                if *classes < 2 {
                    p.push("data.classes must be ≥ 2".into());
                }
            }
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            p.push(format!("split.fraction {} outside (0, 1)", self.split.fraction));
        }
        if self.model.hidden.contains(&0) {
            p.push("model.hidden widths must be ≥ 1".into());
        }
        let t = &self.training;
        if t.iterations == 0 {
            p.push("training.iterations must be ≥ 1".into());
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            p.push(format!("training.learning_rate {} must be > 0", t.learning_rate));
        }
        if t.lr_reference_n == Some(0) {
            p.push("training.lr_reference_n must be ≥ 1".into());
        }
        if !(t.delta > 0.0 && t.delta < 1.0) {
            p.push(format!("training.delta {} outside (0, 1)", t.delta));
        }
        if self.pretrain.batch_size == 0 {
            p.push("pretrain.batch_size must be ≥ 1".into());
        }
        if !(self.pretrain.learning_rate > 0.0 && self.pretrain.learning_rate.is_finite()) {
            p.push(format!("pretrain.learning_rate {} must be > 0", self.pretrain.learning_rate));
        }
        let a = &self.audit;
        if a.runs_per_world == 0 {
            p.push("audit.runs_per_world must be ≥ 1".into());
        }
        if a.threshold_selection == ThresholdSelection::HeldOut && a.runs_per_world < 2 {
            p.push("held-out threshold selection needs audit.runs_per_world ≥ 2".into());
        }
        if !(a.confidence > 0.0 && a.confidence < 1.0) {
            p.push(format!("audit.confidence {} outside (0, 1)", a.confidence));
        }
        if let CanarySpec::ClipBkd { scale, .. } = a.canary {
            if !(scale > 0.0 && scale.is_finite()) {
                p.push(format!("audit.canary.scale {scale} must be > 0"));
            }
        }
        let g = &self.grid;
        for (axis, empty) in [("epsilon", g.epsilon.is_empty()), ("clip_norm", g.clip_norm.is_empty()), ("init", g.init.is_empty())] {
            if empty {
                p.push(format!("grid.{axis} must not be empty"));
            }
        }
        for e in &g.epsilon {
            if !(*e > 0.0 && e.is_finite()) {
                p.push(format!("grid.epsilon value {e} must be > 0"));
            }
        }
        for c in &g.clip_norm {
            if !(*c > 0.0 && c.is_finite()) {
                p.push(format!("grid.clip_norm value {c} must be > 0"));
            }
        }
        if g.n.contains(&0) {
            p.push("grid.n values must be ≥ 1".into());
        }
        if !g.pretrain_epochs.is_empty() && !g.init.contains(&InitKind::Worst) {
            p.push("grid.pretrain_epochs only applies to worst-case init".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    /// Cells in summary order, without duplicates.
    pub fn expand_grid(&self) -> Vec<CellKey> {
        let g = &self.grid;
        let ns: Vec<Option<usize>> = if g.n.is_empty() { vec![None] } else { g.n.iter().map(|&n| Some(n)).collect() };
        let epochs = if g.pretrain_epochs.is_empty() { vec![self.pretrain.epochs] } else { g.pretrain_epochs.clone() };
        let mut cells = Vec::new();
        for &epsilon in &g.epsilon {
            for &clip_norm in &g.clip_norm {
                for &n in &ns {
                    for &init in &g.init {
                        let per_init: &[usize] = if init == InitKind::Worst { &epochs } else { &[0] };
                        for &pretrain_epochs in per_init {
                            cells.push(CellKey { epsilon, clip_norm, n, init, pretrain_epochs });
                        }
                    }
                }
            }
        }
        cells.sort_by(cmp_keys);
        cells.dedup();
        cells
    }

    /// Dense tanh network (or logistic regression) sized for `data`.
    pub fn model_spec(&self, data: &Dataset) -> Result<ModelSpec> {
        ModelSpec::dense(data.dim(), &self.model.hidden, data.num_classes())
    }

    fn learning_rate_for(&self, n: usize) -> f64 {
        let reference = self.training.lr_reference_n.or_else(|| self.grid.n.first().copied());
        match reference {
            Some(r) => self.training.learning_rate * n as f64 / r as f64,
            None => self.training.learning_rate,
        }
    }

    /// The fully specified audit for one cell, given the private-set size.
    pub fn audit_config(&self, cell: &CellKey, model: ModelSpec, private_size: usize) -> Result<AuditConfig> {
        let budget = PrivacyBudget::new(cell.epsilon, self.training.delta)?;
        let sigma = calibrate_sigma(budget, self.training.iterations as u64)?;
        let init = match cell.init {
            InitKind::Average => InitStrategy::AverageCase,
            InitKind::Worst => InitStrategy::WorstCase {
                pretrain: PretrainConfig { epochs: cell.pretrain_epochs, ..self.pretrain },
            },
        };
        Ok(AuditConfig {
            runs_per_world: self.audit.runs_per_world,
            confidence: self.audit.confidence,
            target_delta: self.training.delta,
            canary: self.audit.canary.clone(),
            init,
            hyper: HyperParams {
                iterations: self.training.iterations,
                learning_rate: self.learning_rate_for(private_size),
                // Full batch on D′ = D ∪ {canary}, in both worlds.
                batch_size: private_size + 1,
                clip_norm: cell.clip_norm,
                noise_multiplier: sigma,
            },
            model,
            threshold_selection: self.audit.threshold_selection,
            workers: None,
            exclude_diverged: self.audit.exclude_diverged,
        })
    }
}

impl DataSource {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DataSource::Blobs { .. } => {}
            DataSource::Idx { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DataSource::Csv { path, .. } => fix(path),
        }
    }

    /// Loads (or generates) the full dataset. `seed` is used by synthetic
    /// sources only.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Blobs { classes, dim, per_class, separation } => {
                synth_blobs(*classes, *dim, *per_class, *separation, seed)
            }
            DataSource::Idx { images, labels, classes } => load_idx_with_classes(images, labels, *classes),
            DataSource::Csv { path, classes } => load_feature_csv(path, *classes),
        }
    }
}

/// Seeds shared by every cell of one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatSeeds {
    pub data: u64,
    pub split: u64,
    pub init: u64,
}

pub fn repeat_seeds(master_seed: u64, repeat: usize) -> RepeatSeeds {
    let r = repeat as u64;
    RepeatSeeds {
        data: derive_seed(master_seed, &[r, 0]),
        split: derive_seed(master_seed, &[r, 1]),
        init: derive_seed(master_seed, &[r, 2]),
    }
}

pub fn audit_seed(master_seed: u64, cell: &CellKey, repeat: usize) -> u64 {
    derive_seed(master_seed, &cell.seed_path(repeat))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: Option<usize>,
    /// Overrides the config's master seed.
    pub seed: Option<u64>,
    pub dry_run: bool,
    /// Allow writing into an existing output directory.
    pub force: bool,
}

/// What a campaign produced.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub cells: Vec<CellKey>,
    pub reports: Vec<CellReport>,
    pub summary: Option<PathBuf>,
}

/// Prints the expanded grid (one JSON object per cell) without training or
/// writing files.
pub fn dry_run<W: Write>(cfg: &CampaignConfig, master_seed: u64, mut out: W) -> Result<()> {
    for cell in cfg.expand_grid() {
        let seeds: Vec<u64> = (0..cfg.repeats).map(|k| audit_seed(master_seed, &cell, k)).collect();
        let line = serde_json::json!({
            "cell": cell.id(),
            "epsilon": cell.epsilon,
            "clip_norm": cell.clip_norm,
            "n": cell.n,
            "init": cell.init,
            "pretrain_epochs": cell.pretrain_epochs,
            "repeats": cfg.repeats,
            "audit_seeds": seeds,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn run_campaign(config_path: &Path, opts: &RunOptions) -> Result<CampaignOutcome> {
    let mut cfg = CampaignConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    if opts.dry_run {
        dry_run(&cfg, cfg.master_seed, std::io::stdout().lock())?;
        return Ok(CampaignOutcome { cells: cfg.expand_grid(), reports: Vec::new(), summary: None });
    }
    if opts.out.exists() && !opts.force {
        return Err(Error::Campaign(format!(
            "output directory {} already exists (use --force to write into it)",
            opts.out.display()
        )));
    }
    fs::create_dir_all(opts.out.join("cells"))?;
    fs::write(opts.out.join("campaign.toml"), toml::to_string(&cfg).map_err(|e| Error::Campaign(e.to_string()))?)?;
    let outcome = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Campaign(format!("cannot build worker pool: {e}")))?
            .install(|| execute(&cfg, &opts.out)),
        None => execute(&cfg, &opts.out),
    }?;
    Ok(outcome)
}

/// The `(private, aux)` datasets every cell of `repeat` trains on.
pub fn repeat_data(cfg: &CampaignConfig, repeat: usize, n: Option<usize>) -> Result<(Dataset, Dataset)> {
    let seeds = repeat_seeds(cfg.master_seed, repeat);
    let full = cfg.data.load(seeds.data)?;
    split_private_aux(
        &full,
        &SplitSpec { fraction: cfg.split.fraction, seed: seeds.split, subsample: n },
    )
}

fn run_cell(cfg: &CampaignConfig, cell: &CellKey, repeat: usize) -> Result<(CellReport, crate::audit::ObservationSet)> {
    let seeds = repeat_seeds(cfg.master_seed, repeat);
    let (private, aux) = repeat_data(cfg, repeat, cell.n)?;
    let model = cfg.model_spec(&private)?;
    let audit_cfg = cfg.audit_config(cell, model, private.len())?;
    let seed = audit_seed(cfg.master_seed, cell, repeat);
    let out = run_audit(&audit_cfg, &private, Some(&aux), seeds.init, seed)?;
    let pretrain = match audit_cfg.init {
        InitStrategy::WorstCase { pretrain } => Some(pretrain),
        InitStrategy::AverageCase => None,
    };
    Ok((
        CellReport {
            campaign: cfg.name.clone(),
            cell: *cell,
            repeat,
            audit_seed: seed,
            private_size: private.len(),
            learning_rate: audit_cfg.hyper.learning_rate,
            pretrain,
            report: out.report,
        },
        out.observations,
    ))
}

fn execute(cfg: &CampaignConfig, out: &Path) -> Result<CampaignOutcome> {
    let cells = cfg.expand_grid();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.repeats).map(move |r| (c, r))).collect();
    let results: Vec<Result<(CellReport, crate::audit::ObservationSet)>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            info!("cell {} repeat {r}", cells[c].id());
            run_cell(cfg, &cells[c], r)
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (&(c, r), result) in jobs.iter().zip(results) {
        let dir = out.join("cells").join(cells[c].id());
        match result {
            Ok((report, obs)) => {
                fs::create_dir_all(&dir)?;
                let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("report.jsonl"))?;
                writeln!(f, "{}", serde_json::to_string(&report)?)?;
                obs.write_csv(fs::File::create(dir.join(format!("observations_repeat{r}.csv")))?)?;
                reports.push(report);
            }
            Err(e) => {
                warn!("cell {} repeat {r} failed: {e}", cells[c].id());
                failures.push(format!("{} repeat {r}: {e}", cells[c].id()));
            }
        }
    }
    let summary = if reports.is_empty() { None } else { Some(emit_summary(out)?) };
    if !failures.is_empty() {
        return Err(Error::Campaign(format!("{} cell run(s) failed:\n  {}", failures.len(), failures.join("\n  "))));
    }
    Ok(CampaignOutcome { cells, reports, summary })
}

/// Aggregated row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cell: String,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub n: Option<usize>,
    pub init: InitKind,
    pub pretrain_epochs: usize,
    pub repeats: usize,
    pub eps_emp_mean: f64,
    /// Population standard deviation over repeats.
    pub eps_emp_sd: f64,
    pub eps_emp_max: f64,
    pub mu_emp_mean: f64,
    pub theoretical_epsilon: Option<f64>,
}

/// Reads every `cells/*/report.jsonl` under `dir` (malformed lines are
/// skipped with a warning).
pub fn read_reports(dir: &Path) -> Result<Vec<CellReport>> {
    let cells_dir = dir.join("cells");
    let mut entries: Vec<PathBuf> = fs::read_dir(&cells_dir)?
        .filter_map(|e| e.ok().map(|e| e.path().join("report.jsonl")))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut reports = Vec::new();
    let mut bad = 0usize;
    for path in entries {
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) => {
                warn!("skipping unreadable {}: {e}", path.display());
                bad += 1;
                continue;
            }
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    warn!("skipping {} line {}: {e}", path.display(), i + 1);
                    bad += 1;
                    continue;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CellReport>(&line) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    warn!("skipping malformed report {} line {}: {e}", path.display(), i + 1);
                    bad += 1;
                }
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::Campaign(format!(
            "no readable reports under {} ({bad} malformed)",
            cells_dir.display()
        )));
    }
    Ok(reports)
}

pub fn summarize(reports: &[CellReport]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<String, (CellKey, Vec<&CellReport>)> = BTreeMap::new();
    for r in reports {
        groups.entry(r.cell.id()).or_insert_with(|| (r.cell, Vec::new())).1.push(r);
    }
    let mut rows: Vec<(CellKey, SummaryRow)> = groups
        .into_iter()
        .map(|(id, (key, rs))| {
            let eps: Vec<f64> = rs.iter().map(|r| r.report.epsilon_emp).collect();
            let k = eps.len() as f64;
            let mean = eps.iter().sum::<f64>() / k;
            let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / k;
            let row = SummaryRow {
                cell: id,
                epsilon: key.epsilon,
                clip_norm: key.clip_norm,
                n: key.n,
                init: key.init,
                pretrain_epochs: key.pretrain_epochs,
                repeats: eps.len(),
                eps_emp_mean: mean,
                eps_emp_sd: var.sqrt(),
                eps_emp_max: eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mu_emp_mean: rs.iter().map(|r| r.report.mu_emp).sum::<f64>() / k,
                theoretical_epsilon: rs[0].report.theoretical_epsilon,
            };
            (key, row)
        })
        .collect();
    rows.sort_by(|a, b| cmp_keys(&a.0, &b.0));
    rows.into_iter().map(|(_, r)| r).collect()
}

/// Writes `<dir>/summary.csv` from the reports found in `dir`.
pub fn emit_summary(dir: &Path) -> Result<PathBuf> {
    let rows = summarize(&read_reports(dir)?);
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}
