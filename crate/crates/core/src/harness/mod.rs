//! Repeated transfer experiments over goal subsets, with 95% confidence
//! intervals.
//!
//! Every run is an independent job with its own seed, derived from the
//! master seed and the run's coordinates, so adding variants or sizes never
//! changes the random streams of existing runs.

mod output;
mod plot;
mod stats;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{rule_warm_start, train_run, DialogueEnv, EpochReport, TrainingConfig, WarmStartReport};
use crate::domain::{build_unified_space, load_goals, DomainSchema, UnifiedSpace, UserGoal};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::neural::{QWeights, ReplayBuffer};
use crate::transfer::{initialize_weights, TransferSpec};

pub use output::{
    epoch_rows, read_aggregate_csv, read_runs_csv, write_aggregate_csv, write_epoch_csv, ExperimentOutputs,
    EPOCH_HEADER,
};
pub use plot::render_svg;
pub use stats::{mean_ci95, std_dev, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Transfer learning plus warm start.
    TransferWarmStart,
    TransferOnly,
    WarmStartOnly,
    Neither,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::TransferWarmStart,
        Variant::TransferOnly,
        Variant::WarmStartOnly,
        Variant::Neither,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::TransferWarmStart => "tl_ws",
            Variant::TransferOnly => "tl",
            Variant::WarmStartOnly => "ws",
            Variant::Neither => "none",
        }
    }

    pub fn transfer(self) -> bool {
        matches!(self, Variant::TransferWarmStart | Variant::TransferOnly)
    }

    pub fn warm_start(self) -> bool {
        matches!(self, Variant::TransferWarmStart | Variant::WarmStartOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected tl_ws, tl, ws or none)")))
    }
}

/// Source and target domains with their goal sets, loaded and validated.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub source: DomainData,
    pub target: DomainData,
    pub test_goals: Vec<UserGoal>,
    pub space: Arc<UnifiedSpace>,
}

#[derive(Debug, Clone)]
pub struct DomainData {
    pub schema: Arc<DomainSchema>,
    pub kb: Arc<KnowledgeBase>,
    pub goals: Vec<UserGoal>,
}

impl DomainData {
    pub fn load(schema: &std::path::Path, goals: &std::path::Path) -> Result<Self> {
        let schema = DomainSchema::load(schema)?;
        let kb = KnowledgeBase::load(&schema)?;
        let goals = load_goals(goals, &schema)?;
        Ok(DomainData {
            schema: Arc::new(schema),
            kb: Arc::new(kb),
            goals,
        })
    }

    pub fn env(&self, space: &Arc<UnifiedSpace>, n_max_turns: usize) -> DialogueEnv {
        DialogueEnv::new(space.clone(), self.schema.clone(), self.kb.clone(), n_max_turns)
    }
}

impl ExperimentData {
    pub fn new(source: DomainData, target: DomainData, test_goals: Vec<UserGoal>) -> Result<Self> {
        let space = Arc::new(build_unified_space(&source.schema, &target.schema)?);
        Ok(ExperimentData {
            source,
            target,
            test_goals,
            space,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub source_schema: PathBuf,
    pub source_goals: PathBuf,
    pub target_schema: PathBuf,
    pub target_goals: PathBuf,
    pub test_goals: PathBuf,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub variants: Vec<Variant>,
    pub config: TrainingConfig,
    /// Epochs for source models; defaults to `config.n_epochs`.
    pub source_epochs: Option<usize>,
    pub master_seed: u64,
    /// Train one source model for all repeats instead of one per repeat.
    pub shared_source: bool,
    pub workers: usize,
}

/// Desk-scale defaults: 20 repeats of 30 epochs.
pub const DESK_REPEATS: usize = 20;
pub const DESK_EPOCHS: usize = 30;
pub const DEFAULT_SIZES: [usize; 6] = [5, 10, 20, 30, 50, 120];

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            source_schema: PathBuf::new(),
            source_goals: PathBuf::new(),
            target_schema: PathBuf::new(),
            target_goals: PathBuf::new(),
            test_goals: PathBuf::new(),
            sizes: DEFAULT_SIZES.to_vec(),
            repeats: DESK_REPEATS,
            variants: Variant::ALL.to_vec(),
            config: TrainingConfig {
                n_epochs: DESK_EPOCHS,
                ..TrainingConfig::default()
            },
            source_epochs: None,
            master_seed: 0,
            shared_source: false,
            workers: 1,
        }
    }
}

impl ExperimentPlan {
    pub fn load_data(&self) -> Result<ExperimentData> {
        let source = DomainData::load(&self.source_schema, &self.source_goals)?;
        let target = DomainData::load(&self.target_schema, &self.target_goals)?;
        let test_goals = load_goals(&self.test_goals, &target.schema)?;
        ExperimentData::new(source, target, test_goals)
    }

    pub fn validate(&self, data: &ExperimentData) -> Result<()> {
        self.config.validate()?;
        if self.repeats < 2 {
            return Err(Error::Config("repeats must be at least 2".into()));
        }
        if self.variants.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config("plan has no variants or no sizes".into()));
        }
        if let Some(&size) = self.sizes.iter().find(|&&s| s == 0 || s > data.target.goals.len()) {
            return Err(Error::Config(format!(
                "subset size {size} not in 1..={}",
                data.target.goals.len()
            )));
        }
        if data.test_goals.is_empty() || data.source.goals.is_empty() {
            return Err(Error::EmptyGoals);
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.variants.len() * self.sizes.len() * self.repeats
    }
}

/// Stable 64-bit seed for a labelled coordinate.
pub fn derive_seed(master: u64, label: &str, size: usize, repeat: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update((size as u64).to_le_bytes());
    h.update((repeat as u64).to_le_bytes());
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().expect("sha256 yields 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub variant: Variant,
    pub subset_size: usize,
    pub repeat: usize,
    pub seed: u64,
    pub final_train_sr: f64,
    pub final_test_sr: f64,
    pub best_test_sr: f64,
    pub failed: bool,
    pub warm_start: Option<WarmStartReport>,
    pub reports: Vec<EpochReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub variant: Variant,
    /// Subset size, or epoch index for learning curves.
    pub x: usize,
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub source_reports: Vec<Vec<EpochReport>>,
    pub failed_runs: usize,
}

impl ExperimentResult {
    pub fn completed(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| !r.failed)
    }

    /// Final-epoch success per (variant, subset size).
    pub fn by_size(&self, metric: Metric) -> Vec<AggregateResult> {
        let cells: BTreeSet<(Variant, usize)> = self.completed().map(|r| (r.variant, r.subset_size)).collect();
        cells
            .into_iter()
            .filter_map(|(variant, size)| {
                let samples: Vec<f64> = self
                    .completed()
                    .filter(|r| r.variant == variant && r.subset_size == size)
                    .map(|r| match metric {
                        Metric::Train => r.final_train_sr,
                        Metric::Test => r.final_test_sr,
                    })
                    .collect();
                aggregate(variant, size, &samples)
            })
            .collect()
    }

    /// Per-epoch success for runs of subset size `size`.
    pub fn curves(&self, size: usize, metric: Metric) -> Vec<AggregateResult> {
        let variants: BTreeSet<Variant> = self.completed().map(|r| r.variant).collect();
        let mut out = Vec::new();
        for variant in variants {
            let runs: Vec<&RunRecord> = self
                .completed()
                .filter(|r| r.variant == variant && r.subset_size == size)
                .collect();
            let n_epochs = runs.iter().map(|r| r.reports.len()).min().unwrap_or(0);
            for epoch in 0..n_epochs {
                let samples: Vec<f64> = runs
                    .iter()
                    .map(|r| match metric {
                        Metric::Train => r.reports[epoch].train_success_rate,
                        Metric::Test => r.reports[epoch].test_success_rate,
                    })
                    .collect();
                out.extend(aggregate(variant, epoch, &samples));
            }
        }
        out
    }
}

fn aggregate(variant: Variant, x: usize, samples: &[f64]) -> Option<AggregateResult> {
    match mean_ci95(samples) {
        Ok((mean, ci95)) => Some(AggregateResult {
            variant,
            x,
            mean,
            ci95,
            n: samples.len(),
        }),
        Err(_) => {
            log::warn!("{variant} at {x}: {} completed runs, no interval", samples.len());
            None
        }
    }
}

struct Job {
    variant: Variant,
    size: usize,
    repeat: usize,
}

fn is_run_failure(e: &Error) -> bool {
    matches!(e, Error::WarmStartFailure { .. } | Error::Divergence(_))
}

/// Trains a source-domain model: warm start over all source goals, then the
/// regular epoch loop.
pub fn train_source(data: &ExperimentData, config: &TrainingConfig, seed: u64) -> Result<(QWeights, Vec<EpochReport>)> {
    let config = TrainingConfig { seed, ..config.clone() };
    let env = data.source.env(&data.space, config.n_max_turns);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    rule_warm_start(&env, &data.source.goals, &config, &mut buffer)?;
    let init = QWeights::rand_init(
        env.state_dim(),
        config.hidden,
        data.space.n_actions(),
        data.space.manifest_digest,
        seed,
    );
    let goals = &data.source.goals;
    let eval_goals: Vec<UserGoal> = goals.iter().step_by(4).cloned().collect();
    let config = TrainingConfig {
        n_eval_train: 1,
        n_eval_test: 1,
        ..config
    };
    let outcome = train_run(&config, &env, goals, &eval_goals, init, buffer)?;
    Ok((outcome.weights, outcome.reports))
}

/// One target-domain run. Goal subsets depend only on (size, repeat), so
/// all variants of a repeat see the same goals.
fn run_job(plan: &ExperimentPlan, data: &ExperimentData, sources: &[QWeights], job: &Job) -> Result<RunRecord> {
    let seed = derive_seed(plan.master_seed, job.variant.name(), job.size, job.repeat);
    let mut subset_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.master_seed, "subset", job.size, job.repeat));
    let mut picks = sample(&mut subset_rng, data.target.goals.len(), job.size).into_vec();
    picks.sort_unstable();
    let goals: Vec<UserGoal> = picks.iter().map(|&i| data.target.goals[i].clone()).collect();

    let config = TrainingConfig {
        seed,
        ..plan.config.clone()
    };
    let env = data.target.env(&data.space, config.n_max_turns);
    let init = if job.variant.transfer() {
        let source = if plan.shared_source {
            &sources[0]
        } else {
            &sources[job.repeat]
        };
        initialize_weights(&TransferSpec {
            source_weights: source,
            space: &data.space,
            fresh_seed: seed,
        })?
    } else {
        QWeights::rand_init(
            env.state_dim(),
            config.hidden,
            data.space.n_actions(),
            data.space.manifest_digest,
            seed,
        )
    };

    let run_id = format!("{}-n{}-r{}", job.variant.name(), job.size, job.repeat);
    let mut record = RunRecord {
        run_id,
        variant: job.variant,
        subset_size: job.size,
        repeat: job.repeat,
        seed,
        final_train_sr: 0.0,
        final_test_sr: 0.0,
        best_test_sr: 0.0,
        failed: false,
        warm_start: None,
        reports: Vec::new(),
    };

    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    if job.variant.warm_start() {
        match rule_warm_start(&env, &goals, &config, &mut buffer) {
            Ok(report) => record.warm_start = Some(report),
            Err(e) if is_run_failure(&e) => {
                log::warn!("{}: {e}", record.run_id);
                record.failed = true;
                return Ok(record);
            }
            Err(e) => return Err(e),
        }
    }
    match train_run(&config, &env, &goals, &data.test_goals, init, buffer) {
        Ok(outcome) => {
            let last = outcome.reports.last().expect("at least one epoch");
            record.final_train_sr = last.train_success_rate;
            record.final_test_sr = last.test_success_rate;
            record.best_test_sr = outcome.reports.iter().map(|r| r.test_success_rate).fold(0.0, f64::max);
            record.reports = outcome.reports;
        }
        Err(e) if is_run_failure(&e) => {
            log::warn!("{}: {e}", record.run_id);
            record.failed = true;
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

/// Source models for `plan`: none without transfer variants, one when
/// shared, else one per repeat.
pub fn train_sources(plan: &ExperimentPlan, data: &ExperimentData) -> Result<Vec<(QWeights, Vec<EpochReport>)>> {
    let source_config = TrainingConfig {
        n_epochs: plan.source_epochs.unwrap_or(plan.config.n_epochs),
        ..plan.config.clone()
    };
    let n_sources = if !plan.variants.iter().any(|v| v.transfer()) {
        0
    } else if plan.shared_source {
        1
    } else {
        plan.repeats
    };
    log::info!("training {n_sources} source model(s)");
    worker_pool(plan)?.install(|| {
        (0..n_sources)
            .into_par_iter()
            .map(|r| train_source(data, &source_config, derive_seed(plan.master_seed, "source", 0, r)))
            .collect()
    })
}

fn worker_pool(plan: &ExperimentPlan) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

pub fn run_experiment(plan: &ExperimentPlan, data: &ExperimentData) -> Result<ExperimentResult> {
    plan.validate(data)?;
    let sources = train_sources(plan, data)?;
    run_with_sources(plan, data, sources)
}

/// Runs every (variant, size, repeat) job against already trained source
/// models, as returned by [`train_sources`] for an equivalent plan.
pub fn run_with_sources(
    plan: &ExperimentPlan,
    data: &ExperimentData,
    sources: Vec<(QWeights, Vec<EpochReport>)>,
) -> Result<ExperimentResult> {
    plan.validate(data)?;
    let needed = if !plan.variants.iter().any(|v| v.transfer()) {
        0
    } else if plan.shared_source {
        1
    } else {
        plan.repeats
    };
    if sources.len() < needed {
        return Err(Error::Config(format!(
            "{needed} source models needed, {} given",
            sources.len()
        )));
    }
    let (source_weights, source_reports): (Vec<QWeights>, Vec<Vec<EpochReport>>) = sources.into_iter().unzip();

    let mut jobs = Vec::with_capacity(plan.run_count());
    for &variant in &plan.variants {
        for &size in &plan.sizes {
            for repeat in 0..plan.repeats {
                jobs.push(Job { variant, size, repeat });
            }
        }
    }
    log::info!("running {} jobs", jobs.len());
    let runs: Vec<RunRecord> = worker_pool(plan)?.install(|| {
        jobs.par_iter()
            .map(|job| run_job(plan, data, &source_weights, job))
            .collect::<Result<Vec<_>>>()
    })?;
    let failed_runs = runs.iter().filter(|r| r.failed).count();
    if failed_runs > 0 {
        log::warn!(
            "{failed_runs} of {} runs failed and are excluded from aggregates",
            runs.len()
        );
    }
    Ok(ExperimentResult {
        runs,
        source_reports,
        failed_runs,
    })
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let data = plan.load_data()?;
    run_experiment(plan, &data)
}
