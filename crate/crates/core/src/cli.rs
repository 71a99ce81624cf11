//! Command-line front end. Every subcommand is a function over parsed
//! arguments so tests can drive it without a process.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::agent::{
    argmax, rule_warm_start, stream_rng, train_run, DialogueEnv, EpsilonGreedy, Policy, RulePolicy, Stream,
    TrainingConfig, Transcript, WarmStartReport,
};
use crate::domain::{build_unified_space, load_goals, ActionKind, DomainSchema, UnifiedSpace, UserGoal, DONTCARE};
use crate::error::Error;
use crate::harness::{self, ExperimentOutputs, ExperimentPlan, Metric, Variant};
use crate::kb::KnowledgeBase;
use crate::neural::{QWeights, ReplayBuffer};
use crate::simulator::{judge_success, write_trace, DialogueAct, SimulatorState};
use crate::tracker::FeatureLayout;
use crate::transfer::{initialize_weights, TransferSpec};

#[derive(Debug, Parser)]
#[command(name = "gobot", version, about = "Train and transfer DQN dialogue policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Warm-start and train a policy in one domain.
    Train(TrainArgs),
    /// Build target-domain initial weights from a source-domain model.
    Transfer(TransferArgs),
    /// Run the repeated transfer experiment grid.
    Experiment(ExperimentArgs),
    /// Measure the success rate of a trained or rule-based policy.
    Eval(EvalArgs),
    /// Play the user against a policy, one semantic frame per line.
    Chat(ChatArgs),
    /// Render an aggregate CSV as an SVG line plot.
    Plot(PlotArgs),
    /// Check schema, KB and goal files.
    ValidateData(ValidateArgs),
}

/// The active domain and the schemas defining the action space.
#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    /// Schema of the domain the agent talks in.
    #[arg(long)]
    pub schema: PathBuf,
    /// Source domain of the action space, when `--schema` is the target.
    #[arg(long, conflicts_with = "target_schema")]
    pub source_schema: Option<PathBuf>,
    /// Target domain of the action space, when `--schema` is the source.
    #[arg(long)]
    pub target_schema: Option<PathBuf>,
    /// Knowledge base to use instead of the one named by the schema.
    #[arg(long)]
    pub kb: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long)]
    pub goals: PathBuf,
    /// Goals for the reported test success rate; defaults to `--goals`.
    #[arg(long)]
    pub test_goals: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial weights; a fresh random network otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch CSV; defaults to the weight file with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub eval_epsilon: Option<f64>,
    #[arg(long)]
    pub no_warm_start: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Weights trained in the source domain.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub source_schema: PathBuf,
    #[arg(long)]
    pub target_schema: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub source_schema: PathBuf,
    #[arg(long)]
    pub target_schema: PathBuf,
    /// Goals for training source models.
    #[arg(long)]
    pub source_goals: PathBuf,
    /// Target-domain training goals that subsets are drawn from.
    #[arg(long)]
    pub goals: PathBuf,
    #[arg(long)]
    pub test_goals: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs for source models; defaults to `--epochs`.
    #[arg(long)]
    pub source_epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Drop the warm-start variants.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Drop the transfer variants.
    #[arg(long)]
    pub no_transfer: bool,
    /// One source model for all repeats.
    #[arg(long)]
    pub shared_source: bool,
    /// 100 repeats of 50 epochs instead of the desk-scale 20 of 30.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub eval_epsilon: Option<f64>,
    /// Also render SVG plots next to the CSVs.
    #[arg(long)]
    pub plot: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long)]
    pub goals: PathBuf,
    #[arg(long, required_unless_present = "rule")]
    pub weights: Option<PathBuf>,
    /// Evaluate the rule-based agent instead of a network.
    #[arg(long)]
    pub rule: bool,
    #[arg(long, default_value_t = 3)]
    pub n_per_goal: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub eval_epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pub max_turns: usize,
    /// Write every dialogue as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long, required_unless_present = "rule")]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub rule: bool,
    #[arg(long, default_value_t = 20)]
    pub max_turns: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Aggregate CSV (variant, x, mean, ci95, n).
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "success rate")]
    pub title: String,
    #[arg(long, default_value = "x")]
    pub x_label: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub goals: Vec<PathBuf>,
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Also print the state feature labels for this schema's space.
    #[arg(long)]
    pub dump_features: bool,
}

/// A request that parsed but cannot be served as given.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        return EXIT_USAGE;
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_data_error() => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli, stdin, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Transfer(a) => cmd_transfer(&a, stdout),
        Command::Experiment(a) => cmd_experiment(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Chat(a) => cmd_chat(&a, stdin, stdout),
        Command::Plot(a) => cmd_plot(&a),
        Command::ValidateData(a) => cmd_validate_data(&a, stdout),
    }
}

/// Active-domain environment over the space named by `args`.
pub fn load_env(args: &SpaceArgs, n_max_turns: usize) -> anyhow::Result<DialogueEnv> {
    let mut schema = DomainSchema::load(&args.schema)?;
    if let Some(kb) = &args.kb {
        schema.kb_ref = kb.clone();
    }
    let space = match (&args.source_schema, &args.target_schema) {
        (Some(source), _) => build_unified_space(&DomainSchema::load(source)?, &schema)?,
        (None, Some(target)) => build_unified_space(&schema, &DomainSchema::load(target)?)?,
        (None, None) => build_unified_space(&schema, &schema)?,
    };
    let kb = KnowledgeBase::load(&schema)?;
    Ok(DialogueEnv::new(
        Arc::new(space),
        Arc::new(schema),
        Arc::new(kb),
        n_max_turns,
    ))
}

fn load_weights_for(path: &Path, space: &UnifiedSpace) -> anyhow::Result<QWeights> {
    let weights = QWeights::load(path)?;
    if weights.manifest != space.manifest_digest {
        return Err(Error::TransferIncompatible(format!(
            "{} was trained for manifest {:016x}, this action space is {}",
            path.display(),
            weights.manifest,
            space.digest_hex()
        ))
        .into());
    }
    Ok(weights)
}

fn non_empty(goals: Vec<UserGoal>) -> anyhow::Result<Vec<UserGoal>> {
    if goals.is_empty() {
        return Err(Error::EmptyGoals.into());
    }
    Ok(goals)
}

#[derive(Debug, Serialize)]
struct TrainMetadata {
    warm_start: bool,
    warm_start_report: Option<WarmStartReport>,
    seed: u64,
    manifest: String,
    config: TrainingConfig,
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => TrainingConfig::load(path)?,
        None => TrainingConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.n_epochs = epochs;
    }
    if let Some(eps) = args.eval_epsilon {
        config.eval_epsilon = eps;
    }
    config.validate()?;

    let env = load_env(&args.space, config.n_max_turns)?;
    let goals = non_empty(load_goals(&args.goals, &env.schema)?)?;
    let test_goals = match &args.test_goals {
        Some(path) => non_empty(load_goals(path, &env.schema)?)?,
        None => goals.clone(),
    };
    let init = match &args.weights {
        Some(path) => load_weights_for(path, &env.space)?,
        None => QWeights::rand_init(
            env.state_dim(),
            config.hidden,
            env.space.n_actions(),
            env.space.manifest_digest,
            config.seed,
        ),
    };

    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let warm_start_report = if args.no_warm_start {
        None
    } else {
        let report = rule_warm_start(&env, &goals, &config, &mut buffer)?;
        log::info!(
            "warm start: {} episodes, {} successful, {} experiences",
            report.episodes,
            report.successes,
            report.stored
        );
        Some(report)
    };
    let outcome = train_run(&config, &env, &goals, &test_goals, init, buffer)?;
    outcome.weights.save(&args.out)?;

    let csv_path = args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    let mut bytes = Vec::new();
    harness::write_epoch_csv(&mut bytes, "train", &outcome.reports)?;
    crate::error::write_file(&csv_path, &bytes)?;
    let meta = TrainMetadata {
        warm_start: !args.no_warm_start,
        warm_start_report,
        seed: config.seed,
        manifest: env.space.digest_hex(),
        config: config.clone(),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    crate::error::write_file(&meta_path(&csv_path), &meta_json)?;

    let last = outcome.reports.last().expect("n_epochs >= 1");
    writeln!(
        stdout,
        "trained {} epochs: train {:.3} test {:.3}, weights in {}",
        outcome.reports.len(),
        last.train_success_rate,
        last.test_success_rate,
        args.out.display()
    )?;
    Ok(())
}

/// Sidecar holding the run metadata of an epoch CSV.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

pub fn cmd_transfer(args: &TransferArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let source = DomainSchema::load(&args.source_schema)?;
    let target = DomainSchema::load(&args.target_schema)?;
    let space = build_unified_space(&source, &target)?;
    let weights = QWeights::load(&args.source)?;
    let init = initialize_weights(&TransferSpec {
        source_weights: &weights,
        space: &space,
        fresh_seed: args.seed,
    })?;
    init.save(&args.out)?;
    writeln!(
        stdout,
        "copied {} common slots and {} common actions into {}",
        space.common_slot_indices.len(),
        space.common_action_indices.len(),
        args.out.display()
    )?;
    Ok(())
}

pub fn cmd_experiment(args: &ExperimentArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut plan = ExperimentPlan {
        source_schema: args.source_schema.clone(),
        source_goals: args.source_goals.clone(),
        target_schema: args.target_schema.clone(),
        target_goals: args.goals.clone(),
        test_goals: args.test_goals.clone(),
        master_seed: args.seed,
        shared_source: args.shared_source,
        workers: args.workers,
        source_epochs: args.source_epochs,
        ..ExperimentPlan::default()
    };
    if let Some(path) = &args.config {
        plan.config = TrainingConfig::load(path)?;
    }
    if args.full_scale {
        plan.repeats = 100;
        plan.config.n_epochs = 50;
    }
    if let Some(r) = args.repeats {
        plan.repeats = r;
    }
    if let Some(e) = args.epochs {
        plan.config.n_epochs = e;
    }
    if let Some(eps) = args.eval_epsilon {
        plan.config.eval_epsilon = eps;
    }
    if let Some(sizes) = &args.sizes {
        plan.sizes = sizes.clone();
    }
    if let Some(names) = &args.variants {
        plan.variants = names
            .iter()
            .map(|n| n.parse::<Variant>())
            .collect::<Result<_, _>>()
            .map_err(|e| UsageError(e.to_string()))?;
    }
    plan.variants
        .retain(|v| !(args.no_warm_start && v.warm_start()) && !(args.no_transfer && v.transfer()));
    if plan.variants.is_empty() {
        bail!(UsageError("no variants left to run".into()));
    }

    let result = harness::run_plan(&plan)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let outputs = ExperimentOutputs::in_dir(&args.out);
    outputs.write(&result)?;
    if args.plot {
        let smallest = plan.sizes.iter().min().copied().unwrap_or(0);
        for (rows, name, title, x) in [
            (
                result.by_size(Metric::Test),
                "aggregate_test.svg",
                "test success by subset size",
                "goals",
            ),
            (
                result.by_size(Metric::Train),
                "aggregate_train.svg",
                "train success by subset size",
                "goals",
            ),
            (
                result.curves(smallest, Metric::Test),
                "curve_test.svg",
                "test success by epoch",
                "epoch",
            ),
            (
                result.curves(smallest, Metric::Train),
                "curve_train.svg",
                "train success by epoch",
                "epoch",
            ),
        ] {
            let svg = harness::render_svg(title, x, &rows);
            crate::error::write_file(&args.out.join(name), svg.as_bytes())?;
        }
    }

    writeln!(stdout, "variant\tsize\ttest_mean\tci95\tn")?;
    for a in result.by_size(Metric::Test) {
        writeln!(stdout, "{}\t{}\t{:.3}\t{:.3}\t{}", a.variant, a.x, a.mean, a.ci95, a.n)?;
    }
    if result.failed_runs > 0 {
        writeln!(stdout, "{} runs failed and were excluded", result.failed_runs)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    success_rate: f64,
    dialogues: usize,
    successes: usize,
    mean_turns: f64,
    mean_reward: f64,
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let env = load_env(&args.space, args.max_turns)?;
    let goals = non_empty(load_goals(&args.goals, &env.schema)?)?;
    let weights = match (&args.weights, args.rule) {
        (_, true) => None,
        (Some(path), false) => Some(load_weights_for(path, &env.space)?),
        (None, false) => bail!(UsageError("either --weights or --rule is required".into())),
    };
    let mut explore_rng = stream_rng(args.seed, Stream::Exploration);
    let mut rule = RulePolicy;
    let mut greedy;
    let policy: &mut dyn Policy = match &weights {
        Some(w) => {
            greedy = EpsilonGreedy {
                weights: w,
                epsilon: args.eval_epsilon,
                rng: &mut explore_rng,
            };
            &mut greedy
        }
        None => &mut rule,
    };

    let mut sim = env.simulator_with(stream_rng(args.seed, Stream::Evaluation));
    let mut trace: Vec<DialogueAct> = Vec::new();
    let (mut successes, mut turns, mut reward) = (0usize, 0usize, 0.0);
    for goal in &goals {
        for _ in 0..args.n_per_goal {
            let mut transcript = Transcript::new();
            let episode = env.run_dialogue(&mut sim, goal, policy, None, Some(&mut transcript))?;
            successes += usize::from(episode.success);
            turns += episode.turns;
            reward += episode.total_reward;
            trace.extend(transcript);
        }
    }
    let dialogues = goals.len() * args.n_per_goal;
    let report = EvalReport {
        success_rate: successes as f64 / dialogues as f64,
        dialogues,
        successes,
        mean_turns: turns as f64 / dialogues as f64,
        mean_reward: reward / dialogues as f64,
    };
    if let Some(path) = &args.trace {
        let mut bytes = Vec::new();
        write_trace(&mut bytes, &trace)?;
        crate::error::write_file(path, &bytes)?;
    }
    if let Some(path) = &args.out {
        let mut json = serde_json::to_vec_pretty(&report)?;
        json.push(b'\n');
        crate::error::write_file(path, &json)?;
    }
    writeln!(
        stdout,
        "success rate {:.4} ({} of {} dialogues), mean turns {:.2}, mean reward {:.2}",
        report.success_rate, successes, dialogues, report.mean_turns, report.mean_reward
    )?;
    Ok(())
}

/// One parsed chat line.
#[derive(Debug, Clone, PartialEq)]
pub enum ChatLine {
    Act(DialogueAct),
    Close,
}

pub const CHAT_USAGE: &str = "usage: inform slot=value [slot=value ...] | request slot [slot ...] | close";

/// Parses a chat command. Slots must belong to the active schema.
pub fn parse_chat_line(line: &str, schema: &DomainSchema) -> Result<ChatLine, String> {
    let mut words = line.split_whitespace();
    let Some(command) = words.next() else {
        return Err(CHAT_USAGE.into());
    };
    let rest: Vec<&str> = words.collect();
    let check = |slot: &str| {
        if schema.has_slot(slot) {
            Ok(())
        } else {
            Err(format!("unknown slot `{slot}`"))
        }
    };
    match command {
        "close" if rest.is_empty() => Ok(ChatLine::Close),
        "inform" if !rest.is_empty() => {
            let mut act = DialogueAct::user("inform");
            for pair in rest {
                let Some((slot, value)) = pair.split_once('=') else {
                    return Err(CHAT_USAGE.into());
                };
                if value.is_empty() {
                    return Err(CHAT_USAGE.into());
                }
                check(slot)?;
                act.inform_slots.insert(slot.to_string(), value.to_string());
            }
            Ok(ChatLine::Act(act))
        }
        "request" if !rest.is_empty() => {
            let mut act = DialogueAct::user("request");
            for slot in rest {
                check(slot)?;
                act.request_slots.insert(slot.to_string());
            }
            Ok(ChatLine::Act(act))
        }
        _ => Err(CHAT_USAGE.into()),
    }
}

/// Human-as-user session. The goal is whatever the human informed and
/// requested; success is judged as for the simulator when either side
/// closes.
pub fn cmd_chat(args: &ChatArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let env = load_env(&args.space, args.max_turns)?;
    let weights = match (&args.weights, args.rule) {
        (_, true) => None,
        (Some(path), false) => Some(load_weights_for(path, &env.space)?),
        (None, false) => bail!(UsageError("either --weights or --rule is required".into())),
    };
    let mut tracker = env.new_tracker();
    let mut last_action = None;
    let mut constraints: BTreeMap<String, String> = BTreeMap::new();
    let mut requests: BTreeSet<String> = BTreeSet::new();
    let mut answered: BTreeMap<String, String> = BTreeMap::new();
    let mut turn = 0usize;
    writeln!(stdout, "{CHAT_USAGE}")?;

    let mut line = String::new();
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            writeln!(stdout, "end of input, no verdict")?;
            return Ok(());
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let act = match parse_chat_line(trimmed, &env.schema) {
            Ok(ChatLine::Close) => break,
            Ok(ChatLine::Act(act)) => act,
            Err(msg) => {
                writeln!(stdout, "warning: {msg}")?;
                continue;
            }
        };
        for (slot, value) in &act.inform_slots {
            constraints.insert(slot.clone(), value.clone());
            requests.remove(slot);
        }
        for slot in &act.request_slots {
            if !constraints.contains_key(slot) {
                requests.insert(slot.clone());
            }
        }
        writeln!(stdout, "user: {act}")?;
        tracker.update(&act, last_action.as_ref(), &env.kb);
        let state = env.embed(&tracker);
        let index = match &weights {
            Some(w) => argmax(&w.forward(&state.values)?),
            None => RulePolicy.choose(&env, &tracker, &state)?,
        };
        let action = env.realize(&tracker, index)?;
        writeln!(stdout, "agent: {}", DialogueAct::from_agent(&action))?;
        turn += 1;
        if let ActionKind::Inform(slot) = &action.kind {
            if let Some(value) = &action.value {
                if requests.contains(slot) && value != DONTCARE {
                    answered.insert(slot.clone(), value.clone());
                }
            }
        }
        let closed = action.kind == ActionKind::Close;
        last_action = Some(action);
        if closed || turn >= args.max_turns {
            break;
        }
    }

    let state = SimulatorState {
        goal: UserGoal {
            inform_slots: constraints,
            request_slots: requests,
        },
        agenda: Vec::new(),
        informed: BTreeSet::new(),
        fulfilled: answered,
        turn,
        done: true,
        success: false,
    };
    let success = !state.goal.request_slots.is_empty() && judge_success(&env.kb, &state);
    writeln!(stdout, "verdict: {}", if success { "success" } else { "failure" })?;
    Ok(())
}

pub fn cmd_plot(args: &PlotArgs) -> anyhow::Result<()> {
    let rows = harness::read_aggregate_csv(&args.csv)?;
    let svg = harness::render_svg(&args.title, &args.x_label, &rows);
    crate::error::write_file(&args.out, svg.as_bytes())?;
    Ok(())
}

/// Goals whose constraints no KB record satisfies, by index.
pub fn unsatisfiable_goals(kb: &KnowledgeBase, goals: &[UserGoal]) -> crate::Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, goal) in goals.iter().enumerate() {
        let constraints: BTreeMap<String, String> = goal
            .inform_slots
            .iter()
            .filter(|(s, _)| kb.has_slot(s))
            .map(|(s, v)| (s.clone(), v.clone()))
            .collect();
        if kb.count(&constraints)? == 0 {
            out.push(i);
        }
    }
    Ok(out)
}

pub fn cmd_validate_data(args: &ValidateArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut schema = DomainSchema::load(&args.schema)?;
    if let Some(kb) = &args.kb {
        schema.kb_ref = kb.clone();
    }
    let kb = KnowledgeBase::load(&schema)?;
    writeln!(
        stdout,
        "{}: {} slots, {} KB records",
        schema.name,
        schema.slots.len(),
        kb.len()
    )?;
    for path in &args.goals {
        let goals = load_goals(path, &schema).with_context(|| format!("validating {}", path.display()))?;
        let bad = unsatisfiable_goals(&kb, &goals)?;
        writeln!(
            stdout,
            "{}: {} goals, {} unsatisfiable",
            path.display(),
            goals.len(),
            bad.len()
        )?;
        for i in bad {
            let c: Vec<String> = goals[i].inform_slots.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(stdout, "  unsatisfiable goal {i}: {}", c.join(" "))?;
        }
    }
    if args.dump_features {
        let space = build_unified_space(&schema, &schema)?;
        for (i, label) in FeatureLayout::new(&space).labels(&space).iter().enumerate() {
            writeln!(stdout, "{i}\t{label}")?;
        }
    }
    Ok(())
}
