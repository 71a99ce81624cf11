use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainingConfig;
use super::dialogue::{DialogueEnv, Policy};
use super::policy::{EpsilonGreedy, RulePolicy};
use crate::domain::UserGoal;
use crate::error::{Error, Result};
use crate::neural::{train_batch, QWeights, ReplayBuffer};

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Simulator = 1,
    Exploration = 2,
    Goals = 3,
    Batches = 4,
    WarmStart = 5,
    Evaluation = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_success_rate: f64,
    pub test_success_rate: f64,
    /// Success rate of the epoch's exploring (epsilon-greedy) dialogues,
    /// which drives the flush rule.
    pub explore_success_rate: f64,
    pub mean_loss: f64,
    pub buffer_size: usize,
    pub flushed: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    pub weights: QWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarmStartReport {
    pub episodes: usize,
    pub successes: usize,
    /// Experiences from successful dialogues stored by this warm start.
    pub stored: usize,
    /// `stored / capacity`, capped by what the buffer still holds.
    pub achieved_fraction: f64,
}

/// Fills `buffer` with transitions from successful rule-agent dialogues
/// until they make up `warm_start_positive_fraction` of its capacity, or
/// the episode cap is hit.
pub fn warm_start(
    env: &DialogueEnv,
    goals: &[UserGoal],
    config: &TrainingConfig,
    buffer: &mut ReplayBuffer,
    policy: &mut dyn Policy,
    rng: &mut ChaCha8Rng,
) -> Result<WarmStartReport> {
    if goals.is_empty() {
        return Err(Error::EmptyGoals);
    }
    let wanted = (config.warm_start_positive_fraction * buffer.capacity() as f64).ceil() as usize;
    let mut sim = env.simulator(rng.gen());
    let mut episode = Vec::new();
    let mut report = WarmStartReport {
        episodes: 0,
        successes: 0,
        stored: 0,
        achieved_fraction: 0.0,
    };
    while report.stored < wanted && report.episodes < config.warm_start_episode_cap {
        let goal = &goals[rng.gen_range(0..goals.len())];
        episode.clear();
        let outcome = env.run_dialogue(&mut sim, goal, policy, Some(&mut episode), None)?;
        report.episodes += 1;
        if outcome.success {
            report.successes += 1;
            report.stored += episode.len();
            for e in episode.drain(..) {
                buffer.push(e);
            }
        }
    }
    if report.successes == 0 {
        return Err(Error::WarmStartFailure {
            episodes: report.episodes,
        });
    }
    report.achieved_fraction = report.stored.min(buffer.len()) as f64 / buffer.capacity() as f64;
    Ok(report)
}

/// Warm start with the rule agent, using the warm-start stream of
/// `config.seed`.
pub fn rule_warm_start(
    env: &DialogueEnv,
    goals: &[UserGoal],
    config: &TrainingConfig,
    buffer: &mut ReplayBuffer,
) -> Result<WarmStartReport> {
    let mut rng = stream_rng(config.seed, Stream::WarmStart);
    warm_start(env, goals, config, buffer, &mut RulePolicy, &mut rng)
}

/// Success rate of `policy` over `goals`, each played `n_per_goal` times
/// in list order.
pub fn evaluate_policy(
    env: &DialogueEnv,
    policy: &mut dyn Policy,
    goals: &[UserGoal],
    n_per_goal: usize,
    seed: u64,
) -> Result<f64> {
    if goals.is_empty() {
        return Err(Error::EmptyGoals);
    }
    let mut sim = env.simulator_with(stream_rng(seed, Stream::Evaluation));
    let mut successes = 0usize;
    for goal in goals {
        for _ in 0..n_per_goal {
            if env.run_dialogue(&mut sim, goal, policy, None, None)?.success {
                successes += 1;
            }
        }
    }
    Ok(successes as f64 / (goals.len() * n_per_goal) as f64)
}

/// Greedy (or `epsilon`-greedy) success rate of `weights`.
pub fn evaluate(
    env: &DialogueEnv,
    weights: &QWeights,
    goals: &[UserGoal],
    n_per_goal: usize,
    epsilon: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, Stream::Exploration);
    let mut policy = EpsilonGreedy {
        weights,
        epsilon,
        rng: &mut rng,
    };
    evaluate_policy(env, &mut policy, goals, n_per_goal, seed)
}

/// Epoch loop: refresh the target network, simulate `n_dialogues`
/// exploring dialogues into the buffer, flush once on first reaching
/// `s_rule_based`, take one pass of mini-batches over the buffer, then
/// measure greedy success on the train and test goals.
pub fn train_run(
    config: &TrainingConfig,
    env: &DialogueEnv,
    goals_train: &[UserGoal],
    goals_test: &[UserGoal],
    init_weights: QWeights,
    mut buffer: ReplayBuffer,
) -> Result<TrainOutcome> {
    config.validate()?;
    if goals_train.is_empty() || goals_test.is_empty() {
        return Err(Error::EmptyGoals);
    }
    if init_weights.d != env.state_dim() || init_weights.n_actions != env.space.n_actions() {
        return Err(Error::Dimension {
            expected: env.state_dim(),
            actual: init_weights.d,
        });
    }
    if init_weights.manifest != env.space.manifest_digest {
        return Err(Error::TransferIncompatible(format!(
            "weights belong to manifest {:016x}, space is {}",
            init_weights.manifest,
            env.space.digest_hex()
        )));
    }

    let mut weights = init_weights;
    let mut sim = env.simulator_with(stream_rng(config.seed, Stream::Simulator));
    let mut explore_rng = stream_rng(config.seed, Stream::Exploration);
    let mut goal_rng = stream_rng(config.seed, Stream::Goals);
    let mut batch_rng = stream_rng(config.seed, Stream::Batches);
    let mut has_flushed = false;
    let mut reports = Vec::with_capacity(config.n_epochs);
    let mut episode = Vec::new();

    for epoch in 0..config.n_epochs {
        let target = weights.clone();

        let mut successes = 0usize;
        for _ in 0..config.n_dialogues {
            let goal = &goals_train[goal_rng.gen_range(0..goals_train.len())];
            let mut policy = EpsilonGreedy {
                weights: &weights,
                epsilon: config.epsilon,
                rng: &mut explore_rng,
            };
            episode.clear();
            if env
                .run_dialogue(&mut sim, goal, &mut policy, Some(&mut episode), None)?
                .success
            {
                successes += 1;
            }
            for e in episode.drain(..) {
                buffer.push(e);
            }
        }
        let explore_success_rate = successes as f64 / config.n_dialogues as f64;

        let mut flushed = false;
        if !has_flushed && explore_success_rate >= config.s_rule_based {
            buffer.flush();
            has_flushed = true;
            flushed = true;
        }

        let n_batches = buffer.len() / config.batch_size;
        let mut loss_sum = 0.0;
        for _ in 0..n_batches {
            let batch = buffer.sample(config.batch_size, &mut batch_rng)?;
            loss_sum += train_batch(&mut weights, &target, &batch, config.learning_rate, config.gamma)?;
        }
        let mean_loss = if n_batches > 0 {
            loss_sum / n_batches as f64
        } else {
            0.0
        };

        let eval_seed = config.seed ^ ((epoch as u64 + 1) << 32);
        let train_success_rate = evaluate(
            env,
            &weights,
            goals_train,
            config.n_eval_train,
            config.eval_epsilon,
            eval_seed,
        )?;
        let test_success_rate = evaluate(
            env,
            &weights,
            goals_test,
            config.n_eval_test,
            config.eval_epsilon,
            eval_seed,
        )?;

        log::debug!(
            "epoch {epoch}: explore {explore_success_rate:.2} train {train_success_rate:.3} test {test_success_rate:.3} loss {mean_loss:.3} buffer {}{}",
            buffer.len(),
            if flushed { " (flushed)" } else { "" }
        );
        reports.push(EpochReport {
            epoch,
            train_success_rate,
            test_success_rate,
            explore_success_rate,
            mean_loss,
            buffer_size: buffer.len(),
            flushed,
        });
    }
    Ok(TrainOutcome { reports, weights })
}
