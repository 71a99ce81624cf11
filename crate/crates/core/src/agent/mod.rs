//! Policy learning: epsilon-greedy DQN agent, rule-based benchmark agent,
//! warm start and the epoch training loop.

mod config;
mod dialogue;
mod policy;
mod training;

pub use config::TrainingConfig;
pub use dialogue::{DialogueEnv, Episode, Policy, ScriptedPolicy, Transcript};
pub use policy::{argmax, rule_policy, select_action, EpsilonGreedy, RandomPolicy, RulePolicy};
pub use training::{
    evaluate, evaluate_policy, rule_warm_start, stream_rng, train_run, warm_start, EpochReport, Stream, TrainOutcome,
    WarmStartReport,
};
