use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_json, Error, Result};
use crate::neural::DEFAULT_HIDDEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub n_epochs: usize,
    pub n_dialogues: usize,
    pub n_max_turns: usize,
    pub epsilon: f64,
    /// Rule-agent success rate; the first epoch reaching it flushes the
    /// replay buffer.
    pub s_rule_based: f64,
    pub warm_start_positive_fraction: f64,
    pub warm_start_episode_cap: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Exploration rate used when measuring success rates.
    pub eval_epsilon: f64,
    pub n_eval_train: usize,
    pub n_eval_test: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_epochs: 50,
            n_dialogues: 100,
            n_max_turns: 20,
            epsilon: 0.05,
            s_rule_based: 0.3,
            warm_start_positive_fraction: 0.3,
            warm_start_episode_cap: 5000,
            gamma: 0.9,
            learning_rate: 0.001,
            batch_size: 16,
            buffer_capacity: 10_000,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
            eval_epsilon: 0.0,
            n_eval_train: 2,
            n_eval_test: 3,
        }
    }
}

impl TrainingConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: TrainingConfig = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        for (name, value) in [
            ("n_epochs", self.n_epochs),
            ("n_dialogues", self.n_dialogues),
            ("n_max_turns", self.n_max_turns),
            ("warm_start_episode_cap", self.warm_start_episode_cap),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("hidden", self.hidden),
            ("n_eval_train", self.n_eval_train),
            ("n_eval_test", self.n_eval_test),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.eval_epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.warm_start_positive_fraction > 0.0 && self.warm_start_positive_fraction < 1.0) {
            return bad("warm_start_positive_fraction must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.s_rule_based) {
            return bad("s_rule_based must lie in [0, 1]");
        }
        Ok(())
    }
}
