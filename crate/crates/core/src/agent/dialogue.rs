use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{decode_action, ActionKind, AgentAction, DomainSchema, UnifiedSpace, UserGoal};
use crate::error::Result;
use crate::kb::KnowledgeBase;
use crate::neural::Experience;
use crate::simulator::{DialogueAct, UserSimulator};
use crate::tracker::{StateVector, TrackerState};

/// Everything needed to hold dialogues in one (active) domain over a
/// unified action space.
#[derive(Debug, Clone)]
pub struct DialogueEnv {
    pub space: Arc<UnifiedSpace>,
    pub schema: Arc<DomainSchema>,
    pub kb: Arc<KnowledgeBase>,
    pub n_max_turns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub success: bool,
    pub turns: usize,
    pub total_reward: f64,
}

pub trait Policy {
    fn choose(&mut self, env: &DialogueEnv, tracker: &TrackerState, state: &StateVector) -> Result<usize>;
}

/// Chat transcript of one dialogue: user acts and agent acts interleaved.
pub type Transcript = Vec<DialogueAct>;

impl DialogueEnv {
    pub fn new(
        space: Arc<UnifiedSpace>,
        schema: Arc<DomainSchema>,
        kb: Arc<KnowledgeBase>,
        n_max_turns: usize,
    ) -> Self {
        DialogueEnv {
            space,
            schema,
            kb,
            n_max_turns,
        }
    }

    pub fn simulator(&self, seed: u64) -> UserSimulator {
        self.simulator_with(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn simulator_with(&self, rng: ChaCha8Rng) -> UserSimulator {
        UserSimulator::new(self.kb.clone(), self.space.slots.clone(), self.n_max_turns, rng)
    }

    pub fn state_dim(&self) -> usize {
        crate::tracker::FeatureLayout::new(&self.space).dim()
    }

    pub fn new_tracker(&self) -> TrackerState {
        TrackerState::new(&self.kb)
    }

    pub fn embed(&self, tracker: &TrackerState) -> StateVector {
        tracker.embed(&self.space, self.n_max_turns)
    }

    /// Decodes an action index and attaches the KB suggestion to informs.
    pub fn realize(&self, tracker: &TrackerState, index: usize) -> Result<AgentAction> {
        let mut action = decode_action(&self.space, index)?;
        if let ActionKind::Inform(slot) = &action.kind {
            if self.kb.has_slot(slot) {
                action.value = self.kb.suggest(&tracker.kb_constraints(&self.kb), slot)?;
            }
        }
        Ok(action)
    }

    /// Runs one dialogue to completion. Every transition is appended to
    /// `record` and every act to `transcript` when given.
    pub fn run_dialogue(
        &self,
        sim: &mut UserSimulator,
        goal: &UserGoal,
        policy: &mut dyn Policy,
        mut record: Option<&mut Vec<Experience>>,
        mut transcript: Option<&mut Transcript>,
    ) -> Result<Episode> {
        let (mut sim_state, first) = sim.reset(goal);
        let mut tracker = self.new_tracker();
        tracker.update(&first, None, &self.kb);
        if let Some(t) = transcript.as_deref_mut() {
            t.push(first);
        }
        let mut state = self.embed(&tracker);
        let mut total_reward = 0.0;
        loop {
            let index = policy.choose(self, &tracker, &state)?;
            let action = self.realize(&tracker, index)?;
            let outcome = sim.step(&mut sim_state, &action)?;
            tracker.update(&outcome.user_act, Some(&action), &self.kb);
            let next_state = self.embed(&tracker);
            total_reward += outcome.reward;
            if let Some(t) = transcript.as_deref_mut() {
                t.push(DialogueAct::from_agent(&action));
                t.push(outcome.user_act.clone());
            }
            if let Some(r) = record.as_deref_mut() {
                r.push(Experience {
                    state,
                    action: index,
                    reward: outcome.reward,
                    next_state: next_state.clone(),
                    done: outcome.done,
                });
            }
            if outcome.done {
                return Ok(Episode {
                    success: outcome.success,
                    turns: sim_state.turn,
                    total_reward,
                });
            }
            state = next_state;
        }
    }
}

/// Replays a fixed action sequence, then closes.
pub struct ScriptedPolicy {
    pub actions: Vec<usize>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        ScriptedPolicy { actions, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn choose(&mut self, _: &DialogueEnv, _: &TrackerState, _: &StateVector) -> Result<usize> {
        let a = self.actions.get(self.next).copied().unwrap_or(1);
        self.next += 1;
        Ok(a)
    }
}
