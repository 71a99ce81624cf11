use rand::Rng;

use super::dialogue::{DialogueEnv, Policy};
use crate::domain::{action_index, AgentAction, DomainSchema, UnifiedSpace};
use crate::error::Result;
use crate::kb::KnowledgeBase;
use crate::neural::QWeights;
use crate::tracker::{StateVector, TrackerState};

/// Lowest index among the maximal values.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, greedy otherwise.
pub fn select_action<R: Rng + ?Sized>(
    weights: &QWeights,
    state: &StateVector,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..weights.n_actions));
    }
    Ok(argmax(&weights.forward(&state.values)?))
}

pub struct EpsilonGreedy<'a, R> {
    pub weights: &'a QWeights,
    pub epsilon: f64,
    pub rng: &'a mut R,
}

impl<R: Rng> Policy for EpsilonGreedy<'_, R> {
    fn choose(&mut self, _: &DialogueEnv, _: &TrackerState, state: &StateVector) -> Result<usize> {
        select_action(self.weights, state, self.epsilon, self.rng)
    }
}

/// Hand-written benchmark agent. In priority order it
/// 1. answers a slot the user just asked for, when the KB has a value;
/// 2. requests the next active-domain slot (unified order) that is not
///    constrained and that neither side has requested;
/// 3. closes once every slot the user asked for has been informed;
/// 4. otherwise informs the first outstanding user request.
pub fn rule_policy(
    tracker: &TrackerState,
    space: &UnifiedSpace,
    schema: &DomainSchema,
    kb: &KnowledgeBase,
) -> Result<AgentAction> {
    let constraints = tracker.kb_constraints(kb);
    let ordered = |slots: &mut dyn Iterator<Item = &String>| -> Vec<String> {
        let mut v: Vec<&String> = slots.collect();
        v.sort_by_key(|s| (space.slot_index(s).unwrap_or(usize::MAX), (*s).clone()));
        v.into_iter().cloned().collect()
    };

    if let Some(act) = &tracker.last_user_act {
        for slot in ordered(&mut act.request_slots.iter()) {
            if kb.has_slot(&slot) {
                if let Some(value) = kb.suggest(&constraints, &slot)? {
                    return Ok(AgentAction::inform(slot, Some(value)));
                }
            }
        }
    }

    for slot in &space.slots {
        if schema.has_slot(slot)
            && !tracker.user_constraints_so_far.contains_key(slot)
            && !tracker.agent_requested.contains(slot)
            && !tracker.user_requested.contains(slot)
        {
            return Ok(AgentAction::request(slot.clone()));
        }
    }

    match ordered(&mut tracker.user_requested.iter())
        .into_iter()
        .find(|s| !tracker.agent_informed.contains(s))
    {
        None => Ok(AgentAction::close()),
        Some(slot) => {
            let value = if kb.has_slot(&slot) {
                kb.suggest(&constraints, &slot)?
            } else {
                None
            };
            Ok(AgentAction::inform(slot, value))
        }
    }
}

pub struct RulePolicy;

impl Policy for RulePolicy {
    fn choose(&mut self, env: &DialogueEnv, tracker: &TrackerState, _: &StateVector) -> Result<usize> {
        let action = rule_policy(tracker, &env.space, &env.schema, &env.kb)?;
        action_index(&env.space, &action)
    }
}

/// Uniformly random actions.
pub struct RandomPolicy<'a, R> {
    pub rng: &'a mut R,
}

impl<R: Rng> Policy for RandomPolicy<'_, R> {
    fn choose(&mut self, env: &DialogueEnv, _: &TrackerState, _: &StateVector) -> Result<usize> {
        Ok(self.rng.gen_range(0..env.space.n_actions()))
    }
}
