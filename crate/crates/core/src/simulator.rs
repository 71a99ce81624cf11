//! Agenda-based user simulator working on semantic frames.
//!
//! The simulated user holds a goal (constraints `C`, requests `R`) and a
//! stack of pending acts. Each agent action yields one user act, a reward
//! and possibly the end of the dialogue.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionKind, AgentAction, UserGoal, DONTCARE};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub speaker: Speaker,
    pub intent: String,
    pub inform_slots: BTreeMap<String, String>,
    pub request_slots: BTreeSet<String>,
}

impl DialogueAct {
    pub fn user(intent: &str) -> Self {
        DialogueAct {
            speaker: Speaker::User,
            intent: intent.to_string(),
            inform_slots: BTreeMap::new(),
            request_slots: BTreeSet::new(),
        }
    }

    pub fn user_inform(slot: &str, value: &str) -> Self {
        let mut act = Self::user("inform");
        act.inform_slots.insert(slot.to_string(), value.to_string());
        act
    }

    pub fn user_request(slot: &str) -> Self {
        let mut act = Self::user("request");
        act.request_slots.insert(slot.to_string());
        act
    }

    pub fn from_agent(action: &AgentAction) -> Self {
        let mut act = DialogueAct {
            speaker: Speaker::Agent,
            intent: match action.kind {
                ActionKind::Greet => "greet",
                ActionKind::Close => "close",
                ActionKind::Request(_) => "request",
                ActionKind::Inform(_) => "inform",
            }
            .to_string(),
            inform_slots: BTreeMap::new(),
            request_slots: BTreeSet::new(),
        };
        match &action.kind {
            ActionKind::Request(s) => {
                act.request_slots.insert(s.clone());
            }
            ActionKind::Inform(s) => {
                let value = action.value.clone().unwrap_or_else(|| "none".into());
                act.inform_slots.insert(s.clone(), value);
            }
            ActionKind::Greet | ActionKind::Close => {}
        }
        act
    }
}

impl std::fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.intent)?;
        let mut first = true;
        for (k, v) in &self.inform_slots {
            if !first {
                write!(f, "; ")?;
            }
            write!(f, "{k}={v}")?;
            first = false;
        }
        for k in &self.request_slots {
            if !first {
                write!(f, "; ")?;
            }
            write!(f, "{k}")?;
            first = false;
        }
        write!(f, ")")
    }
}

/// Writes a transcript as JSON lines, one act per line.
pub fn write_trace<W: Write>(mut out: W, acts: &[DialogueAct]) -> std::io::Result<()> {
    for act in acts {
        serde_json::to_writer(&mut out, act)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgendaItem {
    Inform(String),
    Request(String),
}

/// Reward scheme tied to the turn limit: `-1` per ongoing turn,
/// `-n_max_turns` on failure and `2 * n_max_turns` on success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rewards {
    pub ongoing: f64,
    pub negative: f64,
    pub positive: f64,
}

impl Rewards {
    pub fn for_turn_limit(n_max_turns: usize) -> Self {
        Rewards {
            ongoing: -1.0,
            negative: -(n_max_turns as f64),
            positive: 2.0 * n_max_turns as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorState {
    pub goal: UserGoal,
    /// Pending user acts; the top of the stack is the last element.
    pub agenda: Vec<AgendaItem>,
    pub informed: BTreeSet<String>,
    pub fulfilled: BTreeMap<String, String>,
    pub turn: usize,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub user_act: DialogueAct,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

pub struct UserSimulator {
    kb: Arc<KnowledgeBase>,
    slot_order: Vec<String>,
    n_max_turns: usize,
    rewards: Rewards,
    rng: ChaCha8Rng,
}

impl UserSimulator {
    /// `slot_order` fixes the canonical order used to build the opening act;
    /// slots missing from it sort after it, lexicographically.
    pub fn new(kb: Arc<KnowledgeBase>, slot_order: Vec<String>, n_max_turns: usize, rng: ChaCha8Rng) -> Self {
        UserSimulator {
            kb,
            slot_order,
            n_max_turns,
            rewards: Rewards::for_turn_limit(n_max_turns),
            rng,
        }
    }

    pub fn rewards(&self) -> Rewards {
        self.rewards
    }

    pub fn n_max_turns(&self) -> usize {
        self.n_max_turns
    }

    fn canonical<'a>(&self, slots: impl Iterator<Item = &'a String>) -> Vec<String> {
        let mut out: Vec<&String> = slots.collect();
        out.sort_by_key(|s| {
            let pos = self.slot_order.iter().position(|o| o == *s).unwrap_or(usize::MAX);
            (pos, (*s).clone())
        });
        out.into_iter().cloned().collect()
    }

    /// Opening act: one request slot plus the first half (rounded up) of the
    /// constraints, in canonical order. The rest goes on the agenda with
    /// requests below informs, each group shuffled.
    pub fn reset(&mut self, goal: &UserGoal) -> (SimulatorState, DialogueAct) {
        let informs = self.canonical(goal.inform_slots.keys());
        let requests = self.canonical(goal.request_slots.iter());
        let n_initial = informs.len().div_ceil(2);

        let mut act = DialogueAct::user("request");
        let mut informed = BTreeSet::new();
        for slot in &informs[..n_initial] {
            act.inform_slots.insert(slot.clone(), goal.inform_slots[slot].clone());
            informed.insert(slot.clone());
        }
        if let Some(first) = requests.first() {
            act.request_slots.insert(first.clone());
        }

        let mut pending_requests: Vec<String> = requests.iter().skip(1).cloned().collect();
        let mut pending_informs: Vec<String> = informs[n_initial..].to_vec();
        pending_requests.shuffle(&mut self.rng);
        pending_informs.shuffle(&mut self.rng);
        let agenda = pending_requests
            .into_iter()
            .map(AgendaItem::Request)
            .chain(pending_informs.into_iter().map(AgendaItem::Inform))
            .collect();

        let state = SimulatorState {
            goal: goal.clone(),
            agenda,
            informed,
            fulfilled: BTreeMap::new(),
            turn: 0,
            done: false,
            success: false,
        };
        (state, act)
    }

    pub fn step(&mut self, state: &mut SimulatorState, action: &AgentAction) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::Protocol("step after the dialogue ended".into()));
        }
        state.turn += 1;

        let user_act = match &action.kind {
            ActionKind::Close => {
                state.done = true;
                state.success = self.judge_success(state);
                DialogueAct::user("close")
            }
            ActionKind::Greet => self.peek_agenda(state),
            ActionKind::Request(slot) => match state.goal.inform_slots.get(slot) {
                Some(value) => {
                    let act = DialogueAct::user_inform(slot, value);
                    state.informed.insert(slot.clone());
                    state
                        .agenda
                        .retain(|item| !matches!(item, AgendaItem::Inform(s) if s == slot));
                    act
                }
                None => DialogueAct::user_inform(slot, DONTCARE),
            },
            ActionKind::Inform(slot) => {
                let constraint = state.goal.inform_slots.get(slot);
                if state.goal.request_slots.contains(slot) {
                    match &action.value {
                        Some(value) => {
                            state.fulfilled.insert(slot.clone(), value.clone());
                            self.pop_agenda(state)
                        }
                        None => DialogueAct::user_request(slot),
                    }
                } else if let (Some(wanted), Some(offered)) = (constraint, &action.value) {
                    if wanted != offered {
                        let mut act = DialogueAct::user_inform(slot, wanted);
                        act.intent = "deny".into();
                        state.informed.insert(slot.clone());
                        act
                    } else {
                        self.pop_agenda(state)
                    }
                } else {
                    self.pop_agenda(state)
                }
            }
        };

        if !state.done && state.turn >= self.n_max_turns {
            state.done = true;
            state.success = false;
        }
        let reward = if !state.done {
            self.rewards.ongoing
        } else if state.success {
            self.rewards.positive
        } else {
            self.rewards.negative
        };
        Ok(StepOutcome {
            user_act,
            reward,
            done: state.done,
            success: state.success,
        })
    }

    fn drop_stale(state: &mut SimulatorState) {
        while let Some(item) = state.agenda.last() {
            let stale = match item {
                AgendaItem::Inform(s) => state.informed.contains(s),
                AgendaItem::Request(s) => state.fulfilled.contains_key(s),
            };
            if !stale {
                break;
            }
            state.agenda.pop();
        }
    }

    fn act_for(&self, state: &SimulatorState, item: &AgendaItem) -> DialogueAct {
        match item {
            AgendaItem::Inform(s) => DialogueAct::user_inform(s, &state.goal.inform_slots[s]),
            AgendaItem::Request(s) => DialogueAct::user_request(s),
        }
    }

    /// Act for an empty agenda: ask for a missing answer, or signal the end.
    fn fallback(&self, state: &SimulatorState) -> DialogueAct {
        self.canonical(state.goal.request_slots.iter())
            .into_iter()
            .find(|s| !state.fulfilled.contains_key(s))
            .map(|s| DialogueAct::user_request(&s))
            .unwrap_or_else(|| DialogueAct::user("close"))
    }

    fn pop_agenda(&self, state: &mut SimulatorState) -> DialogueAct {
        Self::drop_stale(state);
        match state.agenda.pop() {
            Some(item) => {
                if let AgendaItem::Inform(s) = &item {
                    state.informed.insert(s.clone());
                }
                self.act_for(state, &item)
            }
            None => self.fallback(state),
        }
    }

    fn peek_agenda(&self, state: &mut SimulatorState) -> DialogueAct {
        Self::drop_stale(state);
        match state.agenda.last() {
            Some(item) => self.act_for(state, item),
            None => self.fallback(state),
        }
    }

    /// Every request answered, and the answers together with the
    /// constraints describe at least one knowledge-base record.
    pub fn judge_success(&self, state: &SimulatorState) -> bool {
        judge_success(&self.kb, state)
    }
}

pub fn judge_success(kb: &KnowledgeBase, state: &SimulatorState) -> bool {
    if !state.goal.request_slots.iter().all(|s| state.fulfilled.contains_key(s)) {
        return false;
    }
    let mut assignment = state.goal.inform_slots.clone();
    for (slot, value) in &state.fulfilled {
        assignment.insert(slot.clone(), value.clone());
    }
    kb.count(&assignment).map(|n| n >= 1).unwrap_or(false)
}
