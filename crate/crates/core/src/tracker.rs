//! Rule-based dialogue state tracker and the fixed-length state embedding.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use crate::domain::{action_index, AgentAction, UnifiedSpace};
use crate::kb::{KbQueryResult, KnowledgeBase};
use crate::simulator::DialogueAct;

/// Cap applied to the KB match count before scaling into `[0, 1]`.
pub const KB_COUNT_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Block layout of the state embedding:
///
/// | block | width | content |
/// |---|---|---|
/// | intent | I | one-hot last user intent |
/// | user_inform | S | slots informed in the last user act |
/// | user_request | S | slots requested in the last user act |
/// | constrained | S | slots the user constrained so far |
/// | agent_request | S | slots the agent requested so far |
/// | agent_action | A | one-hot last agent action |
/// | kb_available | S | some matching KB record carries the slot |
/// | kb_count | 2 | clipped match count, no-match flag |
/// | turn | 1 | turn / n_max_turns |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_intents: usize,
    pub n_slots: usize,
    pub n_actions: usize,
}

/// Slot-indexed blocks, in layout order.
pub const SLOT_BLOCKS: [&str; 5] = [
    "user_inform",
    "user_request",
    "constrained",
    "agent_request",
    "kb_available",
];

impl FeatureLayout {
    pub fn new(space: &UnifiedSpace) -> Self {
        FeatureLayout {
            n_intents: space.intents.len(),
            n_slots: space.n_slots(),
            n_actions: space.n_actions(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_intents + 5 * self.n_slots + self.n_actions + 3
    }

    pub fn intents(&self) -> Range<usize> {
        0..self.n_intents
    }

    fn slot_block(&self, k: usize) -> Range<usize> {
        let start = self.n_intents + k * self.n_slots;
        start..start + self.n_slots
    }

    pub fn user_inform(&self) -> Range<usize> {
        self.slot_block(0)
    }

    pub fn user_request(&self) -> Range<usize> {
        self.slot_block(1)
    }

    pub fn constrained(&self) -> Range<usize> {
        self.slot_block(2)
    }

    pub fn agent_request(&self) -> Range<usize> {
        self.slot_block(3)
    }

    pub fn agent_action(&self) -> Range<usize> {
        let start = self.n_intents + 4 * self.n_slots;
        start..start + self.n_actions
    }

    pub fn kb_available(&self) -> Range<usize> {
        let start = self.agent_action().end;
        start..start + self.n_slots
    }

    pub fn kb_count(&self) -> Range<usize> {
        let start = self.kb_available().end;
        start..start + 2
    }

    pub fn turn(&self) -> usize {
        self.kb_count().end
    }

    /// Feature positions belonging to slot `k`, one per slot block.
    pub fn slot_features(&self, k: usize) -> [usize; 5] {
        [
            self.user_inform().start + k,
            self.user_request().start + k,
            self.constrained().start + k,
            self.agent_request().start + k,
            self.kb_available().start + k,
        ]
    }

    /// Positions that exist identically in every domain: intents, the KB
    /// count block and the turn feature.
    pub fn shared_features(&self) -> Vec<usize> {
        self.intents()
            .chain(self.kb_count())
            .chain(std::iter::once(self.turn()))
            .collect()
    }

    pub fn labels(&self, space: &UnifiedSpace) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.dim());
        labels.extend(space.intents.iter().map(|i| format!("intent:{i}")));
        for block in &SLOT_BLOCKS[..4] {
            labels.extend(space.slots.iter().map(|s| format!("{block}:{s}")));
        }
        labels.extend(space.actions.iter().map(|a| format!("agent_action:{a}")));
        labels.extend(space.slots.iter().map(|s| format!("kb_available:{s}")));
        labels.push("kb_count".into());
        labels.push("kb_no_match".into());
        labels.push("turn".into());
        labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub last_user_act: Option<DialogueAct>,
    pub last_agent_action: Option<AgentAction>,
    pub user_constraints_so_far: BTreeMap<String, String>,
    /// Every slot the user has asked for so far.
    pub user_requested: BTreeSet<String>,
    pub agent_requested: BTreeSet<String>,
    pub agent_informed: BTreeSet<String>,
    pub kb_snapshot: KbQueryResult,
    pub turn: usize,
}

impl TrackerState {
    pub fn new(kb: &KnowledgeBase) -> Self {
        TrackerState {
            last_user_act: None,
            last_agent_action: None,
            user_constraints_so_far: BTreeMap::new(),
            user_requested: BTreeSet::new(),
            agent_requested: BTreeSet::new(),
            agent_informed: BTreeSet::new(),
            kb_snapshot: kb.query(&BTreeMap::new()).expect("empty constraints are always valid"),
            turn: 0,
        }
    }

    /// Constraints restricted to the slots the knowledge base knows.
    pub fn kb_constraints(&self, kb: &KnowledgeBase) -> BTreeMap<String, String> {
        self.user_constraints_so_far
            .iter()
            .filter(|(slot, _)| kb.has_slot(slot))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Folds in one exchange: the agent action (if any) that preceded
    /// `user_act`, then the user act itself.
    pub fn update(&mut self, user_act: &DialogueAct, agent_action: Option<&AgentAction>, kb: &KnowledgeBase) {
        if let Some(action) = agent_action {
            match &action.kind {
                crate::domain::ActionKind::Request(s) => {
                    self.agent_requested.insert(s.clone());
                }
                crate::domain::ActionKind::Inform(s) => {
                    self.agent_informed.insert(s.clone());
                }
                _ => {}
            }
            self.last_agent_action = Some(action.clone());
            self.turn += 1;
        }
        for (slot, value) in &user_act.inform_slots {
            self.user_constraints_so_far.insert(slot.clone(), value.clone());
        }
        self.user_requested.extend(user_act.request_slots.iter().cloned());
        self.last_user_act = Some(user_act.clone());
        self.kb_snapshot = kb
            .query(&self.kb_constraints(kb))
            .expect("constraints are filtered to KB slots");
    }

    pub fn embed(&self, space: &UnifiedSpace, n_max_turns: usize) -> StateVector {
        let layout = FeatureLayout::new(space);
        let mut v = vec![0.0; layout.dim()];
        let set_slot = |block: Range<usize>, slot: &str, v: &mut Vec<f64>| {
            if let Some(k) = space.slot_index(slot) {
                v[block.start + k] = 1.0;
            }
        };

        if let Some(act) = &self.last_user_act {
            if let Some(i) = space.intent_index(&act.intent) {
                v[i] = 1.0;
            }
            for slot in act.inform_slots.keys() {
                set_slot(layout.user_inform(), slot, &mut v);
            }
            for slot in &act.request_slots {
                set_slot(layout.user_request(), slot, &mut v);
            }
        }
        for slot in self.user_constraints_so_far.keys() {
            set_slot(layout.constrained(), slot, &mut v);
        }
        for slot in &self.agent_requested {
            set_slot(layout.agent_request(), slot, &mut v);
        }
        if let Some(action) = &self.last_agent_action {
            if let Ok(a) = action_index(space, action) {
                v[layout.agent_action().start + a] = 1.0;
            }
        }
        for (slot, &available) in &self.kb_snapshot.per_slot_available {
            if available {
                set_slot(layout.kb_available(), slot, &mut v);
            }
        }
        let count = layout.kb_count().start;
        v[count] = self.kb_snapshot.match_count.min(KB_COUNT_CAP) as f64 / KB_COUNT_CAP as f64;
        v[count + 1] = if self.kb_snapshot.match_count == 0 { 1.0 } else { 0.0 };
        v[layout.turn()] = (self.turn as f64 / n_max_turns as f64).min(1.0);
        StateVector { values: v }
    }
}
