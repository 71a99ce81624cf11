//! Domain schemas, user goals, the agent action catalog and the unified
//! source/target space that fixes every slot and action index.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_json, Error, Result};

/// Value a simulated user gives for a slot it has no constraint on.
pub const DONTCARE: &str = "dontcare";

/// Intents every schema must declare.
pub const REQUIRED_INTENTS: [&str; 5] = ["inform", "request", "thanks", "deny", "close"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    pub slots: Vec<String>,
    pub user_intents: Vec<String>,
    /// Knowledge-base file. Relative paths are resolved against the schema
    /// file's directory by [`DomainSchema::load`].
    #[serde(rename = "kb")]
    pub kb_ref: PathBuf,
}

impl DomainSchema {
    pub fn load(path: &Path) -> Result<Self> {
        let mut schema: DomainSchema = read_json(path)?;
        if schema.kb_ref.is_relative() {
            if let Some(dir) = path.parent() {
                schema.kb_ref = dir.join(&schema.kb_ref);
            }
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::Schema(format!("domain `{}` has no slots", self.name)));
        }
        let mut seen = HashSet::new();
        for slot in &self.slots {
            if slot.is_empty() {
                return Err(Error::Schema(format!("domain `{}` has an empty slot name", self.name)));
            }
            if !seen.insert(slot.as_str()) {
                return Err(Error::Schema(format!(
                    "domain `{}` declares slot `{slot}` twice",
                    self.name
                )));
            }
        }
        for intent in REQUIRED_INTENTS {
            if !self.user_intents.iter().any(|i| i == intent) {
                return Err(Error::Schema(format!(
                    "domain `{}` is missing required intent `{intent}`",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.slots.iter().any(|s| s == slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub inform_slots: BTreeMap<String, String>,
    pub request_slots: BTreeSet<String>,
}

impl UserGoal {
    pub fn check(&self, schema: &DomainSchema) -> std::result::Result<(), String> {
        if self.request_slots.is_empty() {
            return Err("request_slots is empty".into());
        }
        for (slot, value) in &self.inform_slots {
            if !schema.has_slot(slot) {
                return Err(format!("unknown inform slot `{slot}`"));
            }
            if value.is_empty() {
                return Err(format!("inform slot `{slot}` has an empty value"));
            }
        }
        for slot in &self.request_slots {
            if !schema.has_slot(slot) {
                return Err(format!("unknown request slot `{slot}`"));
            }
            if self.inform_slots.contains_key(slot) {
                return Err(format!("slot `{slot}` is both informed and requested"));
            }
        }
        Ok(())
    }
}

/// Reads a goal file. Every record is checked against `schema`; failures name
/// the offending record index.
pub fn load_goals(path: &Path, schema: &DomainSchema) -> Result<Vec<UserGoal>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let raw: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    raw.into_iter()
        .enumerate()
        .map(|(index, value)| {
            let record_err = |message: String| Error::Record {
                path: path.to_path_buf(),
                index,
                message,
            };
            let goal: UserGoal = serde_json::from_value(value).map_err(|e| record_err(e.to_string()))?;
            goal.check(schema).map_err(record_err)?;
            Ok(goal)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slot", rename_all = "lowercase")]
pub enum ActionKind {
    Greet,
    Close,
    Request(String),
    Inform(String),
}

impl ActionKind {
    pub fn slot(&self) -> Option<&str> {
        match self {
            ActionKind::Request(s) | ActionKind::Inform(s) => Some(s),
            ActionKind::Greet | ActionKind::Close => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Greet => write!(f, "greet"),
            ActionKind::Close => write!(f, "close"),
            ActionKind::Request(s) => write!(f, "request({s})"),
            ActionKind::Inform(s) => write!(f, "inform({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    /// Filled from the knowledge base for informs; always `None` otherwise.
    pub value: Option<String>,
}

impl AgentAction {
    pub fn new(kind: ActionKind) -> Self {
        AgentAction { kind, value: None }
    }

    pub fn greet() -> Self {
        Self::new(ActionKind::Greet)
    }

    pub fn close() -> Self {
        Self::new(ActionKind::Close)
    }

    pub fn request(slot: impl Into<String>) -> Self {
        Self::new(ActionKind::Request(slot.into()))
    }

    pub fn inform(slot: impl Into<String>, value: Option<String>) -> Self {
        AgentAction {
            kind: ActionKind::Inform(slot.into()),
            value,
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.value) {
            (ActionKind::Inform(s), Some(v)) => write!(f, "inform({s}={v})"),
            (kind, _) => write!(f, "{kind}"),
        }
    }
}

/// Merged slot/intent/action inventory shared by a source and a target
/// domain. Slots are ordered as common, source-only, target-only, each
/// group sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifiedSpace {
    pub slots: Vec<String>,
    pub intents: Vec<String>,
    pub actions: Vec<ActionKind>,
    pub common_slot_indices: Vec<usize>,
    pub common_action_indices: Vec<usize>,
    pub manifest_digest: u64,
    slot_index: HashMap<String, usize>,
}

impl UnifiedSpace {
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.slot_index.get(slot).copied()
    }

    pub fn intent_index(&self, intent: &str) -> Option<usize> {
        self.intents.iter().position(|i| i == intent)
    }

    pub fn digest_hex(&self) -> String {
        format!("{:016x}", self.manifest_digest)
    }

    /// Index of `slot`'s request action; the inform action follows it.
    pub fn request_action_index(slot_position: usize) -> usize {
        2 + 2 * slot_position
    }
}

pub fn build_unified_space(source: &DomainSchema, target: &DomainSchema) -> Result<UnifiedSpace> {
    source.validate()?;
    target.validate()?;

    for (a, b) in [(source, target), (target, source)] {
        for slot in &a.slots {
            if b.user_intents.iter().chain(&a.user_intents).any(|i| i == slot) {
                return Err(Error::SchemaConflict(format!(
                    "`{slot}` is declared as a slot in `{}` and as an intent",
                    a.name
                )));
            }
        }
    }

    let src: BTreeSet<&String> = source.slots.iter().collect();
    let tgt: BTreeSet<&String> = target.slots.iter().collect();
    let common: Vec<String> = src.intersection(&tgt).map(|s| s.to_string()).collect();
    let source_only: Vec<String> = src.difference(&tgt).map(|s| s.to_string()).collect();
    let target_only: Vec<String> = tgt.difference(&src).map(|s| s.to_string()).collect();

    let common_slot_indices: Vec<usize> = (0..common.len()).collect();
    let slots: Vec<String> = common.into_iter().chain(source_only).chain(target_only).collect();

    let mut intents: Vec<String> = Vec::new();
    for intent in source.user_intents.iter().chain(&target.user_intents) {
        if !intents.contains(intent) {
            intents.push(intent.clone());
        }
    }

    let mut actions = vec![ActionKind::Greet, ActionKind::Close];
    for slot in &slots {
        actions.push(ActionKind::Request(slot.clone()));
        actions.push(ActionKind::Inform(slot.clone()));
    }

    let mut common_action_indices = vec![0, 1];
    for &k in &common_slot_indices {
        let r = UnifiedSpace::request_action_index(k);
        common_action_indices.extend([r, r + 1]);
    }

    let manifest_digest = manifest_digest(&slots, &intents, &actions, &common_slot_indices);
    let slot_index = slots.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

    Ok(UnifiedSpace {
        slots,
        intents,
        actions,
        common_slot_indices,
        common_action_indices,
        manifest_digest,
        slot_index,
    })
}

fn manifest_digest(slots: &[String], intents: &[String], actions: &[ActionKind], common: &[usize]) -> u64 {
    let mut hasher = Sha256::new();
    for (tag, items) in [
        ("slots", slots.iter().map(String::as_str).collect::<Vec<_>>()),
        ("intents", intents.iter().map(String::as_str).collect()),
    ] {
        hasher.update(tag.as_bytes());
        for item in items {
            hasher.update((item.len() as u64).to_le_bytes());
            hasher.update(item.as_bytes());
        }
    }
    hasher.update(b"actions");
    for action in actions {
        let text = action.to_string();
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
    }
    hasher.update(b"common");
    for &i in common {
        hasher.update((i as u64).to_le_bytes());
    }
    let bytes = hasher.finalize();
    u64::from_be_bytes(bytes[..8].try_into().expect("sha256 yields 32 bytes"))
}

pub fn action_index(space: &UnifiedSpace, action: &AgentAction) -> Result<usize> {
    match &action.kind {
        ActionKind::Greet => Ok(0),
        ActionKind::Close => Ok(1),
        ActionKind::Request(slot) | ActionKind::Inform(slot) => {
            let k = space.slot_index(slot).ok_or_else(|| Error::OutOfSpace(slot.clone()))?;
            let base = UnifiedSpace::request_action_index(k);
            Ok(if matches!(action.kind, ActionKind::Request(_)) {
                base
            } else {
                base + 1
            })
        }
    }
}

pub fn decode_action(space: &UnifiedSpace, index: usize) -> Result<AgentAction> {
    space
        .actions
        .get(index)
        .cloned()
        .map(AgentAction::new)
        .ok_or(Error::IndexOutOfRange {
            index,
            len: space.actions.len(),
        })
}
