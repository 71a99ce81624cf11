//! Read-only knowledge base answering slot constraint queries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainSchema, DONTCARE};
use crate::error::{read_json, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KbRecord {
    pub values: BTreeMap<String, String>,
}

impl KbRecord {
    fn satisfies(&self, constraints: &[(&str, &str)]) -> bool {
        constraints
            .iter()
            .all(|(slot, value)| self.values.get(*slot).is_some_and(|v| v == value))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbQueryResult {
    /// Positions of the matching records, in file order.
    pub matching_records: Vec<usize>,
    pub match_count: usize,
    pub per_slot_available: BTreeMap<String, bool>,
}

impl KbQueryResult {
    pub fn available(&self, slot: &str) -> bool {
        self.per_slot_available.get(slot).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    slots: Vec<String>,
    records: Vec<KbRecord>,
}

impl KnowledgeBase {
    pub fn new(schema: &DomainSchema, records: Vec<KbRecord>) -> Result<Self> {
        for (index, record) in records.iter().enumerate() {
            for (slot, value) in &record.values {
                let message = if !schema.has_slot(slot) {
                    format!("unknown slot `{slot}`")
                } else if value.is_empty() {
                    format!("slot `{slot}` has an empty value")
                } else {
                    continue;
                };
                return Err(Error::Record {
                    path: schema.kb_ref.clone(),
                    index,
                    message,
                });
            }
        }
        Ok(KnowledgeBase {
            slots: schema.slots.clone(),
            records,
        })
    }

    /// Loads the KB file referenced by `schema`.
    pub fn load(schema: &DomainSchema) -> Result<Self> {
        Self::load_from(&schema.kb_ref, schema)
    }

    pub fn load_from(path: &Path, schema: &DomainSchema) -> Result<Self> {
        let records: Vec<KbRecord> = read_json(path)?;
        let mut schema = schema.clone();
        schema.kb_ref = path.to_path_buf();
        Self::new(&schema, records)
    }

    pub fn records(&self) -> &[KbRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.slots.iter().any(|s| s == slot)
    }

    fn effective<'a>(&self, constraints: &'a BTreeMap<String, String>) -> Result<Vec<(&'a str, &'a str)>> {
        let mut out = Vec::with_capacity(constraints.len());
        for (slot, value) in constraints {
            if value == DONTCARE {
                continue;
            }
            if !self.has_slot(slot) {
                return Err(Error::UnknownSlot(slot.clone()));
            }
            out.push((slot.as_str(), value.as_str()));
        }
        Ok(out)
    }

    pub fn query(&self, constraints: &BTreeMap<String, String>) -> Result<KbQueryResult> {
        let constraints = self.effective(constraints)?;
        let matching_records: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.satisfies(&constraints))
            .map(|(i, _)| i)
            .collect();
        let per_slot_available = self
            .slots
            .iter()
            .map(|slot| {
                let present = matching_records
                    .iter()
                    .any(|&i| self.records[i].values.contains_key(slot));
                (slot.clone(), present)
            })
            .collect();
        Ok(KbQueryResult {
            match_count: matching_records.len(),
            matching_records,
            per_slot_available,
        })
    }

    /// Value of `slot` in the first matching record that carries it.
    pub fn suggest(&self, constraints: &BTreeMap<String, String>, slot: &str) -> Result<Option<String>> {
        if !self.has_slot(slot) {
            return Err(Error::UnknownSlot(slot.to_string()));
        }
        let constraints = self.effective(constraints)?;
        Ok(self
            .records
            .iter()
            .filter(|r| r.satisfies(&constraints))
            .find_map(|r| r.values.get(slot).cloned()))
    }

    /// Number of records matching `constraints`, without building the
    /// per-slot summary.
    pub fn count(&self, constraints: &BTreeMap<String, String>) -> Result<usize> {
        let constraints = self.effective(constraints)?;
        Ok(self.records.iter().filter(|r| r.satisfies(&constraints)).count())
    }
}
