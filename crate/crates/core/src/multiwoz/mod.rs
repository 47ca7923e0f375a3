//! Slot-filling dialogue states as dataflow programs: conversion, execution
//! back to states, and state-tracking metrics.

mod convert;
mod metrics;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{FunctionDef, FunctionKind, Param, RecordType, Registry, Return};
use crate::graph::{Label, Origin};
use crate::program::is_identifier;
use crate::types::TypeTag;

pub use convert::{convert_dialogue, execute_to_state, refer_resolutions, state_from_value, ConvertError, Converted};
pub use metrics::{score, LengthMismatch, Metrics};
pub use synth::{synthesize, SynthOptions};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Invalid(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown slot {slot:?} in domain {domain:?}")]
    UnknownSlot { domain: String, slot: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSchema {
    pub name: String,
    /// Nominal type of the slot's values. Untyped slots hold plain strings.
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub value_type: Option<String>,
    /// Example values, used by the synthetic generator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

impl SlotSchema {
    /// Keyword under which the slot appears in programs.
    pub fn keyword(&self) -> String {
        keyword_for(&self.name)
    }
}

pub fn keyword_for(slot: &str) -> String {
    slot.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub slots: Vec<SlotSchema>,
}

impl DomainSchema {
    pub fn slot(&self, name: &str) -> Option<&SlotSchema> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slot_by_keyword(&self, keyword: &str) -> Option<&SlotSchema> {
        self.slots.iter().find(|s| s.keyword() == keyword)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub domains: Vec<DomainSchema>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let invalid = |m: String| Err(SchemaError::Invalid(m));
        let library = Registry::standard();
        let mut names = BTreeSet::new();
        let mut types = BTreeSet::new();
        for d in &self.domains {
            if !names.insert(&d.name) {
                return invalid(format!("duplicate domain {:?}", d.name));
            }
            if !is_type_name(&d.type_name) || library.record(&d.type_name).is_some() || !types.insert(&d.type_name) {
                return invalid(format!("domain type {:?} must be a fresh capitalized identifier", d.type_name));
            }
            let mut keywords = BTreeSet::new();
            for s in &d.slots {
                let kw = s.keyword();
                if !is_identifier(&kw) || !keywords.insert(kw.clone()) {
                    return invalid(format!("slot {:?} of {:?} does not give a unique keyword", s.name, d.name));
                }
                if let Some(t) = &s.value_type {
                    if !is_type_name(t) || library.record(t).is_some() || library.function(t).is_some() {
                        return invalid(format!("slot type {t:?} must be a fresh capitalized identifier"));
                    }
                }
            }
        }
        for d in &self.domains {
            for s in &d.slots {
                if s.value_type.as_ref().is_some_and(|t| types.contains(t)) {
                    return invalid(format!("slot type {:?} clashes with a domain type", s.value_type));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Result<&DomainSchema, SchemaError> {
        self.domains
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| SchemaError::UnknownDomain(name.to_string()))
    }

    pub fn domain_by_type(&self, type_name: &str) -> Option<&DomainSchema> {
        self.domains.iter().find(|d| d.type_name == type_name)
    }

    pub fn slot(&self, domain: &str, slot: &str) -> Result<&SlotSchema, SchemaError> {
        self.domain(domain)?.slot(slot).ok_or_else(|| SchemaError::UnknownSlot {
            domain: domain.to_string(),
            slot: slot.to_string(),
        })
    }

    /// Position of a domain in declaration order.
    pub fn domain_index(&self, name: &str) -> usize {
        self.domains.iter().position(|d| d.name == name).unwrap_or(usize::MAX)
    }

    fn value_types(&self) -> BTreeSet<&str> {
        self.domains
            .iter()
            .flat_map(|d| d.slots.iter().filter_map(|s| s.value_type.as_deref()))
            .collect()
    }

    /// Standard library plus the schema's record types and `find`.
    pub fn registry(&self) -> Registry {
        let mut r = Registry::standard();
        for t in self.value_types() {
            r.register_record(RecordType::new(t, vec![("value", TypeTag::named("String"))]))
                .expect("validated schema");
        }
        for d in &self.domains {
            let fields: Vec<(String, TypeTag)> = d
                .slots
                .iter()
                .map(|s| (s.keyword(), TypeTag::named(s.value_type.as_deref().unwrap_or("String"))))
                .collect();
            r.register_record(RecordType::new(
                &d.type_name,
                fields.iter().map(|(k, t)| (k.as_str(), t.clone())).collect(),
            ))
            .expect("validated schema");
        }
        r.register(FunctionDef::new(
            "find",
            vec![Param::new("constraints", TypeTag::constraint(TypeTag::Any)).variadic()],
            TypeTag::list(TypeTag::constraint(TypeTag::Any)),
            FunctionKind::Pure,
            |inv| {
                let args = inv.arg_nodes("constraints").iter().map(|n| (None, *n)).collect();
                let provenance = inv.provenance(Origin::EvaluationResult);
                let list = inv
                    .graph
                    .add_node(Label::List, args, provenance)
                    .map_err(|e| crate::evaluator::ExceptionValue::new("GraphError", e.to_string()))?;
                Ok(Return::Node(list))
            },
        ))
        .expect("find is not a library name");
        r
    }
}

fn is_type_name(s: &str) -> bool {
    is_identifier(s) && s.starts_with(|c: char| c.is_ascii_uppercase())
}

/// Active slot values, keyed by domain then slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<[String; 3]>", into = "Vec<[String; 3]>")]
pub struct BeliefState {
    slots: BTreeMap<String, BTreeMap<String, String>>,
}

impl From<Vec<[String; 3]>> for BeliefState {
    fn from(triples: Vec<[String; 3]>) -> Self {
        let mut s = BeliefState::default();
        for [d, k, v] in triples {
            s.insert(d, k, v);
        }
        s
    }
}

impl From<BeliefState> for Vec<[String; 3]> {
    fn from(s: BeliefState) -> Self {
        s.triples().map(|(d, k, v)| [d.to_string(), k.to_string(), v.to_string()]).collect()
    }
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: impl Into<String>, slot: impl Into<String>, value: impl Into<String>) {
        self.slots.entry(domain.into()).or_default().insert(slot.into(), value.into());
    }

    pub fn remove(&mut self, domain: &str, slot: &str) {
        if let Some(d) = self.slots.get_mut(domain) {
            d.remove(slot);
            if d.is_empty() {
                self.slots.remove(domain);
            }
        }
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.slots.get(domain)?.get(slot).map(String::as_str)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn domain(&self, domain: &str) -> Option<&BTreeMap<String, String>> {
        self.slots.get(domain)
    }

    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.slots
            .iter()
            .flat_map(|(d, m)| m.iter().map(move |(k, v)| (d.as_str(), k.as_str(), v.as_str())))
    }

    pub fn len(&self) -> usize {
        self.slots.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub utterance: String,
    pub state: BeliefState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDialogue {
    pub dialogue_id: String,
    pub turns: Vec<AnnotatedTurn>,
}

impl AnnotatedDialogue {
    pub fn states(&self) -> Vec<BeliefState> {
        self.turns.iter().map(|t| t.state.clone()).collect()
    }
}

/// Reads one dialogue per line.
pub fn read_dialogues(text: &str) -> Result<Vec<AnnotatedDialogue>, SchemaError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(SchemaError::from))
        .collect()
}

pub fn load_dialogues(path: impl AsRef<Path>) -> Result<Vec<AnnotatedDialogue>, SchemaError> {
    read_dialogues(&std::fs::read_to_string(path)?)
}

pub fn write_dialogues(dialogues: &[AnnotatedDialogue]) -> String {
    dialogues
        .iter()
        .map(|d| serde_json::to_string(d).expect("dialogues serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SCHEMA: &str = r#"{"domains": [
        {"name": "hotel", "type": "Hotel", "slots": [
            {"name": "area", "values": ["north", "south", "centre"]},
            {"name": "book day", "type": "Day", "values": ["monday", "friday"]},
            {"name": "name", "values": ["acorn guest house", "the lensfield"]}]},
        {"name": "train", "type": "Train", "slots": [
            {"name": "day", "type": "Day", "values": ["monday", "friday"]},
            {"name": "destination", "values": ["cambridge", "ely"]}]}]}"#;

    #[test]
    fn schema_validation() {
        let s = Schema::from_json(SCHEMA).unwrap();
        assert_eq!(s.slot("hotel", "book day").unwrap().keyword(), "book_day");
        assert!(matches!(s.slot("hotel", "stars"), Err(SchemaError::UnknownSlot { .. })));
        assert!(matches!(s.domain("taxi"), Err(SchemaError::UnknownDomain(_))));
        let clash = SCHEMA.replacen("\"type\": \"Day\"", "\"type\": \"Train\"", 1);
        assert!(matches!(Schema::from_json(&clash), Err(SchemaError::Invalid(_))));
        let library = SCHEMA.replace("\"type\": \"Train\"", "\"type\": \"Event\"");
        assert!(matches!(Schema::from_json(&library), Err(SchemaError::Invalid(_))));
    }

    #[test]
    fn belief_state_serializes_as_triples() {
        let mut s = BeliefState::new();
        s.insert("hotel", "area", "north");
        s.insert("train", "day", "friday");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"[["hotel","area","north"],["train","day","friday"]]"#);
        assert_eq!(serde_json::from_str::<BeliefState>(&json).unwrap(), s);
        s.remove("train", "day");
        assert_eq!(s.domains().collect::<Vec<_>>(), ["hotel"]);
    }
}
