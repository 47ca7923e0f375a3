//! Calendar, people, places and weather functions over an in-memory world.

mod calendar;
pub mod time;

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{ExceptionValue, RecordType, Registry, RegistryError};
use crate::types::TypeTag;
use crate::value::Value;

pub use calendar::datetime_from_spec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub id: u64,
    pub name: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    #[serde(default)]
    pub attendees: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRow {
    pub name: String,
    #[serde(default)]
    pub email: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceRow {
    pub keyphrase: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRow {
    pub place: String,
    pub date: NaiveDate,
    pub condition: String,
    pub high: f64,
    pub low: f64,
    pub window_start: NaiveTime,
    pub window_end: NaiveTime,
}

/// An event created this dialogue but not yet on the calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub event: EventRow,
    #[serde(default)]
    pub awaiting_confirmation: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub clock: NaiveDateTime,
    #[serde(default)]
    pub events: Vec<EventRow>,
    #[serde(default)]
    pub people: Vec<PersonRow>,
    #[serde(default)]
    pub places: Vec<PlaceRow>,
    #[serde(default)]
    pub weather: Vec<WeatherRow>,
    #[serde(default)]
    pub pending: Vec<Proposal>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid fixture: {0}")]
    Invalid(String),
}

impl WorldState {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let world: WorldState = serde_json::from_str(text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world state serializes")
    }

    fn validate(&self) -> Result<(), FixtureError> {
        let mut ids = std::collections::HashSet::new();
        for e in self.events.iter().chain(self.pending.iter().map(|p| &p.event)) {
            if e.end < e.start {
                return Err(FixtureError::Invalid(format!("event {} ends before it starts", e.id)));
            }
            if !ids.insert(e.id) {
                return Err(FixtureError::Invalid(format!("duplicate event id {}", e.id)));
            }
        }
        Ok(())
    }

    pub fn next_event_id(&self) -> u64 {
        self.events
            .iter()
            .chain(self.pending.iter().map(|p| &p.event))
            .map(|e| e.id + 1)
            .max()
            .unwrap_or(1)
    }

    pub fn person_value(&self, name: &str) -> Value {
        let email = self
            .people
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .map_or(String::new(), |p| p.email.clone());
        Value::record("Person", vec![("name", Value::str(name)), ("email", Value::str(email))])
    }

    pub fn event_value(&self, e: &EventRow) -> Value {
        let mut fields = vec![
            ("name", Value::str(e.name.clone())),
            ("start", time::datetime_value(e.start)),
            ("end", time::datetime_value(e.end)),
            ("attendees", Value::List(e.attendees.iter().map(|a| self.person_value(a)).collect())),
        ];
        if let Some(loc) = &e.location {
            fields.push(("location", keyphrase_value(loc)));
        }
        fields.push(("id", Value::Num(e.id as f64)));
        Value::record("Event", fields)
    }
}

pub fn keyphrase_value(text: &str) -> Value {
    Value::Record {
        ctor: "LocationKeyphrase".to_string(),
        fields: vec![(None, Value::str(text))],
    }
}

fn invalid_date(month: &Value, day: &Value) -> ExceptionValue {
    ExceptionValue::new("InvalidDateException", format!("no day {} in month {}", day.canonical(), month.canonical()))
        .with_detail("month", month.clone())
        .with_detail("day", day.clone())
}

fn check_month_day(year: Option<&Value>, month: Option<&Value>, day: Option<&Value>) -> Result<(), ExceptionValue> {
    let (Some(m), Some(d)) = (month, day) else {
        return Ok(());
    };
    let month_no = match m {
        Value::Enum(s) | Value::Str(s) => crate::types::month_index(s).map(|i| i as u32 + 1),
        Value::Num(n) => Some(*n as u32),
        _ => None,
    };
    let (Some(mn), Some(dn)) = (month_no, d.as_num()) else {
        return Ok(());
    };
    let y = year.and_then(Value::as_num).map(|y| y as i32);
    if dn < 1.0 || dn.fract() != 0.0 || !time::valid_month_day(y, mn, dn as u32) {
        return Err(invalid_date(m, d));
    }
    Ok(())
}

fn record_types() -> Vec<RecordType> {
    let t = TypeTag::named;
    vec![
        RecordType::new("DateTime", vec![("date", t("Date")), ("time", t("Time"))]),
        RecordType::new("Date", vec![("year", t("Number")), ("month", t("Month")), ("day", t("Number"))]).with_validator(|v| {
            check_month_day(v.field("year").as_ref(), v.field("month").as_ref(), v.field("day").as_ref())
        }),
        RecordType::new("Time", vec![("hour", t("Number")), ("minute", t("Number"))]).with_validator(|v| {
            let ok = time::time_from_value(v).is_some();
            if ok {
                Ok(())
            } else {
                Err(ExceptionValue::new("InvalidTimeException", format!("no such time {}", v.canonical())))
            }
        }),
        RecordType::new("Duration", vec![("minutes", t("Number"))]),
        RecordType::new(
            "Event",
            vec![
                ("name", t("String")),
                ("start", t("DateTime")),
                ("end", t("DateTime")),
                ("attendees", TypeTag::list(t("Person"))),
                ("location", t("LocationKeyphrase")),
                ("id", t("Number")),
            ],
        ),
        RecordType::new("Person", vec![("name", t("String")), ("email", t("String"))]),
        RecordType::new("Place", vec![("keyphrase", t("String")), ("latitude", t("Number")), ("longitude", t("Number"))]),
        RecordType::new(
            "WeatherReport",
            vec![
                ("place", t("String")),
                ("date", t("Date")),
                ("condition", t("String")),
                ("high", t("Number")),
                ("low", t("Number")),
                ("window_start", t("Time")),
                ("window_end", t("Time")),
            ],
        ),
        RecordType::new("LocationKeyphrase", vec![("text", t("String"))]),
    ]
}

/// Registers the record types, constraint validators and library functions.
pub fn install(registry: &mut Registry) -> Result<(), RegistryError> {
    for r in record_types() {
        registry.register_record(r)?;
    }
    registry.register_constraint_validator("DateTime", |c| {
        for c in std::iter::once(c).chain(nested_conjuncts(c)) {
            check_month_day(c.required("year"), c.required("month"), c.required("day"))?;
        }
        Ok(())
    });
    calendar::install(registry)
}

fn nested_conjuncts(c: &crate::constraints::Constraint) -> Vec<&crate::constraints::Constraint> {
    let mut out = vec![];
    for clause in &c.clauses {
        if let crate::constraints::Clause::And(cs) = clause {
            for inner in cs {
                out.push(inner);
                out.extend(nested_conjuncts(inner));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip_and_validation() {
        let text = r#"{"clock": "2020-04-20T08:00:00",
            "events": [{"id": 1, "name": "a", "start": "2020-04-20T09:00:00", "end": "2020-04-20T09:30:00"}]}"#;
        let w = WorldState::from_json(text).unwrap();
        assert_eq!(w.next_event_id(), 2);
        assert_eq!(WorldState::from_json(&w.to_json()).unwrap(), w);
        let bad = text.replace("09:30", "08:30");
        assert!(matches!(WorldState::from_json(&bad), Err(FixtureError::Invalid(_))));
    }

    #[test]
    fn date_validation() {
        let feb = Value::Enum("feb".into());
        assert!(check_month_day(None, Some(&feb), Some(&Value::Num(30.0))).is_err());
        assert!(check_month_day(None, Some(&feb), Some(&Value::Num(28.0))).is_ok());
        assert!(check_month_day(Some(&Value::Num(2021.0)), Some(&feb), Some(&Value::Num(29.0))).is_err());
        assert!(check_month_day(Some(&Value::Num(2020.0)), Some(&feb), Some(&Value::Num(29.0))).is_ok());
    }
}
