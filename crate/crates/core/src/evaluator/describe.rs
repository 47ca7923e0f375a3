use chrono::Datelike;

use crate::graph::DataflowGraph;
use crate::library::time::{casual_time, clock_text, date_from_value, datetime_from_value, minutes_from_value, month_name, ordinal, time_from_value};
use crate::types::month_index;
use crate::value::{read_value, Value};

use super::{ExceptionValue, Outcome};

/// Deterministic agent response for a turn outcome.
pub fn describe_outcome(outcome: &Outcome, graph: &DataflowGraph) -> String {
    match outcome {
        Outcome::Value(n) => match read_value(graph, *n) {
            Ok(v) => render_value(&v),
            Err(e) => format!("({e})"),
        },
        Outcome::Raised(e) => describe_exception(e),
    }
}

fn describe_exception(e: &ExceptionValue) -> String {
    let path = e.path.as_ref().map(|p| p.to_string());
    match e.kind.as_str() {
        "InvalidDateException" => {
            let month = e
                .detail("month")
                .and_then(|m| match m {
                    Value::Enum(s) | Value::Str(s) => month_index(s).map(|i| month_name(i as u32 + 1)),
                    _ => None,
                })
                .unwrap_or("that month");
            match e.detail("day").and_then(Value::as_num) {
                Some(d) => format!("There is no {} of {month}. Did you mean some other date?", ordinal(d as i64)),
                None => "That date does not exist. Did you mean some other date?".to_string(),
            }
        }
        "UnderconstrainedException" => match path.as_deref() {
            Some("name") => "What should it be called?".to_string(),
            Some("start") => "When should it start?".to_string(),
            Some(p) => format!("What should the {p} be?"),
            None => "I need more details to do that.".to_string(),
        },
        "FenceException" => match e.detail("category").and_then(Value::text).as_deref() {
            Some("navigation") => "I can't answer questions about transit.".to_string(),
            Some(c) => format!("I can't answer questions about {c}."),
            None => "I can't help with that.".to_string(),
        },
        "EmptyQueryResult" => "I couldn't find anything matching that.".to_string(),
        "EmptyRefer" => "I'm not sure what you are referring to.".to_string(),
        "NoPendingProposal" => "There is nothing waiting to be confirmed.".to_string(),
        _ => format!("Sorry, something went wrong ({e})."),
    }
}

/// Plain-text rendering of a value.
pub fn render_value(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        Value::Num(_) | Value::Enum(_) => v.text().unwrap_or_default(),
        Value::List(items) => items.iter().map(render_value).collect::<Vec<_>>().join(", "),
        Value::Record { ctor, .. } => render_record(ctor, v).unwrap_or_else(|| v.canonical()),
        Value::Constraint(_) | Value::Missing(_) => v.canonical(),
    }
}

fn render_record(ctor: &str, v: &Value) -> Option<String> {
    match ctor {
        "DateTime" => {
            let dt = datetime_from_value(v)?;
            Some(format!("{} {}, {} at {}", month_name(dt.month()), dt.day(), dt.year(), casual_time(dt.time())))
        }
        "Date" => {
            let d = date_from_value(v)?;
            Some(format!("{} {}, {}", month_name(d.month()), d.day(), d.year()))
        }
        "Time" => Some(casual_time(time_from_value(v)?)),
        "Duration" => {
            let m = minutes_from_value(v)?;
            Some(if m % 1440 == 0 && m != 0 {
                format!("{} days", m / 1440)
            } else {
                format!("{m} minutes")
            })
        }
        "Event" => {
            let name = v.field("name")?.text()?;
            let start = render_value(&v.field("start")?);
            Some(format!("{name} on {start}"))
        }
        "Person" | "Place" => v.field("name").or_else(|| v.field("keyphrase"))?.text(),
        "WeatherReport" => {
            let place = v.field("place")?.text()?;
            let condition = v.field("condition")?.text()?;
            let high = v.field("high")?.text()?;
            let low = v.field("low")?.text()?;
            let from = clock_text(time_from_value(&v.field("window_start")?)?);
            let to = clock_text(time_from_value(&v.field("window_end")?)?);
            Some(format!(
                "It will be {condition} with a high of {high} °F and a low of {low} °F in {place} between {from} and {to}."
            ))
        }
        _ => v.text(),
    }
}
