use chrono::{Duration, NaiveDateTime, NaiveTime};

use super::time::{add_minutes, date_from_value, date_value, datetime_from_value, datetime_value, duration_value, easter, minutes_from_value, time_from_value, time_value, weekday_value};
use super::{EventRow, Proposal};
use crate::constraints::{holds, Clause, CompareOp, Constraint};
use crate::evaluator::{ExceptionValue, FunctionDef, FunctionKind, Invocation, Param, Registry, RegistryError, Return};
use crate::graph::{Label, NodeId, Origin};
use crate::types::{canonical_keyword, TypeTag};
use crate::value::Value;

type Body = fn(&mut Invocation<'_>) -> Result<Return, ExceptionValue>;

fn t(name: &str) -> TypeTag {
    TypeTag::named(name)
}

fn datetime_constraint() -> Constraint {
    Constraint::typed(t("DateTime"))
}

fn p(name: &str, ty: TypeTag) -> Param {
    Param::new(name, ty)
}

pub(super) fn install(r: &mut Registry) -> Result<(), RegistryError> {
    let cdt = || TypeTag::constraint(t("DateTime"));
    let defs: Vec<(&str, Vec<Param>, TypeTag, FunctionKind, Body)> = vec![
        ("now", vec![], t("DateTime"), FunctionKind::Pure, now),
        ("today", vec![], cdt(), FunctionKind::Pure, |inv| day_offset(inv, 0)),
        ("tomorrow", vec![], cdt(), FunctionKind::Pure, |inv| day_offset(inv, 1)),
        ("dateAtTime", vec![p("date", TypeTag::Any), p("time", t("Time"))], t("DateTime"), FunctionKind::Pure, date_at_time),
        ("numberAM", vec![p("number", t("Number"))], t("Time"), FunctionKind::Pure, |inv| hour_of_day(inv, false).map(|t| Return::Value(time_value(t)))),
        ("numberPM", vec![p("number", t("Number"))], t("Time"), FunctionKind::Pure, |inv| hour_of_day(inv, true).map(|t| Return::Value(time_value(t)))),
        ("am", vec![p("number", t("Number"))], cdt(), FunctionKind::Pure, |inv| at_hour(inv, false)),
        ("pm", vec![p("number", t("Number"))], cdt(), FunctionKind::Pure, |inv| at_hour(inv, true)),
        ("morning", vec![], cdt(), FunctionKind::Pure, |_| Ok(window(6, 12))),
        ("afternoon", vec![], cdt(), FunctionKind::Pure, |_| Ok(window(12, 17))),
        ("evening", vec![], cdt(), FunctionKind::Pure, |_| Ok(window(17, 21))),
        ("after", vec![p("time", TypeTag::Any)], cdt(), FunctionKind::Pure, |inv| compare(inv, CompareOp::After)),
        ("before", vec![p("time", TypeTag::Any)], cdt(), FunctionKind::Pure, |inv| compare(inv, CompareOp::Before)),
        ("onOrAfter", vec![p("time", TypeTag::Any)], cdt(), FunctionKind::Pure, |inv| compare(inv, CompareOp::OnOrAfter)),
        ("onOrBefore", vec![p("time", TypeTag::Any)], cdt(), FunctionKind::Pure, |inv| compare(inv, CompareOp::OnOrBefore)),
        ("during", vec![p("window", cdt())], cdt(), FunctionKind::Pure, |inv| Ok(Return::Value(inv.require("window")?))),
        ("and", vec![p("constraints", TypeTag::constraint(TypeTag::Any)).variadic()], TypeTag::constraint(TypeTag::Any), FunctionKind::Pure, |inv| connective(inv, Clause::And)),
        ("or", vec![p("constraints", TypeTag::constraint(TypeTag::Any)).variadic()], TypeTag::constraint(TypeTag::Any), FunctionKind::Pure, |inv| connective(inv, Clause::Or)),
        ("not", vec![p("constraint", TypeTag::constraint(TypeTag::Any))], TypeTag::constraint(TypeTag::Any), FunctionKind::Pure, negate),
        ("+", vec![p("left", TypeTag::Any), p("right", TypeTag::Any)], TypeTag::Any, FunctionKind::Pure, |inv| arithmetic(inv, '+')),
        ("-", vec![p("left", TypeTag::Any), p("right", TypeTag::Any)], TypeTag::Any, FunctionKind::Pure, |inv| arithmetic(inv, '-')),
        ("*", vec![p("left", t("Number")), p("right", t("Number"))], t("Number"), FunctionKind::Pure, |inv| arithmetic(inv, '*')),
        ("/", vec![p("left", t("Number")), p("right", t("Number"))], t("Number"), FunctionKind::Pure, |inv| arithmetic(inv, '/')),
        ("Days", vec![p("count", t("Number"))], t("Duration"), FunctionKind::Pure, |inv| duration(inv, 1440)),
        ("Hours", vec![p("count", t("Number"))], t("Duration"), FunctionKind::Pure, |inv| duration(inv, 60)),
        ("Minutes", vec![p("count", t("Number"))], t("Duration"), FunctionKind::Pure, |inv| duration(inv, 1)),
        ("dayOfWeek", vec![p("datetime", t("DateTime"))], t("Weekday"), FunctionKind::Pure, day_of_week),
        ("start", vec![p("event", t("Event"))], t("DateTime"), FunctionKind::Pure, |inv| project(inv, "start")),
        ("end", vec![p("event", t("Event"))], t("DateTime"), FunctionKind::Pure, |inv| project(inv, "end")),
        ("attendees", vec![p("event", t("Event"))], TypeTag::list(t("Person")), FunctionKind::Pure, |inv| project(inv, "attendees")),
        ("length", vec![p("items", TypeTag::list(TypeTag::Any))], t("Number"), FunctionKind::Pure, length),
        ("findEvent", vec![p("spec", TypeTag::constraint(t("Event")))], t("Event"), FunctionKind::Effectful, find_event),
        ("findDateTime", vec![p("holiday", TypeTag::Any)], t("DateTime"), FunctionKind::Effectful, find_date_time),
        ("findPerson", vec![p("spec", TypeTag::constraint(t("Person")))], t("Person"), FunctionKind::Effectful, find_person),
        ("findPlace", vec![p("spec", TypeTag::constraint(t("Place")))], t("Place"), FunctionKind::Effectful, find_place),
        ("weatherQueryApi", vec![p("place", t("Place")), p("time", cdt())], t("WeatherReport"), FunctionKind::Effectful, weather_query),
        (
            "createEvent",
            vec![
                p("name", t("String")).optional(),
                p("start", TypeTag::Any).optional(),
                p("end", TypeTag::Any).optional(),
                p("attendees", TypeTag::Any).optional(),
                p("location", TypeTag::Any).optional(),
            ],
            t("Event"),
            FunctionKind::Effectful,
            create_event,
        ),
        ("createPreflightEventWrapper", vec![p("spec", TypeTag::constraint(t("Event")))], t("Event"), FunctionKind::Effectful, preflight),
        ("createCommitEventWrapper", vec![p("event", t("Event"))], t("Event"), FunctionKind::Effectful, commit_wrapper),
        ("confirmAndReturnAction", vec![], t("Event"), FunctionKind::Effectful, confirm),
        ("fenceNavigation", vec![], t("Unit"), FunctionKind::Pure, |_| {
            Err(ExceptionValue::new("FenceException", "navigation is out of scope").with_detail("category", Value::str("navigation")))
        }),
    ];
    for (name, params, ret, kind, body) in defs {
        r.register(FunctionDef::new(name, params, ret, kind, body))?;
    }
    Ok(())
}

fn constraint_value(c: Constraint) -> Result<Return, ExceptionValue> {
    Ok(Return::Value(Value::Constraint(c)))
}

fn now(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    Ok(Return::Value(datetime_value(inv.world.clock)))
}

fn day_offset(inv: &mut Invocation<'_>, days: i64) -> Result<Return, ExceptionValue> {
    let d = inv.world.clock.date() + Duration::days(days);
    constraint_value(datetime_constraint().with(Clause::PropertyEq {
        field: "date".into(),
        value: date_value(d),
    }))
}

/// A specific date-time from a `DateTime`, or from a constraint that fixes
/// both its date and its time.
pub fn datetime_from_spec(v: &Value) -> Option<NaiveDateTime> {
    match v {
        Value::Constraint(c) => {
            let date = date_from_value(c.required("date")?)?;
            let time = time_from_value(c.required("time")?)?;
            Some(date.and_time(time))
        }
        v => datetime_from_value(v),
    }
}

fn date_at_time(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let date = inv.require("date")?;
    let d = match &date {
        Value::Constraint(c) => c.required("date").and_then(date_from_value),
        v => date_from_value(v),
    }
    .ok_or_else(|| ExceptionValue::type_error(format!("not a specific date: {}", date.canonical())).with_path("date"))?;
    let time = time_from_value(&inv.require("time")?).ok_or_else(|| ExceptionValue::type_error("not a time").with_path("time"))?;
    Ok(Return::Value(datetime_value(d.and_time(time))))
}

fn hour_of_day(inv: &mut Invocation<'_>, pm: bool) -> Result<NaiveTime, ExceptionValue> {
    let n = inv.num("number")?;
    if !(1.0..=12.0).contains(&n) || n.fract() != 0.0 {
        return Err(ExceptionValue::new("InvalidTimeException", format!("{n} is not an hour on a 12-hour clock")).with_path("number"));
    }
    let hour = (n as u32) % 12 + if pm { 12 } else { 0 };
    Ok(NaiveTime::from_hms_opt(hour, 0, 0).expect("hour in range"))
}

fn at_hour(inv: &mut Invocation<'_>, pm: bool) -> Result<Return, ExceptionValue> {
    let time = hour_of_day(inv, pm)?;
    constraint_value(datetime_constraint().with(Clause::PropertyEq {
        field: "time".into(),
        value: time_value(time),
    }))
}

fn window(from: u32, to: u32) -> Return {
    let at = |h| time_value(NaiveTime::from_hms_opt(h, 0, 0).expect("hour in range"));
    Return::Value(Value::Constraint(
        datetime_constraint()
            .with(Clause::Compare(CompareOp::OnOrAfter, at(from)))
            .with(Clause::Compare(CompareOp::Before, at(to))),
    ))
}

fn compare(inv: &mut Invocation<'_>, op: CompareOp) -> Result<Return, ExceptionValue> {
    let bound = inv.require("time")?;
    if !matches!(&bound, Value::Record { ctor, .. } if matches!(ctor.as_str(), "DateTime" | "Date" | "Time")) {
        return Err(ExceptionValue::type_error(format!("cannot order date-times against {}", bound.canonical())).with_path("time"));
    }
    constraint_value(datetime_constraint().with(Clause::Compare(op, bound)))
}

fn connective(inv: &mut Invocation<'_>, make: fn(Vec<Constraint>) -> Clause) -> Result<Return, ExceptionValue> {
    let mut cs = vec![];
    for v in inv.values("constraints") {
        match v {
            Value::Constraint(c) => cs.push(c),
            other => return Err(ExceptionValue::type_error(format!("not a constraint: {}", other.canonical()))),
        }
    }
    let mut base: Option<TypeTag> = None;
    for c in &cs {
        match (&base, &c.base) {
            (_, None) => {}
            (None, Some(b)) => base = Some(b.clone()),
            (Some(a), Some(b)) if b.conforms_to(a) => {}
            (Some(a), Some(b)) => return Err(ExceptionValue::type_error(format!("cannot combine constraints on {a} and {b}"))),
        }
    }
    constraint_value(Constraint {
        base,
        clauses: vec![make(cs)],
    })
}

fn negate(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let c = inv.constraint("constraint")?;
    constraint_value(Constraint {
        base: c.base.clone(),
        clauses: vec![Clause::Not(Box::new(c))],
    })
}

fn arithmetic(inv: &mut Invocation<'_>, op: char) -> Result<Return, ExceptionValue> {
    let left = inv.require("left")?;
    let right = inv.require("right")?;
    if let (Some(a), Some(b)) = (left.as_num(), right.as_num()) {
        let v = match op {
            '+' => a + b,
            '-' => a - b,
            '*' => a * b,
            _ if b == 0.0 => return Err(ExceptionValue::new("DivisionByZero", "division by zero").with_path("right")),
            _ => a / b,
        };
        return Ok(Return::Value(Value::Num(v)));
    }
    let sign = match op {
        '+' => 1,
        '-' => -1,
        _ => 0,
    };
    if let (Some(dt), Some(m)) = (datetime_from_value(&left), minutes_from_value(&right)) {
        if sign != 0 {
            let shifted = add_minutes(dt, sign * m).ok_or_else(|| ExceptionValue::new("InvalidDateException", "date out of range"))?;
            return Ok(Return::Value(datetime_value(shifted)));
        }
    }
    if let (Some(a), Some(b)) = (minutes_from_value(&left), minutes_from_value(&right)) {
        if sign != 0 {
            return Ok(Return::Value(duration_value(a + sign * b)));
        }
    }
    Err(ExceptionValue::type_error(format!(
        "{op} is not defined for {} and {}",
        left.canonical(),
        right.canonical()
    )))
}

fn duration(inv: &mut Invocation<'_>, unit: i64) -> Result<Return, ExceptionValue> {
    let n = inv.num("count")?;
    Ok(Return::Value(duration_value((n * unit as f64).round() as i64)))
}

fn day_of_week(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let v = inv.require("datetime")?;
    let d = date_from_value(&v).ok_or_else(|| ExceptionValue::type_error("not a date").with_path("datetime"))?;
    Ok(Return::Value(weekday_value(d)))
}

fn project(inv: &mut Invocation<'_>, field: &str) -> Result<Return, ExceptionValue> {
    inv.require("event")?
        .field(field)
        .map(Return::Value)
        .ok_or_else(|| ExceptionValue::type_error(format!("event has no {field}")).with_path("event"))
}

fn length(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    match inv.require("items")? {
        Value::List(items) => Ok(Return::Value(Value::Num(items.len() as f64))),
        other => Err(ExceptionValue::type_error(format!("not a list: {}", other.canonical()))),
    }
}

fn empty(what: &str, spec: &Constraint) -> ExceptionValue {
    ExceptionValue::new(
        "EmptyQueryResult",
        format!("no {what} matches {}", Value::Constraint(spec.clone()).canonical()),
    )
}

fn find_event(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let spec = inv.constraint("spec")?;
    let world = &*inv.world;
    world
        .events
        .iter()
        .filter(|e| holds(&spec, &world.event_value(e)))
        .min_by_key(|e| (e.start, e.id))
        .map(|e| Return::Value(world.event_value(e)))
        .ok_or_else(|| empty("event", &spec))
}

fn find_date_time(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let holiday = inv.require("holiday")?;
    let name = holiday.text().unwrap_or_default().to_lowercase();
    let year = chrono::Datelike::year(&inv.world.clock);
    match name.as_str() {
        "easter" => Ok(Return::Value(datetime_value(easter(year).and_time(NaiveTime::MIN)))),
        _ => Err(ExceptionValue::new("EmptyQueryResult", format!("unknown holiday {name}")).with_path("holiday")),
    }
}

fn find_person(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let spec = inv.constraint("spec")?;
    let world = &*inv.world;
    world
        .people
        .iter()
        .map(|p| world.person_value(&p.name))
        .find(|v| holds(&spec, v))
        .map(Return::Value)
        .ok_or_else(|| empty("person", &spec))
}

fn place_value(p: &super::PlaceRow) -> Value {
    Value::record(
        "Place",
        vec![
            ("keyphrase", Value::str(p.keyphrase.clone())),
            ("latitude", Value::Num(p.latitude)),
            ("longitude", Value::Num(p.longitude)),
        ],
    )
}

fn find_place(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let spec = inv.constraint("spec")?;
    inv.world
        .places
        .iter()
        .map(place_value)
        .find(|v| holds(&spec, v))
        .map(Return::Value)
        .ok_or_else(|| empty("place", &spec))
}

fn weather_query(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let place = inv.require("place")?;
    let keyphrase = place
        .field("keyphrase")
        .and_then(|k| k.text())
        .ok_or_else(|| ExceptionValue::type_error("place has no keyphrase").with_path("place"))?;
    let time = inv.constraint("time")?;
    let mut rows: Vec<_> = inv
        .world
        .weather
        .iter()
        .filter(|w| w.place.eq_ignore_ascii_case(&keyphrase))
        .filter(|w| holds(&time, &datetime_value(w.date.and_time(w.window_start))))
        .collect();
    rows.sort_by_key(|w| (w.date, w.window_start));
    let w = rows.first().ok_or_else(|| empty("weather report", &time))?;
    Ok(Return::Value(Value::record(
        "WeatherReport",
        vec![
            ("place", Value::str(w.place.clone())),
            ("date", date_value(w.date)),
            ("condition", Value::str(w.condition.clone())),
            ("high", Value::Num(w.high)),
            ("low", Value::Num(w.low)),
            ("window_start", time_value(w.window_start)),
            ("window_end", time_value(w.window_end)),
        ],
    )))
}

fn underconstrained(slot: &str) -> ExceptionValue {
    ExceptionValue::new("UnderconstrainedException", format!("{slot} is required")).with_path(slot)
}

fn create_event(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let name = inv.value("name").and_then(|v| v.text()).ok_or_else(|| underconstrained("name"))?;
    let start_value = inv.value("start").ok_or_else(|| underconstrained("start"))?;
    let start = datetime_from_spec(&start_value)
        .ok_or_else(|| ExceptionValue::type_error(format!("not a specific start time: {}", start_value.canonical())).with_path("start"))?;
    let end = match inv.value("end") {
        Some(v) => datetime_from_spec(&v).ok_or_else(|| ExceptionValue::type_error("not a specific end time").with_path("end"))?,
        None => add_minutes(start, 30).expect("in range"),
    };
    if end < start {
        return Err(ExceptionValue::new("InvalidEventException", "event ends before it starts").with_path("end"));
    }
    let attendees = match inv.value("attendees") {
        Some(Value::List(items)) => items.iter().filter_map(|v| v.field("name").unwrap_or_else(|| v.clone()).text()).collect(),
        Some(v) => v.field("name").unwrap_or(v).text().into_iter().collect(),
        None => vec![],
    };
    let location = inv.value("location").and_then(|v| v.text());
    let event = EventRow {
        id: inv.world.next_event_id(),
        name,
        start,
        end,
        attendees,
        location,
    };
    let value = inv.world.event_value(&event);
    inv.world.pending.push(Proposal {
        event,
        awaiting_confirmation: false,
    });
    Ok(Return::Value(value))
}

/// Expands into a `createEvent` call whose arguments are the nodes that
/// supplied each field of the event constraint.
fn preflight(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let spec_node = inv.arg_node("spec").expect("spec is required");
    let spec = inv.constraint("spec")?;
    let terminal = inv.graph.resolve_value(spec_node).map_err(|e| ExceptionValue::type_error(e.to_string()))?;
    let provenance = inv.provenance(Origin::GenerationExtension);
    let ctor_args: Option<Vec<(Option<String>, NodeId)>> = match &inv.graph.get(terminal).label {
        Label::Constructor { name, .. } if inv.graph.get(terminal).args.len() == spec.clauses.len() => Some(
            inv.graph
                .get(terminal)
                .args
                .iter()
                .map(|(k, a)| (k.as_deref().map(|k| canonical_keyword(name, k).to_string()), *a))
                .collect(),
        ),
        _ => None,
    };
    let mut args = vec![];
    for (i, clause) in spec.clauses.iter().enumerate() {
        let Clause::PropertyEq { field, value } = clause else {
            continue;
        };
        if !matches!(field.as_str(), "name" | "start" | "end" | "attendees" | "location") {
            continue;
        }
        let node = match &ctor_args {
            Some(a) if a[i].0.as_deref() == Some(field) => a[i].1,
            _ => crate::value::materialize(inv.graph, value, provenance).map_err(|e| ExceptionValue::new("GraphError", e.to_string()))?,
        };
        args.push((Some(field.clone()), node));
    }
    let call = inv
        .graph
        .add_node(Label::Call("createEvent".into()), args, provenance)
        .map_err(|e| ExceptionValue::new("GraphError", e.to_string()))?;
    Ok(Return::Node(call))
}

fn event_id(v: &Value) -> Option<u64> {
    v.field("id")?.as_num().map(|n| n as u64)
}

fn commit_wrapper(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let node = inv.arg_node("event").expect("event is required");
    let id = event_id(&inv.require("event")?);
    let proposal = inv
        .world
        .pending
        .iter_mut()
        .find(|p| Some(p.event.id) == id)
        .ok_or_else(|| ExceptionValue::new("NoPendingProposal", "the event was not proposed in this dialogue").with_path("event"))?;
    proposal.awaiting_confirmation = true;
    Ok(Return::Node(node))
}

fn confirm(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let idx = inv
        .world
        .pending
        .iter()
        .rposition(|p| p.awaiting_confirmation)
        .ok_or_else(|| ExceptionValue::new("NoPendingProposal", "nothing is awaiting confirmation"))?;
    let event = inv.world.pending.remove(idx).event;
    inv.world.pending.clear();
    let value = inv.world.event_value(&event);
    inv.world.events.push(event);
    Ok(Return::Value(value))
}
