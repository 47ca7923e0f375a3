//! Terminal-node values and their conversion to and from graph nodes.

use std::cmp::Ordering;

use thiserror::Error;

use crate::constraints::{Clause, CompareOp, Constraint, KeyPath};
use crate::graph::{DataflowGraph, GraphError, Label, NodeId, Provenance};
use crate::library::time;
use crate::program::{print_expression, Arg, Expression};
use crate::types::{self, canonical_enum, canonical_keyword, constraint_form, ConstraintForm, TypeTag};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Enum(String),
    Record {
        ctor: String,
        fields: Vec<(Option<String>, Value)>,
    },
    List(Vec<Value>),
    Constraint(Constraint),
    Missing(TypeTag),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {0} is not a terminal node")]
    NotTerminal(NodeId),
    #[error("bad constraint argument at node {node}: {message}")]
    BadConstraintArgument { node: NodeId, message: String },
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn record(ctor: &str, fields: Vec<(&str, Value)>) -> Self {
        Value::Record {
            ctor: ctor.to_string(),
            fields: fields
                .into_iter()
                .map(|(k, v)| (Some(k.to_string()), v))
                .collect(),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_constraint(&self) -> Option<&Constraint> {
        match self {
            Value::Constraint(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing(_))
    }

    /// Text of a primitive, or of a single-field wrapper record around one.
    pub fn text(&self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s.clone()),
            Value::Num(n) => Some(crate::program::print_expression(&Expression::Num(*n))),
            Value::Enum(e) => Some(e.clone()),
            Value::Record { fields, .. } if fields.len() == 1 => fields[0].1.text(),
            _ => None,
        }
    }

    /// Stored or derived field of a record.
    pub fn field(&self, name: &str) -> Option<Value> {
        let Value::Record { ctor, fields } = self else {
            return None;
        };
        fields
            .iter()
            .find(|(k, _)| k.as_deref() == Some(name))
            .map(|(_, v)| v.clone())
            .or_else(|| derived_field(ctor, self, name))
    }

    pub fn canonical(&self) -> String {
        print_expression(&value_to_expr(self))
    }
}

fn derived_field(ctor: &str, value: &Value, name: &str) -> Option<Value> {
    match (ctor, name) {
        ("DateTime", "year" | "month" | "day" | "weekday") => value.field("date")?.field(name),
        ("DateTime", "hour" | "minute") => value.field("time")?.field(name),
        ("Date", "weekday") => {
            let d = time::date_from_value(value)?;
            Some(time::weekday_value(d))
        }
        ("Event", "date") => value.field("start"),
        ("Event", "duration") => {
            let s = time::datetime_from_value(&value.field("start")?)?;
            let e = time::datetime_from_value(&value.field("end")?)?;
            Some(time::duration_value((e - s).num_minutes()))
        }
        _ => None,
    }
}

pub fn type_of(value: &Value) -> TypeTag {
    match value {
        Value::Str(_) => TypeTag::named("String"),
        Value::Num(_) => TypeTag::named("Number"),
        Value::Enum(e) => types::enum_type(e),
        Value::Record { ctor, .. } => TypeTag::named(ctor),
        Value::List(items) => TypeTag::list(items.first().map_or(TypeTag::Any, type_of)),
        Value::Constraint(c) => TypeTag::constraint(c.base.clone().unwrap_or(TypeTag::Any)),
        Value::Missing(t) => t.clone(),
    }
}

/// Equality used by property constraints: enum spellings are canonicalized,
/// strings compare case-insensitively, and a one-field wrapper record equals
/// the primitive it wraps.
pub fn loose_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => x.to_lowercase() == y.to_lowercase(),
        (Value::Num(x), Value::Num(y)) => x == y,
        (Value::Enum(x), Value::Enum(y)) => canonical_enum(x) == canonical_enum(y),
        (Value::Str(x), Value::Enum(y)) | (Value::Enum(y), Value::Str(x)) => {
            canonical_enum(x) == canonical_enum(y)
        }
        (
            Value::Record {
                ctor: c1,
                fields: f1,
            },
            Value::Record {
                ctor: c2,
                fields: f2,
            },
        ) => {
            c1 == c2
                && f1.len() == f2.len()
                && f1
                    .iter()
                    .zip(f2)
                    .all(|((k1, v1), (k2, v2))| k1 == k2 && loose_eq(v1, v2))
        }
        (Value::Record { fields, .. }, other) | (other, Value::Record { fields, .. })
            if fields.len() == 1 =>
        {
            loose_eq(&fields[0].1, other)
        }
        (Value::List(x), Value::List(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(a, b)| loose_eq(a, b))
        }
        _ => a == b,
    }
}

/// Ordering for comparison clauses. A time of day compares against the
/// time component of a date-time.
pub fn compare_values(a: &Value, b: &Value) -> Option<Ordering> {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        return x.partial_cmp(&y);
    }
    let ctor = |v: &Value| match v {
        Value::Record { ctor, .. } => Some(ctor.clone()),
        _ => None,
    };
    match (ctor(a)?.as_str(), ctor(b)?.as_str()) {
        ("DateTime", "DateTime") => {
            Some(time::datetime_from_value(a)?.cmp(&time::datetime_from_value(b)?))
        }
        ("DateTime", "Time") => Some(
            time::time_from_value(&a.field("time")?)?.cmp(&time::time_from_value(b)?),
        ),
        ("DateTime", "Date") => {
            Some(time::date_from_value(&a.field("date")?)?.cmp(&time::date_from_value(b)?))
        }
        ("Time", "Time") => Some(time::time_from_value(a)?.cmp(&time::time_from_value(b)?)),
        ("Date", "Date") => Some(time::date_from_value(a)?.cmp(&time::date_from_value(b)?)),
        ("Duration", "Duration") => {
            compare_values(&a.field("minutes")?, &b.field("minutes")?)
        }
        _ => None,
    }
}

/// Value of `node`, following result edges to its terminal.
pub fn read_value(graph: &DataflowGraph, node: NodeId) -> Result<Value, ValueError> {
    let t = graph.resolve_value(node)?;
    read_terminal(graph, t)
}

/// Value of an unevaluated constructor node from its already evaluated arguments.
pub fn read_node_shallow(graph: &DataflowGraph, node: NodeId) -> Result<Value, ValueError> {
    read_terminal(graph, node)
}

fn read_terminal(graph: &DataflowGraph, t: NodeId) -> Result<Value, ValueError> {
    let n = graph.get(t);
    match &n.label {
        Label::Literal(v) => Ok(v.clone()),
        Label::Enum(e) => Ok(Value::Enum(e.clone())),
        Label::Missing(ty) => Ok(Value::Missing(ty.clone())),
        Label::List => {
            let items = n
                .args
                .iter()
                .map(|(_, a)| read_value(graph, *a))
                .collect::<Result<_, _>>()?;
            Ok(Value::List(items))
        }
        Label::Constructor { name, type_arg } => match constraint_form(name, type_arg.as_ref()) {
            Some(form) => Ok(Value::Constraint(read_constraint(graph, t, name, form)?)),
            None => {
                let fields = n
                    .args
                    .iter()
                    .map(|(k, a)| Ok((k.clone(), read_value(graph, *a)?)))
                    .collect::<Result<_, ValueError>>()?;
                Ok(Value::Record {
                    ctor: name.clone(),
                    fields,
                })
            }
        },
        Label::Call(_) => Err(ValueError::NotTerminal(t)),
    }
}

fn read_constraint(
    graph: &DataflowGraph,
    node: NodeId,
    ctor: &str,
    form: ConstraintForm,
) -> Result<Constraint, ValueError> {
    let n = graph.get(node);
    match form {
        ConstraintForm::AlwaysTrue => Ok(Constraint::always_true()),
        ConstraintForm::Role => {
            let bad = |message: &str| ValueError::BadConstraintArgument {
                node,
                message: message.to_string(),
            };
            let [(None, arg)] = n.args.as_slice() else {
                return Err(bad("RoleConstraint takes one positional keyword path"));
            };
            let segment = |v: &Value| match v {
                Value::Enum(s) | Value::Str(s) => Some(s.clone()),
                _ => None,
            };
            let path = match read_value(graph, *arg)? {
                Value::List(items) => items
                    .iter()
                    .map(segment)
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad("keyword path segments must be names"))?,
                v => vec![segment(&v).ok_or_else(|| bad("keyword path must be a name"))?],
            };
            if path.is_empty() {
                return Err(bad("keyword path must be non-empty"));
            }
            Ok(Constraint::role(KeyPath(path)))
        }
        ConstraintForm::Typed(base) => {
            let mut clauses = Vec::with_capacity(n.args.len());
            for (kw, arg) in &n.args {
                let v = read_value(graph, *arg)?;
                let clause = match (kw, v) {
                    (_, Value::Missing(_)) => Clause::AlwaysTrue,
                    (Some(_), Value::Constraint(c)) if c.base.as_ref() == Some(&base) => {
                        Clause::And(vec![c])
                    }
                    (Some(k), Value::Constraint(c)) => Clause::PropertyNested {
                        field: canonical_keyword(ctor, k).to_string(),
                        constraint: c,
                    },
                    (Some(k), v) => Clause::PropertyEq {
                        field: canonical_keyword(ctor, k).to_string(),
                        value: v,
                    },
                    (None, Value::Constraint(c)) => Clause::And(vec![c]),
                    (None, v) => {
                        return Err(ValueError::BadConstraintArgument {
                            node,
                            message: format!(
                                "positional argument {} is not a constraint",
                                v.canonical()
                            ),
                        })
                    }
                };
                clauses.push(clause);
            }
            Ok(Constraint {
                base: Some(base),
                clauses,
            })
        }
    }
}

/// Type of a node without evaluating it: the value's type when resolvable,
/// otherwise whatever the label alone determines.
pub fn static_type(graph: &DataflowGraph, node: NodeId) -> Option<TypeTag> {
    if let Ok(v) = read_value(graph, node) {
        return Some(type_of(&v));
    }
    let n = graph.node(node).ok()?;
    match &n.label {
        Label::Literal(v) => Some(type_of(v)),
        Label::Enum(e) => Some(types::enum_type(e)),
        Label::Missing(t) => Some(t.clone()),
        Label::List => Some(TypeTag::list(TypeTag::Any)),
        Label::Constructor { name, type_arg } => match constraint_form(name, type_arg.as_ref()) {
            Some(ConstraintForm::Typed(t)) => Some(TypeTag::constraint(t)),
            Some(_) => Some(TypeTag::constraint(TypeTag::Any)),
            None => Some(TypeTag::named(name)),
        },
        Label::Call(_) => None,
    }
}

pub fn structural_equal(graph: &DataflowGraph, a: NodeId, b: NodeId) -> Result<bool, ValueError> {
    Ok(read_value(graph, a)? == read_value(graph, b)?)
}

/// Adds `value` to the graph as evaluated terminal nodes and returns the root.
pub fn materialize(
    graph: &mut DataflowGraph,
    value: &Value,
    provenance: Provenance,
) -> Result<NodeId, GraphError> {
    let (label, args) = match value {
        Value::Str(_) | Value::Num(_) | Value::Constraint(_) => (Label::Literal(value.clone()), vec![]),
        Value::Enum(e) => (Label::Enum(e.clone()), vec![]),
        Value::Missing(t) => (Label::Missing(t.clone()), vec![]),
        Value::Record { ctor, fields } => {
            let mut args = Vec::with_capacity(fields.len());
            for (k, v) in fields {
                args.push((k.clone(), materialize(graph, v, provenance)?));
            }
            (
                Label::Constructor {
                    name: ctor.clone(),
                    type_arg: None,
                },
                args,
            )
        }
        Value::List(items) => {
            let mut args = Vec::with_capacity(items.len());
            for v in items {
                args.push((None, materialize(graph, v, provenance)?));
            }
            (Label::List, args)
        }
    };
    let id = graph.add_node(label, args, provenance)?;
    graph.set_result(id, id)?;
    Ok(id)
}

pub fn value_to_expr(value: &Value) -> Expression {
    match value {
        Value::Str(s) => Expression::Str(s.clone()),
        Value::Num(n) => Expression::Num(*n),
        Value::Enum(e) => Expression::Enum(e.clone()),
        Value::Record { ctor, fields } => Expression::call(
            ctor.clone(),
            fields
                .iter()
                .map(|(k, v)| Arg {
                    keyword: k.clone(),
                    value: value_to_expr(v),
                })
                .collect(),
        ),
        Value::List(items) => Expression::List(items.iter().map(value_to_expr).collect()),
        Value::Constraint(c) => constraint_to_expr(c),
        Value::Missing(t) => Expression::typed_call("Missing", t.to_expr(), vec![]),
    }
}

pub fn constraint_to_expr(c: &Constraint) -> Expression {
    match &c.base {
        Some(base) => Expression::typed_call(
            "Constraint",
            base.to_expr(),
            c.clauses.iter().map(clause_arg).collect(),
        ),
        None => match c.clauses.as_slice() {
            [] | [Clause::AlwaysTrue] => Expression::call("AlwaysTrue", vec![]),
            [single] => clause_arg(single).value,
            many => Expression::call(
                "and",
                many.iter().map(|cl| Arg::positional(clause_arg(cl).value)).collect(),
            ),
        },
    }
}

fn clause_arg(clause: &Clause) -> Arg {
    match clause {
        Clause::PropertyEq { field, value } => Arg::keyword(field.clone(), value_to_expr(value)),
        Clause::PropertyNested { field, constraint } => {
            Arg::keyword(field.clone(), constraint_to_expr(constraint))
        }
        Clause::Role(path) => {
            let path_expr = match path.0.as_slice() {
                [single] => Expression::Enum(single.clone()),
                many => Expression::List(many.iter().cloned().map(Expression::Enum).collect()),
            };
            Arg::positional(Expression::call("RoleConstraint", vec![Arg::positional(path_expr)]))
        }
        Clause::Compare(op, v) => Arg::positional(Expression::call(
            op.function_name(),
            vec![Arg::positional(value_to_expr(v))],
        )),
        Clause::And(cs) if cs.len() == 1 => Arg::positional(constraint_to_expr(&cs[0])),
        Clause::And(cs) => Arg::positional(connective("and", cs)),
        Clause::Or(cs) => Arg::positional(connective("or", cs)),
        Clause::Not(c) => Arg::positional(Expression::call(
            "not",
            vec![Arg::positional(constraint_to_expr(c))],
        )),
        Clause::AlwaysTrue => Arg::positional(Expression::call("AlwaysTrue", vec![])),
    }
}

fn connective(name: &str, cs: &[Constraint]) -> Expression {
    Expression::call(
        name,
        cs.iter().map(|c| Arg::positional(constraint_to_expr(c))).collect(),
    )
}

impl CompareOp {
    pub fn function_name(self) -> &'static str {
        match self {
            CompareOp::After => "after",
            CompareOp::Before => "before",
            CompareOp::OnOrAfter => "onOrAfter",
            CompareOp::OnOrBefore => "onOrBefore",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Origin, Speaker};
    use crate::program::{extend_graph, parse};

    fn evaluated_terminals(g: &mut DataflowGraph) {
        let ids: Vec<NodeId> = g.nodes().map(|(id, _)| id).collect();
        for id in ids {
            if !matches!(g.get(id).label, Label::Call(_)) && g.get(id).result.is_none() {
                g.set_result(id, id).unwrap();
            }
        }
    }

    fn read(text: &str) -> Value {
        let mut g = DataflowGraph::new();
        let root = extend_graph(&mut g, &parse(text).unwrap(), 0, Speaker::User).unwrap();
        evaluated_terminals(&mut g);
        read_value(&g, root).unwrap()
    }

    #[test]
    fn reads_nested_property_constraint() {
        let v = read("Constraint[Event](date=Constraint[DateTime](weekday=thurs))");
        let c = v.as_constraint().unwrap();
        assert_eq!(c.base, Some(TypeTag::named("Event")));
        assert!(matches!(&c.clauses[0], Clause::PropertyNested { field, .. } if field == "date"));
        assert_eq!(type_of(&v), TypeTag::constraint(TypeTag::named("Event")));
    }

    #[test]
    fn aliases_rename_keywords() {
        let v = read("EventBuilder(subject='x')");
        let c = v.as_constraint().unwrap();
        assert_eq!(
            c.clauses[0],
            Clause::PropertyEq {
                field: "name".into(),
                value: Value::str("x")
            }
        );
    }

    #[test]
    fn role_paths() {
        let v = read("RoleConstraint([date, weekday])");
        assert_eq!(
            v.as_constraint().unwrap().clauses,
            vec![Clause::Role(KeyPath(vec!["date".into(), "weekday".into()]))]
        );
    }

    #[test]
    fn loose_equality() {
        let wrapped = Value::Record {
            ctor: "Day".into(),
            fields: vec![(None, Value::str("Friday"))],
        };
        assert!(loose_eq(&wrapped, &Value::str("friday")));
        assert!(loose_eq(&Value::Enum("thurs".into()), &Value::Enum("thursday".into())));
        assert!(!loose_eq(&Value::Num(1.0), &Value::Num(2.0)));
    }

    #[test]
    fn materialize_round_trips() {
        let v = read("DateTime(date=Date(year=2020, month=apr, day=27), time=Time(hour=9, minute=0))");
        let mut g = DataflowGraph::new();
        let id = materialize(&mut g, &v, Provenance::new(0, Origin::EvaluationResult)).unwrap();
        assert_eq!(read_value(&g, id).unwrap(), v);
        assert_eq!(
            v.canonical(),
            "DateTime(date=Date(year=2020, month=apr, day=27), time=Time(hour=9, minute=0))"
        );
        assert_eq!(v.field("weekday"), Some(Value::Enum("monday".into())));
        assert_eq!(v.field("hour"), Some(Value::Num(9.0)));
    }

    #[test]
    fn independent_copies_are_structurally_equal() {
        let mut g = DataflowGraph::new();
        let p = parse("DateTimeSpec(year=2021)").unwrap();
        let a = extend_graph(&mut g, &p, 0, Speaker::User).unwrap();
        let b = extend_graph(&mut g, &p, 2, Speaker::User).unwrap();
        evaluated_terminals(&mut g);
        assert!(structural_equal(&g, a, b).unwrap());
        let q = parse("DateTimeSpec(year=2022)").unwrap();
        let c = extend_graph(&mut g, &q, 4, Speaker::User).unwrap();
        evaluated_terminals(&mut g);
        assert!(!structural_equal(&g, a, c).unwrap());
    }

    #[test]
    fn constraint_printing_reparses() {
        let v = read("Constraint[Event](name='x', start=Constraint[DateTime](hour=9))");
        let text = v.canonical();
        assert_eq!(text, "Constraint[Event](name='x', start=Constraint[DateTime](hour=9))");
        assert_eq!(read(&text), v);
    }
}
