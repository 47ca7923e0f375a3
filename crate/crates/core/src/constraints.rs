//! Constraint predicates over graph nodes, local type inference for bare
//! `refer()`, and constraint merging with weakening.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::evaluator::Registry;
use crate::graph::{DataflowGraph, Label, NodeId, Speaker};
use crate::types::{canonical_keyword, constraint_form, ConstraintForm, TypeTag};
use crate::value::{compare_values, loose_eq, read_value, static_type, type_of, Value};

/// A non-empty sequence of keywords, outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyPath(pub Vec<String>);

impl KeyPath {
    pub fn single(keyword: &str) -> Self {
        KeyPath(vec![keyword.to_string()])
    }
}

impl fmt::Display for KeyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    After,
    Before,
    OnOrAfter,
    OnOrBefore,
}

impl CompareOp {
    fn accepts(self, ord: Ordering) -> bool {
        match self {
            CompareOp::After => ord == Ordering::Greater,
            CompareOp::Before => ord == Ordering::Less,
            CompareOp::OnOrAfter => ord != Ordering::Less,
            CompareOp::OnOrBefore => ord != Ordering::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    PropertyEq { field: String, value: Value },
    PropertyNested { field: String, constraint: Constraint },
    Role(KeyPath),
    /// Orders the subject itself against a value.
    Compare(CompareOp, Value),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
    Not(Box<Constraint>),
    AlwaysTrue,
}

impl Clause {
    pub fn field(&self) -> Option<&str> {
        match self {
            Clause::PropertyEq { field, .. } | Clause::PropertyNested { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Absent for role constraints and bare connectives.
    pub base: Option<TypeTag>,
    pub clauses: Vec<Clause>,
}

impl Constraint {
    pub fn always_true() -> Self {
        Constraint {
            base: None,
            clauses: vec![Clause::AlwaysTrue],
        }
    }

    pub fn typed(base: TypeTag) -> Self {
        Constraint {
            base: Some(base),
            clauses: vec![],
        }
    }

    pub fn role(path: KeyPath) -> Self {
        Constraint {
            base: None,
            clauses: vec![Clause::Role(path)],
        }
    }

    pub fn with(mut self, clause: Clause) -> Self {
        self.clauses.push(clause);
        self
    }

    /// True when the constraint accepts every node.
    pub fn is_trivial(&self) -> bool {
        self.base.is_none() && self.clauses.iter().all(|c| *c == Clause::AlwaysTrue)
    }

    /// The value required for `field` by an equality clause, looking through
    /// conjunctions.
    pub fn required(&self, field: &str) -> Option<&Value> {
        self.clauses.iter().find_map(|c| match c {
            Clause::PropertyEq { field: f, value } if f == field => Some(value),
            Clause::And(cs) => cs.iter().find_map(|c| c.required(field)),
            _ => None,
        })
    }

    /// Whether any clause, looking through conjunctions, constrains `field`.
    pub fn mentions_field(&self, field: &str) -> bool {
        self.clauses.iter().any(|c| match c {
            Clause::PropertyEq { field: f, .. } | Clause::PropertyNested { field: f, .. } => f == field,
            Clause::And(cs) => cs.iter().any(|c| c.mentions_field(field)),
            _ => false,
        })
    }
}

/// What a constraint is checked against: a graph node, or an absent keyword
/// argument that could be materialized as a missing node.
#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Node(NodeId),
    MissingArg {
        owner: NodeId,
        keyword: String,
        ty: TypeTag,
    },
}

pub fn satisfies(constraint: &Constraint, node: NodeId, graph: &DataflowGraph) -> bool {
    satisfies_subject(constraint, &Subject::Node(node), graph)
}

pub fn satisfies_subject(constraint: &Constraint, subject: &Subject, graph: &DataflowGraph) -> bool {
    let (value, ty) = match subject {
        Subject::Node(n) => {
            let value = read_value(graph, *n).ok();
            let ty = match &value {
                Some(v) => Some(type_of(v)),
                None => static_type(graph, *n),
            };
            (value, ty)
        }
        Subject::MissingArg { ty, .. } => (Some(Value::Missing(ty.clone())), Some(ty.clone())),
    };
    let role = |path: &KeyPath| match subject {
        Subject::Node(n) => plays_role(graph, *n, &path.0),
        Subject::MissingArg { owner, keyword, .. } => {
            let (last, prefix) = path.0.split_last().expect("key paths are non-empty");
            last == keyword && (prefix.is_empty() || plays_role(graph, *owner, prefix))
        }
    };
    check(constraint, value.as_ref(), ty.as_ref(), &role)
}

/// Value-only check; role clauses never hold without a graph position.
pub fn holds(constraint: &Constraint, value: &Value) -> bool {
    check(constraint, Some(value), Some(&type_of(value)), &|_| false)
}

fn check(
    c: &Constraint,
    value: Option<&Value>,
    ty: Option<&TypeTag>,
    role: &dyn Fn(&KeyPath) -> bool,
) -> bool {
    if let Some(base) = &c.base {
        match ty {
            Some(t) if t.conforms_to(base) => {}
            _ => return false,
        }
    }
    let present = value.filter(|v| !v.is_missing());
    c.clauses.iter().all(|clause| match clause {
        Clause::AlwaysTrue => true,
        Clause::PropertyEq { field, value: want } => present
            .and_then(|v| v.field(field))
            .is_some_and(|got| loose_eq(&got, want)),
        Clause::PropertyNested { field, constraint } => present
            .and_then(|v| v.field(field))
            .is_some_and(|got| holds(constraint, &got)),
        Clause::Role(path) => role(path),
        Clause::Compare(op, bound) => present
            .and_then(|v| compare_values(v, bound))
            .is_some_and(|ord| op.accepts(ord)),
        Clause::And(cs) => cs.iter().all(|c| check(c, value, ty, role)),
        Clause::Or(cs) => cs.iter().any(|c| check(c, value, ty, role)),
        Clause::Not(inner) => !check(inner, value, ty, role),
    })
}

/// `[a, b]` holds for a node used as the `b` argument of a node that is
/// itself used as an `a` argument. `output` names user turn roots.
fn plays_role(graph: &DataflowGraph, node: NodeId, path: &[String]) -> bool {
    if path.len() == 1 && path[0] == "output" {
        return graph
            .turn_roots()
            .iter()
            .any(|t| t.speaker == Speaker::User && t.root == node);
    }
    let Some((last, prefix)) = path.split_last() else {
        return true;
    };
    graph.users(node).iter().any(|(user, pos)| {
        let u = graph.get(*user);
        let Some(k) = u.args[*pos].0.as_deref() else {
            return false;
        };
        let canonical = u.label.name().map_or(k, |ctor| canonical_keyword(ctor, k));
        (k == last || canonical == last) && (prefix.is_empty() || plays_role(graph, *user, prefix))
    })
}

/// The constraint implied for a bare `refer()` by the parameter it fills.
pub fn infer_refer_constraint(graph: &DataflowGraph, refer_node: NodeId, registry: &Registry) -> Constraint {
    for (consumer, pos) in graph.users(refer_node) {
        let n = graph.get(*consumer);
        let keyword = n.args[*pos].0.as_deref();
        if let Some(ty) = slot_type(registry, &n.label, keyword, *pos) {
            return match ty {
                TypeTag::Any => Constraint::always_true(),
                ty => Constraint::typed(ty),
            };
        }
    }
    Constraint::always_true()
}

/// Declared type of an argument slot, from a function signature or record field.
pub fn slot_type(registry: &Registry, label: &Label, keyword: Option<&str>, pos: usize) -> Option<TypeTag> {
    let name = label.name()?;
    if let Some(f) = registry.function(name) {
        let param = match keyword {
            Some(k) => f.signature.param(k),
            None => f.signature.positional(pos),
        }?;
        return Some(param.ty.clone());
    }
    let Label::Constructor { type_arg, .. } = label else {
        return None;
    };
    let k = keyword?;
    match constraint_form(name, type_arg.as_ref())? {
        ConstraintForm::Typed(TypeTag::Named(base)) => {
            let field = canonical_keyword(name, k);
            registry.record(&base)?.field_type(field).cloned()
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("cannot merge a constraint on {new} into one on {old}")]
    TypeMismatch { old: TypeTag, new: TypeTag },
}

/// Result of [`merge_constraints`], recording which old clauses survived so
/// callers can reuse the graph nodes that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Merged {
    pub constraint: Constraint,
    pub kept_old: Vec<usize>,
    pub new_included: bool,
}

const INTERVAL: [&str; 3] = ["start", "end", "duration"];

/// Conjoins `new` into `old`. Old clauses on a field that `new` also
/// constrains are replaced. If start, end and duration would all be fixed,
/// the oldest old end/duration clause is dropped (old start only as a last
/// resort). New clauses always survive.
pub fn merge_constraints(old: &Constraint, new: &Constraint) -> Result<Merged, ConstraintError> {
    if new.is_trivial() {
        return Ok(Merged {
            constraint: old.clone(),
            kept_old: (0..old.clauses.len()).collect(),
            new_included: false,
        });
    }
    let base = match (&old.base, &new.base) {
        (Some(a), Some(b)) if b.conforms_to(a) => Some(b.clone()),
        (Some(a), Some(b)) => {
            return Err(ConstraintError::TypeMismatch {
                old: a.clone(),
                new: b.clone(),
            })
        }
        (a, b) => b.clone().or_else(|| a.clone()),
    };
    if old.is_trivial() {
        return Ok(Merged {
            constraint: Constraint {
                base,
                clauses: new.clauses.clone(),
            },
            kept_old: vec![],
            new_included: true,
        });
    }
    let mut kept: Vec<usize> = (0..old.clauses.len())
        .filter(|&i| {
            let cl = &old.clauses[i];
            match cl.field() {
                Some(f) => !new.clauses.iter().any(|n| n.field() == Some(f)),
                None => !new.clauses.contains(cl),
            }
        })
        .collect();
    let fixed = |kept: &[usize], f: &str| {
        kept.iter().any(|&i| old.clauses[i].field() == Some(f))
            || new.clauses.iter().any(|c| c.field() == Some(f))
    };
    while INTERVAL.iter().all(|f| fixed(&kept, f)) {
        let pick = |fields: &[&str]| {
            kept.iter()
                .position(|&i| old.clauses[i].field().is_some_and(|f| fields.contains(&f)))
        };
        match pick(&["end", "duration"]).or_else(|| pick(&["start"])) {
            Some(p) => {
                kept.remove(p);
            }
            None => break,
        }
    }
    let mut clauses: Vec<Clause> = kept.iter().map(|&i| old.clauses[i].clone()).collect();
    clauses.extend(new.clauses.iter().cloned());
    Ok(Merged {
        constraint: Constraint { base, clauses },
        kept_old: kept,
        new_included: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(field: &str, v: Value) -> Clause {
        Clause::PropertyEq {
            field: field.into(),
            value: v,
        }
    }

    fn event(clauses: Vec<Clause>) -> Constraint {
        Constraint {
            base: Some(TypeTag::named("Event")),
            clauses,
        }
    }

    #[test]
    fn interval_weakening_drops_end() {
        let old = event(vec![eq("start", Value::Num(180.0)), eq("end", Value::Num(210.0))]);
        let new = event(vec![eq("duration", Value::Num(45.0))]);
        let m = merge_constraints(&old, &new).unwrap();
        assert_eq!(m.kept_old, vec![0]);
        assert_eq!(
            m.constraint.clauses,
            vec![eq("start", Value::Num(180.0)), eq("duration", Value::Num(45.0))]
        );
    }

    #[test]
    fn disjoint_fields_conjoin() {
        let hotel = |cl| Constraint {
            base: Some(TypeTag::named("Hotel")),
            clauses: vec![cl],
        };
        let m = merge_constraints(&hotel(eq("area", Value::str("north"))), &hotel(eq("price", Value::str("cheap"))))
            .unwrap();
        assert_eq!(
            m.constraint.clauses,
            vec![eq("area", Value::str("north")), eq("price", Value::str("cheap"))]
        );
    }

    #[test]
    fn conflicting_field_is_replaced() {
        let old = event(vec![eq("name", Value::str("a")), eq("location", Value::str("x"))]);
        let new = event(vec![eq("name", Value::str("b"))]);
        let m = merge_constraints(&old, &new).unwrap();
        assert_eq!(m.kept_old, vec![1]);
        assert_eq!(m.constraint.required("name"), Some(&Value::str("b")));
    }

    #[test]
    fn always_true_is_identity() {
        let c = event(vec![eq("name", Value::str("a"))]);
        assert_eq!(merge_constraints(&c, &Constraint::always_true()).unwrap().constraint, c);
        assert_eq!(merge_constraints(&Constraint::always_true(), &c).unwrap().constraint, c);
    }

    #[test]
    fn unrelated_bases_mismatch() {
        let a = Constraint::typed(TypeTag::named("Event"));
        let b = Constraint::typed(TypeTag::named("Person"));
        assert!(matches!(merge_constraints(&a, &b), Err(ConstraintError::TypeMismatch { .. })));
    }

    #[test]
    fn value_checks() {
        let dt = crate::library::time::datetime_value(
            chrono::NaiveDate::from_ymd_opt(2020, 4, 23)
                .unwrap()
                .and_hms_opt(9, 0, 0)
                .unwrap(),
        );
        let c = Constraint::typed(TypeTag::named("DateTime")).with(eq("weekday", Value::Enum("thurs".into())));
        assert!(holds(&c, &dt));
        assert!(!holds(&Constraint::typed(TypeTag::named("DateTime")), &Value::str("x")));
        let not = Constraint::always_true().with(Clause::Not(Box::new(c.clone())));
        assert!(!holds(&not, &dt));
        let or = Constraint {
            base: None,
            clauses: vec![Clause::Or(vec![c, Constraint::typed(TypeTag::named("String"))])],
        };
        assert!(holds(&or, &Value::str("x")));
    }
}
