use std::sync::Arc;

use thiserror::Error;

use super::{AnnotatedTurn, BeliefState, Schema, SchemaError, SlotSchema};
use crate::constraints::Clause;
use crate::evaluator::Outcome;
use crate::graph::{Label, Origin};
use crate::library::WorldState;
use crate::metacompute::HeuristicSalience;
use crate::program::{Arg, Expression, Program, TypeExpr};
use crate::session::Session;
use crate::types::TypeTag;
use crate::value::{read_value, Value};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("turn {turn}: no program reproduces the annotated state")]
    Unrepresentable { turn: usize },
}

/// Programs for each turn of a dialogue; `None` marks a turn whose state is
/// unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub programs: Vec<Option<Program>>,
}

impl Converted {
    pub fn refer_count(&self) -> usize {
        self.programs.iter().flatten().map(|p| count_calls(&p.expr, "refer")).sum()
    }
}

fn count_calls(e: &Expression, name: &str) -> usize {
    match e {
        Expression::Call { name: n, args, .. } => {
            usize::from(n == name) + args.iter().map(|a| count_calls(&a.value, name)).sum::<usize>()
        }
        Expression::List(items) => items.iter().map(|i| count_calls(i, name)).sum(),
        _ => 0,
    }
}

fn new_session(schema: &Schema) -> Session {
    Session::new(Arc::new(schema.registry()), WorldState::default(), Arc::new(HeuristicSalience::default()))
}

/// Runs one program and reads the resulting state. `None` if evaluation
/// fails or the value is not a state.
fn run_turn(session: &mut Session, program: &Program, schema: &Schema) -> Option<BeliefState> {
    let report = session.user_turn(program).ok()?;
    match report.outcome() {
        Outcome::Value(n) => state_from_value(&read_value(session.graph(), *n).ok()?, schema),
        Outcome::Raised(_) => None,
    }
}

/// Flattens a list of domain constraints into slot values.
pub fn state_from_value(value: &Value, schema: &Schema) -> Option<BeliefState> {
    let items = match value {
        Value::List(items) => items.as_slice(),
        single @ Value::Constraint(_) => std::slice::from_ref(single),
        _ => return None,
    };
    let mut state = BeliefState::new();
    for item in items {
        let c = item.as_constraint()?;
        let Some(TypeTag::Named(t)) = &c.base else {
            return None;
        };
        let domain = schema.domain_by_type(t)?;
        for clause in &c.clauses {
            match clause {
                Clause::PropertyEq { field, value } => {
                    let slot = domain.slot_by_keyword(field)?;
                    state.insert(domain.name.clone(), slot.name.clone(), value.text()?);
                }
                Clause::AlwaysTrue => {}
                _ => return None,
            }
        }
    }
    Some(state)
}

/// Evaluates converted programs from an empty history and reads back the
/// state after every turn. Failed turns yield an empty state.
pub fn execute_to_state(programs: &[Option<Program>], schema: &Schema) -> Vec<BeliefState> {
    let mut session = new_session(schema);
    let mut state = BeliefState::new();
    programs
        .iter()
        .map(|p| {
            if let Some(p) = p {
                state = run_turn(&mut session, p, schema).unwrap_or_default();
            }
            state.clone()
        })
        .collect()
}

/// For every turn, the slot values that the turn's `refer` calls resolved to,
/// as (domain, slot, value) triples.
pub fn refer_resolutions(programs: &[Option<Program>], schema: &Schema) -> Vec<Vec<[String; 3]>> {
    let mut session = new_session(schema);
    let mut out = vec![];
    for p in programs {
        let mut found = vec![];
        if let Some(p) = p {
            let Ok(report) = session.user_turn(p) else {
                out.push(found);
                continue;
            };
            let graph = session.graph();
            for (id, node) in graph.nodes() {
                let in_turn = node.provenance.turn == report.turn && node.provenance.origin == Origin::UserProgram;
                if !in_turn || !matches!(&node.label, Label::Call(n) if n == "refer") {
                    continue;
                }
                let Ok(value) = read_value(graph, id) else {
                    continue;
                };
                if let Some(state) = state_from_value(&value, schema) {
                    found.extend(state.triples().map(|(d, k, v)| [d.to_string(), k.to_string(), v.to_string()]));
                    continue;
                }
                for (user, pos) in graph.users(id) {
                    let owner = graph.get(*user);
                    let Label::Constructor { type_arg: Some(t), .. } = &owner.label else {
                        continue;
                    };
                    let (Some(domain), Some(kw)) = (schema.domain_by_type(&t.name), owner.args[*pos].0.as_deref()) else {
                        continue;
                    };
                    if let (Some(slot), Some(text)) = (domain.slot_by_keyword(kw), value.text()) {
                        found.push([domain.name.clone(), slot.name.clone(), text]);
                    }
                }
            }
        }
        out.push(found);
    }
    out
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn mentioned(value: &str, utterance: &str) -> bool {
    normalize(utterance).contains(&normalize(value))
}

#[derive(Debug, Clone, PartialEq)]
enum Site {
    Domain(String),
    Slot(String, String),
}

#[derive(Debug, Clone)]
enum Form {
    /// Merge changed slots into the one domain constraint that changed.
    Revise(String),
    /// State every active domain; newly active domains come first.
    Find(Vec<String>),
}

struct Builder<'a> {
    schema: &'a Schema,
    state: &'a BeliefState,
    prev: &'a BeliefState,
}

fn constraint_type(inner: TypeExpr) -> TypeExpr {
    TypeExpr::applied("Constraint", inner)
}

fn keyword_arg(kw: &str, value: Expression) -> Arg {
    Arg::keyword(kw, value)
}

impl Builder<'_> {
    fn slot_schema(&self, domain: &str, slot: &str) -> &SlotSchema {
        self.schema.slot(domain, slot).expect("states are checked against the schema")
    }

    fn type_name(&self, domain: &str) -> &str {
        &self.schema.domain(domain).expect("checked").type_name
    }

    fn slot_expr(&self, domain: &str, slot: &str, value: &str, refer: bool) -> Expression {
        let s = self.slot_schema(domain, slot);
        match (&s.value_type, refer) {
            (Some(t), false) => Expression::call(t.clone(), vec![Arg::positional(Expression::string(value))]),
            (None, false) => Expression::string(value),
            (Some(t), true) => Expression::call(
                "refer",
                vec![Arg::positional(Expression::typed_call("Constraint", TypeExpr::named(t.clone()), vec![]))],
            ),
            (None, true) => Expression::call(
                "refer",
                vec![Arg::positional(Expression::call(
                    "RoleConstraint",
                    vec![Arg::positional(Expression::Enum(s.keyword()))],
                ))],
            ),
        }
    }

    fn domain_constraint<'s>(&self, domain: &str, slots: impl Iterator<Item = (&'s String, &'s String)>, sites: &[Site]) -> Expression {
        let args = slots
            .map(|(slot, value)| {
                let refer = sites.contains(&Site::Slot(domain.to_string(), slot.clone()));
                keyword_arg(&self.slot_schema(domain, slot).keyword(), self.slot_expr(domain, slot, value, refer))
            })
            .collect();
        Expression::typed_call("Constraint", TypeExpr::named(self.type_name(domain)), args)
    }

    fn build(&self, form: &Form, sites: &[Site]) -> Expression {
        match form {
            Form::Revise(domain) => {
                let prev = self.prev.domain(domain);
                let changed = self
                    .state
                    .domain(domain)
                    .into_iter()
                    .flatten()
                    .filter(|(k, v)| prev.and_then(|p| p.get(*k)) != Some(*v));
                let old = Expression::typed_call("Constraint", constraint_type(TypeExpr::named(self.type_name(domain))), vec![]);
                Expression::call(
                    "reviseConstraint",
                    vec![
                        keyword_arg("rootLoc", role_output()),
                        keyword_arg("oldLoc", old),
                        keyword_arg("new", self.domain_constraint(domain, changed, sites)),
                    ],
                )
            }
            Form::Find(domains) => Expression::call(
                "find",
                domains
                    .iter()
                    .map(|d| {
                        if sites.contains(&Site::Domain(d.clone())) {
                            let ty = constraint_type(TypeExpr::named(self.type_name(d)));
                            Arg::positional(Expression::call(
                                "refer",
                                vec![Arg::positional(Expression::typed_call("Constraint", ty, vec![]))],
                            ))
                        } else {
                            Arg::positional(self.domain_constraint(d, self.state.domain(d).into_iter().flatten(), sites))
                        }
                    })
                    .collect(),
            ),
        }
    }

    /// Places where a `refer` could stand in for written values.
    fn candidate_sites(&self, form: &Form, utterance: &str) -> Vec<Site> {
        let mut sites = vec![];
        let domains: Vec<&String> = match form {
            Form::Revise(d) => vec![d],
            Form::Find(ds) => ds.iter().collect(),
        };
        if let Form::Find(_) = form {
            for d in &domains {
                if self.prev.domain(d).is_some() && self.prev.domain(d) == self.state.domain(d) {
                    sites.push(Site::Domain((*d).clone()));
                }
            }
        }
        for d in domains {
            let prev = self.prev.domain(d);
            for (slot, value) in self.state.domain(d).into_iter().flatten() {
                let written = match form {
                    Form::Revise(_) => prev.and_then(|p| p.get(slot)) != Some(value),
                    Form::Find(_) => true,
                };
                if written && !mentioned(value, utterance) {
                    sites.push(Site::Slot(d.clone(), slot.clone()));
                }
            }
        }
        sites
    }
}

fn role_output() -> Expression {
    Expression::call("RoleConstraint", vec![Arg::positional(Expression::Enum("output".into()))])
}

fn forms(prev: &BeliefState, state: &BeliefState, schema: &Schema) -> Vec<Form> {
    let mut forms = vec![];
    let new: Vec<String> = state.domains().filter(|d| prev.domain(d).is_none()).map(str::to_string).collect();
    let removed = prev.domains().any(|d| state.domain(d).is_none());
    let changed: Vec<&str> = state
        .domains()
        .filter(|d| prev.domain(d).is_some_and(|p| Some(p) != state.domain(d)))
        .collect();
    if new.is_empty() && !removed && changed.len() == 1 {
        let d = changed[0];
        let keeps_slots = prev.domain(d).into_iter().flatten().all(|(k, _)| state.get(d, k).is_some());
        if keeps_slots {
            forms.push(Form::Revise(d.to_string()));
        }
    }
    let mut order = new;
    order.sort_by_key(|d| schema.domain_index(d));
    let mut rest: Vec<String> = state
        .domains()
        .filter(|d| !order.iter().any(|n| n == d))
        .map(str::to_string)
        .collect();
    rest.sort_by_key(|d| schema.domain_index(d));
    order.extend(rest);
    forms.push(Form::Find(order));
    forms
}

fn check_state(state: &BeliefState, schema: &Schema) -> Result<(), SchemaError> {
    for (d, k, _) in state.triples() {
        schema.slot(d, k)?;
    }
    Ok(())
}

/// Converts annotated states into programs that reproduce them when
/// executed in order. Values the user did not say are written as `refer`
/// calls whenever the salience model retrieves the annotated value.
pub fn convert_dialogue(turns: &[AnnotatedTurn], schema: &Schema) -> Result<Converted, ConvertError> {
    for t in turns {
        check_state(&t.state, schema)?;
    }
    let mut session = new_session(schema);
    let mut prev = BeliefState::new();
    let mut programs = vec![];
    for (i, turn) in turns.iter().enumerate() {
        if turn.state == prev {
            programs.push(None);
            continue;
        }
        let builder = Builder {
            schema,
            state: &turn.state,
            prev: &prev,
        };
        let reproduces = |expr: &Expression| {
            let program = Program::new(expr.clone());
            run_turn(&mut session.clone(), &program, schema).as_ref() == Some(&turn.state)
        };
        let mut chosen = None;
        for form in forms(&prev, &turn.state, schema) {
            if !reproduces(&builder.build(&form, &[])) {
                continue;
            }
            let mut sites = vec![];
            for site in builder.candidate_sites(&form, &turn.utterance) {
                sites.push(site);
                if !reproduces(&builder.build(&form, &sites)) {
                    sites.pop();
                }
            }
            chosen = Some(Program::new(builder.build(&form, &sites)));
            break;
        }
        let program = chosen.ok_or(ConvertError::Unrepresentable { turn: i })?;
        session
            .user_turn(&program)
            .map_err(|_| ConvertError::Unrepresentable { turn: i })?;
        programs.push(Some(program));
        prev = turn.state.clone();
    }
    Ok(Converted { programs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiwoz::tests::SCHEMA;

    fn turn(utterance: &str, triples: &[(&str, &str, &str)]) -> AnnotatedTurn {
        let mut state = BeliefState::new();
        for (d, k, v) in triples {
            state.insert(*d, *k, *v);
        }
        AnnotatedTurn {
            utterance: utterance.into(),
            state,
        }
    }

    fn texts(c: &Converted) -> Vec<String> {
        c.programs.iter().map(|p| p.as_ref().map_or(String::new(), |p| p.to_string())).collect()
    }

    #[test]
    fn first_turn_is_a_find() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let c = convert_dialogue(&[turn("a hotel in the north", &[("hotel", "area", "north")])], &schema).unwrap();
        assert_eq!(texts(&c), ["find(Constraint[Hotel](area='north'))"]);
    }

    #[test]
    fn slot_changes_revise_and_unchanged_turns_are_empty() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let turns = [
            turn("a hotel in the north", &[("hotel", "area", "north")]),
            turn("thanks", &[("hotel", "area", "north")]),
            turn("on friday", &[("hotel", "area", "north"), ("hotel", "book day", "friday")]),
        ];
        let c = convert_dialogue(&turns, &schema).unwrap();
        assert_eq!(
            texts(&c),
            [
                "find(Constraint[Hotel](area='north'))",
                "",
                "reviseConstraint(rootLoc=RoleConstraint(output), oldLoc=Constraint[Constraint[Hotel]](), new=Constraint[Hotel](book_day=Day('friday')))",
            ]
        );
        assert_eq!(execute_to_state(&c.programs, &schema), turns.iter().map(|t| t.state.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn unmentioned_values_become_references() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let turns = [
            turn("a hotel on friday", &[("hotel", "book day", "friday")]),
            turn(
                "and a train to ely the same day",
                &[("hotel", "book day", "friday"), ("train", "day", "friday"), ("train", "destination", "ely")],
            ),
        ];
        let c = convert_dialogue(&turns, &schema).unwrap();
        assert_eq!(
            texts(&c)[1],
            "find(Constraint[Train](day=refer(Constraint[Day]()), destination='ely'), refer(Constraint[Constraint[Hotel]]()))"
        );
        let resolved = refer_resolutions(&c.programs, &schema);
        assert!(resolved[1].contains(&["train".into(), "day".into(), "friday".into()]));
        assert_eq!(execute_to_state(&c.programs, &schema)[1], turns[1].state);
    }

    #[test]
    fn unknown_slots_are_schema_errors() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let err = convert_dialogue(&[turn("x", &[("hotel", "stars", "4")])], &schema);
        assert!(matches!(err, Err(ConvertError::Schema(SchemaError::UnknownSlot { .. }))));
    }

    #[test]
    fn failed_programs_give_empty_states() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let bad = Program::new(Expression::call("find", vec![Arg::positional(Expression::call("nope", vec![]))]));
        assert_eq!(execute_to_state(&[Some(bad), None], &schema), [BeliefState::new(), BeliefState::new()]);
    }
}
