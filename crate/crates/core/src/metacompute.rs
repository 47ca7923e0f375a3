//! The `refer`, `revise` and `reviseConstraint` operators, the salience
//! retrieval heuristic, and missing-argument materialization.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::constraints::{infer_refer_constraint, merge_constraints, satisfies, satisfies_subject, Clause, Constraint, Merged, Subject};
use crate::evaluator::{ExceptionValue, FunctionDef, FunctionKind, Invocation, Param, Registry, RegistryError, Return};
use crate::graph::{DataflowGraph, GraphError, Label, NodeId, Origin, Provenance, Speaker};
use crate::types::{alias, canonical_keyword, constraint_form, ConstraintForm, TypeTag};
use crate::value::{materialize, read_value, Value};

/// Ranks candidate nodes for a constraint. `horizon` is the turn being
/// evaluated; only earlier utterances are searched.
pub trait Salience: Send + Sync {
    fn rank(&self, graph: &DataflowGraph, constraint: &Constraint, horizon: usize) -> Vec<NodeId>;

    fn max_lookback(&self) -> usize;
}

/// Breadth-first step distance from the previous user turn's root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicSalience {
    pub max_lookback: usize,
}

impl Default for HeuristicSalience {
    fn default() -> Self {
        HeuristicSalience { max_lookback: 6 }
    }
}

impl HeuristicSalience {
    pub fn new(max_lookback: usize) -> Self {
        HeuristicSalience {
            max_lookback: max_lookback.max(1),
        }
    }
}

impl Salience for HeuristicSalience {
    fn rank(&self, graph: &DataflowGraph, constraint: &Constraint, horizon: usize) -> Vec<NodeId> {
        salience_rank(graph, constraint, horizon, self.max_lookback)
    }

    fn max_lookback(&self) -> usize {
        self.max_lookback
    }
}

/// Every node reachable from the search start, with its step distance.
///
/// The search window is the last `max_lookback` utterances before `horizon`
/// and starts at the newest user root inside it. A step moves to an argument,
/// along a result edge, or from an utterance root to an adjacent one in the
/// window. Nodes from `horizon` onward are never entered.
pub fn salience_distances(graph: &DataflowGraph, horizon: usize, max_lookback: usize) -> Vec<(NodeId, usize)> {
    let prior: Vec<_> = graph.turn_roots().iter().filter(|t| t.turn < horizon).collect();
    let window = &prior[prior.len().saturating_sub(max_lookback.max(1))..];
    let Some(start) = window.iter().rev().find(|t| t.speaker == Speaker::User) else {
        return vec![];
    };
    let mut root_index: HashMap<NodeId, Vec<usize>> = HashMap::new();
    for (i, t) in window.iter().enumerate() {
        root_index.entry(t.root).or_default().push(i);
    }
    let mut dist = HashMap::new();
    let mut order = vec![];
    let mut queue = VecDeque::from([(start.root, 0usize)]);
    dist.insert(start.root, 0);
    while let Some((n, d)) = queue.pop_front() {
        order.push((n, d));
        let node = graph.get(n);
        let mut next: Vec<NodeId> = node.args.iter().map(|(_, a)| *a).collect();
        if let Some(r) = node.result {
            if r != n {
                next.push(r);
            }
        }
        for &i in root_index.get(&n).map_or(&[][..], Vec::as_slice) {
            if i > 0 {
                next.push(window[i - 1].root);
            }
            if i + 1 < window.len() {
                next.push(window[i + 1].root);
            }
        }
        for m in next {
            if graph.get(m).provenance.turn < horizon && !dist.contains_key(&m) {
                dist.insert(m, d + 1);
                queue.push_back((m, d + 1));
            }
        }
    }
    let window_start = window.first().map_or(0, |t| t.turn);
    order
        .into_iter()
        .filter(|(n, _)| graph.get(*n).provenance.turn >= window_start)
        .collect()
}

/// Candidates satisfying `constraint`, most salient first: smaller distance,
/// then later turn, then higher id.
pub fn salience_rank(graph: &DataflowGraph, constraint: &Constraint, horizon: usize, max_lookback: usize) -> Vec<NodeId> {
    let mut found: Vec<(usize, usize, NodeId)> = salience_distances(graph, horizon, max_lookback)
        .into_iter()
        .filter(|(n, _)| satisfies(constraint, *n, graph))
        .map(|(n, d)| (d, graph.get(n).provenance.turn, n))
        .collect();
    found.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)));
    found.into_iter().map(|(_, _, n)| n).collect()
}

/// Registers the three metacomputation operators.
pub fn install(registry: &mut Registry) -> Result<(), RegistryError> {
    let any_constraint = || TypeTag::constraint(TypeTag::Any);
    registry.register(FunctionDef::new(
        "refer",
        vec![Param::new("constraint", any_constraint()).optional()],
        TypeTag::Any,
        FunctionKind::Metacomputation,
        refer,
    ))?;
    registry.register(FunctionDef::new(
        "revise",
        vec![
            Param::new("rootLoc", any_constraint()),
            Param::new("oldLoc", any_constraint()),
            Param::new("new", TypeTag::Any).lazy(),
        ],
        TypeTag::Any,
        FunctionKind::Metacomputation,
        revise,
    ))?;
    registry.register(FunctionDef::new(
        "reviseConstraint",
        vec![
            Param::new("rootLoc", any_constraint()),
            Param::new("oldLoc", any_constraint()),
            Param::new("new", any_constraint()),
        ],
        TypeTag::Any,
        FunctionKind::Metacomputation,
        revise_constraint,
    ))?;
    Ok(())
}

const FALLBACKS: [(&str, &str); 3] = [("Event", "findEvent"), ("Person", "findPerson"), ("Place", "findPlace")];

fn refer(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let explicit = inv.arg_node("constraint");
    let constraint = match explicit {
        Some(_) => inv.constraint("constraint")?,
        None => infer_refer_constraint(inv.graph, inv.node, inv.registry),
    };
    let ranked = inv.salience.rank(inv.graph, &constraint, inv.turn);
    if let Some(n) = ranked.into_iter().find(|n| inv.graph.resolve_value(*n).is_ok()) {
        return Ok(Return::Node(n));
    }
    let fallback = match &constraint.base {
        Some(TypeTag::Named(base)) => FALLBACKS.iter().find(|(t, _)| t == base).map(|(_, f)| *f),
        _ => None,
    };
    let Some(function) = fallback.filter(|f| inv.registry.function(f).is_some()) else {
        return Err(ExceptionValue::new(
            "EmptyRefer",
            format!("nothing salient satisfies {}", Value::Constraint(constraint).canonical()),
        ));
    };
    let provenance = inv.provenance(Origin::GenerationExtension);
    let spec = match explicit {
        Some(n) => n,
        None => materialize(inv.graph, &Value::Constraint(constraint), provenance).map_err(graph_exception)?,
    };
    let call = inv
        .graph
        .add_node(Label::Call(function.to_string()), vec![(None, spec)], provenance)
        .map_err(graph_exception)?;
    Ok(Return::Node(call))
}

fn graph_exception(e: GraphError) -> ExceptionValue {
    ExceptionValue::new("GraphError", e.to_string())
}

fn is_output_role(c: &Constraint) -> bool {
    c.base.is_none() && matches!(c.clauses.as_slice(), [Clause::Role(p)] if p.0 == ["output"])
}

/// Roots to search for the old location, most salient first.
fn root_candidates(inv: &Invocation<'_>, root_loc: &Constraint) -> Vec<NodeId> {
    if is_output_role(root_loc) {
        inv.graph
            .turn_roots()
            .iter()
            .rev()
            .filter(|t| t.speaker == Speaker::User && t.turn < inv.turn)
            .map(|t| t.root)
            .collect()
    } else {
        inv.salience.rank(inv.graph, root_loc, inv.turn)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Step {
    Arg(usize),
    Result,
    Missing(String),
}

/// A located old node and how it is reached from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    /// Root first; each entry is a node on the path and the step taken from it.
    path: Vec<(NodeId, Step)>,
    pub target: Subject,
}

impl Location {
    pub fn path_nodes(&self) -> Vec<NodeId> {
        self.path.iter().map(|(n, _)| *n).collect()
    }
}

/// Keyword slots of `label` that are declared but absent from `args`.
fn missing_slots(registry: &Registry, label: &Label, args: &[(Option<String>, NodeId)]) -> Vec<(String, TypeTag)> {
    let ctor = label.name().unwrap_or("");
    let present: HashSet<&str> = args
        .iter()
        .filter_map(|(k, _)| k.as_deref().map(|k| canonical_keyword(ctor, k)))
        .collect();
    let positional = args.iter().filter(|(k, _)| k.is_none()).count();
    registry
        .keyword_slots(label)
        .into_iter()
        .enumerate()
        .filter(|(i, (k, _))| *i >= positional && !present.contains(canonical_keyword(ctor, k)))
        .map(|(_, slot)| slot)
        .collect()
}

/// Breadth-first search below `root` for the first subject satisfying
/// `old_loc`. Metacomputation nodes are searched through their results.
pub fn locate_old(graph: &DataflowGraph, registry: &Registry, root: NodeId, old_loc: &Constraint) -> Option<Location> {
    struct Entry {
        subject: Subject,
        parent: Option<(usize, Step)>,
    }
    let mut entries = vec![Entry {
        subject: Subject::Node(root),
        parent: None,
    }];
    let mut seen = HashSet::from([root]);
    let mut i = 0;
    while i < entries.len() {
        if satisfies_subject(old_loc, &entries[i].subject, graph) {
            let mut path = vec![];
            let mut cur = i;
            while let Some((p, step)) = &entries[cur].parent {
                let Subject::Node(n) = entries[*p].subject else {
                    unreachable!("only graph nodes have children")
                };
                path.push((n, step.clone()));
                cur = *p;
            }
            path.reverse();
            return Some(Location {
                path,
                target: entries[i].subject.clone(),
            });
        }
        if let Subject::Node(n) = entries[i].subject {
            let node = graph.get(n);
            let mut children = vec![];
            if registry.is_metacomputation(&node.label) {
                if let Some(r) = node.result.filter(|r| *r != n) {
                    children.push((Subject::Node(r), Step::Result));
                }
            } else {
                for (pos, (_, a)) in node.args.iter().enumerate() {
                    children.push((Subject::Node(*a), Step::Arg(pos)));
                }
                for (kw, ty) in missing_slots(registry, &node.label, &node.args) {
                    children.push((
                        Subject::MissingArg {
                            owner: n,
                            keyword: kw.clone(),
                            ty,
                        },
                        Step::Missing(kw),
                    ));
                }
            }
            for (subject, step) in children {
                if let Subject::Node(m) = subject {
                    if !seen.insert(m) {
                        continue;
                    }
                }
                entries.push(Entry {
                    subject,
                    parent: Some((i, step)),
                });
            }
        }
        i += 1;
    }
    None
}

/// Copies the path from the old location up to the root with `replacement`
/// spliced in; everything off the path is shared.
pub fn copy_path(graph: &mut DataflowGraph, location: &Location, replacement: NodeId, provenance: Provenance) -> Result<NodeId, GraphError> {
    let mut current = replacement;
    for (n, step) in location.path.iter().rev() {
        let node = graph.get(*n).clone();
        current = match step {
            Step::Result => current,
            Step::Arg(pos) => {
                let mut args = node.args.clone();
                args[*pos].1 = current;
                graph.add_node(node.label.clone(), args, provenance)?
            }
            Step::Missing(kw) => {
                let mut args = node.args.clone();
                args.push((Some(kw.clone()), current));
                graph.add_node(node.label.clone(), args, provenance)?
            }
        };
    }
    Ok(current)
}

/// Adds the located old node to the graph if it is an absent argument.
fn materialize_target(graph: &mut DataflowGraph, target: &Subject, provenance: Provenance) -> Result<Option<NodeId>, GraphError> {
    match target {
        Subject::Node(n) => Ok(Some(*n)),
        Subject::MissingArg { ty, .. } => {
            let id = graph.add_node(Label::Missing(ty.clone()), vec![], provenance)?;
            graph.set_result(id, id)?;
            Ok(Some(id))
        }
    }
}

fn find_location(inv: &Invocation<'_>) -> Result<Location, ExceptionValue> {
    let root_loc = inv.constraint("rootLoc")?;
    let old_loc = inv.constraint("oldLoc")?;
    let roots = root_candidates(inv, &root_loc);
    if roots.is_empty() {
        return Err(ExceptionValue::new("NoRootMatch", "no prior computation matches rootLoc").with_path("rootLoc"));
    }
    roots
        .into_iter()
        .find_map(|r| locate_old(inv.graph, inv.registry, r, &old_loc))
        .ok_or_else(|| ExceptionValue::new("NoOldMatch", "no node in the computation matches oldLoc").with_path("oldLoc"))
}

fn revise(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let new = inv
        .arg_node("new")
        .ok_or_else(|| ExceptionValue::type_error("revise requires new"))?;
    let location = find_location(inv)?;
    let provenance = inv.provenance(Origin::GenerationExtension);
    materialize_target(inv.graph, &location.target, provenance).map_err(graph_exception)?;
    let root = copy_path(inv.graph, &location, new, provenance).map_err(graph_exception)?;
    Ok(Return::Node(root))
}

fn revise_constraint(inv: &mut Invocation<'_>) -> Result<Return, ExceptionValue> {
    let new_node = inv
        .arg_node("new")
        .ok_or_else(|| ExceptionValue::type_error("reviseConstraint requires new"))?;
    let new = inv.constraint("new")?;
    let location = find_location(inv)?;
    let provenance = inv.provenance(Origin::GenerationExtension);
    let old_node = match &location.target {
        Subject::Node(n) => Some(*n),
        Subject::MissingArg { .. } => None,
    };
    let old = match old_node.map(|n| read_value(inv.graph, n)) {
        Some(Ok(Value::Constraint(c))) => c,
        Some(Ok(other)) => {
            return Err(ExceptionValue::type_error(format!(
                "reviseConstraint target is not a constraint: {}",
                other.canonical()
            )))
        }
        Some(Err(e)) => return Err(ExceptionValue::type_error(e.to_string())),
        None => Constraint::always_true(),
    };
    let merged = merge_constraints(&old, &new).map_err(|e| ExceptionValue::new("TypeMismatch", e.to_string()))?;
    materialize_target(inv.graph, &location.target, provenance).map_err(graph_exception)?;
    let rendered = render_merged(inv.graph, old_node, new_node, &merged, provenance).map_err(graph_exception)?;
    let root = copy_path(inv.graph, &location, rendered, provenance).map_err(graph_exception)?;
    Ok(Return::Node(root))
}

/// Keyword for `field` as written in constructor `ctor`.
fn written_keyword(ctor: &str, field: &str) -> String {
    alias(ctor)
        .and_then(|a| a.renames.iter().find(|(_, to)| *to == field))
        .map_or(field, |(from, _)| from)
        .to_string()
}

/// Constructor arguments aligned one-to-one with constraint clauses, if the
/// node was written as a typed constraint constructor.
fn clause_args(graph: &DataflowGraph, node: NodeId, clauses: usize) -> Option<(String, Vec<(Option<String>, NodeId)>)> {
    let n = graph.get(node);
    let Label::Constructor { name, type_arg } = &n.label else {
        return None;
    };
    match constraint_form(name, type_arg.as_ref())? {
        ConstraintForm::Typed(_) if n.args.len() == clauses => Some((name.clone(), n.args.clone())),
        _ => None,
    }
}

/// Builds the merged constraint as a constructor reusing the argument nodes
/// of surviving clauses, or as a single literal when that is not possible.
fn render_merged(graph: &mut DataflowGraph, old: Option<NodeId>, new: NodeId, merged: &Merged, provenance: Provenance) -> Result<NodeId, GraphError> {
    let old_clauses = match old.map(|n| read_value(graph, n)) {
        Some(Ok(Value::Constraint(c))) => c.clauses.len(),
        _ => 0,
    };
    let new_clauses = match read_value(graph, new) {
        Ok(Value::Constraint(c)) => c.clauses.len(),
        _ => usize::MAX,
    };
    let old_parts = old.and_then(|n| clause_args(graph, n, old_clauses));
    let new_parts = clause_args(graph, new, new_clauses);
    let (ctor, type_arg) = match (old.map(|n| &graph.get(n).label), &new_parts) {
        (Some(Label::Constructor { name, type_arg }), _) if old_parts.is_some() => (name.clone(), type_arg.clone()),
        (_, Some(_)) => match &graph.get(new).label {
            Label::Constructor { name, type_arg } => (name.clone(), type_arg.clone()),
            _ => unreachable!("clause_args only accepts constructors"),
        },
        _ => return materialize(graph, &Value::Constraint(merged.constraint.clone()), provenance),
    };
    let mut args = vec![];
    if !merged.kept_old.is_empty() {
        let Some((_, old_args)) = &old_parts else {
            return materialize(graph, &Value::Constraint(merged.constraint.clone()), provenance);
        };
        args.extend(merged.kept_old.iter().map(|&i| old_args[i].clone()));
    }
    if merged.new_included {
        let Some((new_ctor, new_args)) = &new_parts else {
            return materialize(graph, &Value::Constraint(merged.constraint.clone()), provenance);
        };
        for (k, a) in new_args {
            let k = k
                .as_deref()
                .map(|k| written_keyword(&ctor, canonical_keyword(new_ctor, k)));
            args.push((k, *a));
        }
    }
    graph.add_node(Label::Constructor { name: ctor, type_arg }, args, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{evaluate_turn, EvalOptions, Outcome};
    use crate::library::WorldState;
    use crate::program::{extend_graph, parse};
    use crate::value::read_value;

    struct Dialogue {
        graph: DataflowGraph,
        registry: Registry,
        world: WorldState,
        turn: usize,
    }

    impl Dialogue {
        fn new() -> Self {
            let mut registry = Registry::new();
            install(&mut registry).unwrap();
            registry
                .register(FunctionDef::new(
                    "inc",
                    vec![Param::new("x", TypeTag::named("Number"))],
                    TypeTag::named("Number"),
                    FunctionKind::Pure,
                    |inv| Ok(Return::Value(Value::Num(inv.num("x")? + 1.0))),
                ))
                .unwrap();
            registry
                .register(FunctionDef::new(
                    "pair",
                    vec![
                        Param::new("left", TypeTag::named("Number")),
                        Param::new("right", TypeTag::named("Number")).optional(),
                    ],
                    TypeTag::named("Number"),
                    FunctionKind::Pure,
                    |inv| Ok(Return::Value(Value::Num(inv.num("left")? * 10.0 + inv.value("right").and_then(|v| v.as_num()).unwrap_or(0.0)))),
                ))
                .unwrap();
            Dialogue {
                graph: DataflowGraph::new(),
                registry,
                world: WorldState::default(),
                turn: 0,
            }
        }

        fn say(&mut self, text: &str) -> (NodeId, Outcome) {
            let root = extend_graph(&mut self.graph, &parse(text).unwrap(), self.turn, Speaker::User).unwrap();
            let ev = evaluate_turn(&mut self.graph, root, &self.registry, &HeuristicSalience::default(), &mut self.world, &EvalOptions::default());
            let agent = match &ev.outcome {
                Outcome::Value(n) => *n,
                Outcome::Raised(e) => e.source.unwrap_or(root),
            };
            self.graph.push_turn_root(self.turn + 1, Speaker::Agent, agent).unwrap();
            self.turn += 2;
            (root, ev.outcome)
        }

        fn value(&mut self, text: &str) -> Value {
            match self.say(text).1 {
                Outcome::Value(n) => read_value(&self.graph, n).unwrap(),
                Outcome::Raised(e) => panic!("{text}: {e}"),
            }
        }
    }

    #[test]
    fn refer_picks_previous_root_first() {
        let mut d = Dialogue::new();
        d.value("inc(4)");
        assert_eq!(d.value("inc(refer())"), Value::Num(6.0));
    }

    #[test]
    fn refer_result_edge_points_at_prior_node() {
        let mut d = Dialogue::new();
        let (first, _) = d.say("inc(1)");
        let (second, _) = d.say("inc(refer())");
        let refer = d.graph.get(second).args[0].1;
        assert_eq!(d.graph.get(refer).result, Some(first));
    }

    #[test]
    fn refer_without_candidates_raises() {
        let mut d = Dialogue::new();
        let (_, out) = d.say("inc(refer())");
        assert!(matches!(out, Outcome::Raised(e) if e.kind == "EmptyRefer"));
    }

    #[test]
    fn revise_substitutes_and_shares() {
        let mut d = Dialogue::new();
        let (root, _) = d.say("pair(left=inc(1), right=inc(5))");
        let before = d.graph.len();
        let right = d.graph.get(root).args[1].1;
        let v = d.value("revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(left), new=7)");
        assert_eq!(v, Value::Num(76.0));
        let copies: Vec<_> = d
            .graph
            .nodes()
            .filter(|(_, n)| n.provenance.origin == Origin::GenerationExtension)
            .collect();
        assert_eq!(copies.len(), 1);
        assert_eq!(copies[0].1.args[1].1, right);
        assert!(before < d.graph.len());
    }

    #[test]
    fn revise_fills_missing_argument() {
        let mut d = Dialogue::new();
        d.value("pair(left=2)");
        let v = d.value("revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(right), new=3)");
        assert_eq!(v, Value::Num(23.0));
        assert!(d.graph.nodes().any(|(_, n)| matches!(n.label, Label::Missing(_))));
    }

    #[test]
    fn revise_of_revise_follows_results() {
        let mut d = Dialogue::new();
        d.value("pair(left=2, right=inc(0))");
        d.value("revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(left), new=5)");
        let v = d.value("revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(right), new=9)");
        assert_eq!(v, Value::Num(59.0));
    }

    #[test]
    fn revise_at_root_returns_new() {
        let mut d = Dialogue::new();
        d.say("inc(1)");
        let (root, out) = d.say("revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[Number](), new=inc(8))");
        let new = d.graph.get(root).arg("new").unwrap();
        assert_eq!(d.graph.get(root).result, Some(new));
        assert!(matches!(out, Outcome::Value(_)));
    }

    #[test]
    fn revise_without_history_raises() {
        let mut d = Dialogue::new();
        let (_, out) = d.say("revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[Number](), new=1)");
        assert!(matches!(out, Outcome::Raised(e) if e.kind == "NoRootMatch"));
        let (_, out) = d.say("revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[String](), new=1)");
        assert!(matches!(out, Outcome::Raised(e) if e.kind == "NoOldMatch"));
    }

    #[test]
    fn salience_prefers_recent_ties() {
        let mut d = Dialogue::new();
        d.value("pair(left=1, right=2)");
        let ranked = salience_rank(&d.graph, &Constraint::typed(TypeTag::named("Number")), d.turn, 6);
        let root = d.graph.turn_roots()[0].root;
        assert_eq!(ranked[0], root);
        assert_eq!(ranked.len(), d.graph.len());
    }

    #[test]
    fn lookback_bounds_the_window() {
        let mut d = Dialogue::new();
        d.value("inc(1)");
        d.value("'x'");
        d.value("'y'");
        let number = Constraint::typed(TypeTag::named("Number"));
        assert!(!salience_rank(&d.graph, &number, d.turn, 6).is_empty());
        assert!(salience_rank(&d.graph, &number, d.turn, 2).is_empty());
    }
}
