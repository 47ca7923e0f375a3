//! Topological evaluation of new graph nodes: argument binding, dispatch
//! through the function registry, result edges, and exceptions.

mod describe;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use describe::{describe_outcome, render_value};

use crate::constraints::{Constraint, KeyPath};
use crate::graph::{DataflowGraph, EvalState, Label, NodeId, Origin, Provenance};
use crate::library::WorldState;
use crate::metacompute::Salience;
use crate::types::{constraint_form, ConstraintForm, TypeTag};
use crate::value::{materialize, read_node_shallow, read_value, type_of, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionValue {
    pub kind: String,
    /// Names the parameter of the source node's function that caused it.
    pub path: Option<KeyPath>,
    pub details: Vec<(String, Value)>,
    pub message: String,
    pub source: Option<NodeId>,
}

impl ExceptionValue {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        ExceptionValue {
            kind: kind.to_string(),
            path: None,
            details: vec![],
            message: message.into(),
            source: None,
        }
    }

    pub fn with_path(mut self, keyword: &str) -> Self {
        self.path = Some(KeyPath::single(keyword));
        self
    }

    pub fn with_detail(mut self, key: &str, value: Value) -> Self {
        self.details.push((key.to_string(), value));
        self
    }

    pub fn detail(&self, key: &str) -> Option<&Value> {
        self.details.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        ExceptionValue::new("TypeError", message)
    }
}

impl fmt::Display for ExceptionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(p) = &self.path {
            write!(f, "({p})")?;
        }
        if !self.message.is_empty() {
            write!(f, ": {}", self.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// A terminal node.
    Value(NodeId),
    Raised(ExceptionValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Pure,
    Effectful,
    Constructor,
    Metacomputation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
    pub optional: bool,
    /// Not evaluated before dispatch.
    pub lazy: bool,
    /// Absorbs all remaining positional arguments.
    pub variadic: bool,
}

impl Param {
    pub fn new(name: &str, ty: TypeTag) -> Self {
        Param {
            name: name.to_string(),
            ty,
            optional: false,
            lazy: false,
            variadic: false,
        }
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }

    pub fn lazy(mut self) -> Self {
        self.lazy = true;
        self
    }

    pub fn variadic(mut self) -> Self {
        self.variadic = true;
        self.optional = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub params: Vec<Param>,
    pub ret: TypeTag,
}

impl Signature {
    pub fn new(params: Vec<Param>, ret: TypeTag) -> Self {
        Signature { params, ret }
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn positional(&self, pos: usize) -> Option<&Param> {
        self.params
            .get(pos)
            .or_else(|| self.params.last().filter(|p| p.variadic))
    }
}

pub enum Return {
    Value(Value),
    /// An existing or newly added node; it is evaluated next.
    Node(NodeId),
    SelfTerminal,
}

pub type Body = Arc<dyn Fn(&mut Invocation<'_>) -> Result<Return, ExceptionValue> + Send + Sync>;

#[derive(Clone)]
pub struct FunctionDef {
    pub name: String,
    pub signature: Signature,
    pub kind: FunctionKind,
    pub body: Body,
}

impl fmt::Debug for FunctionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionDef")
            .field("name", &self.name)
            .field("signature", &self.signature)
            .field("kind", &self.kind)
            .finish()
    }
}

impl FunctionDef {
    pub fn new<F>(name: &str, params: Vec<Param>, ret: TypeTag, kind: FunctionKind, body: F) -> Self
    where
        F: Fn(&mut Invocation<'_>) -> Result<Return, ExceptionValue> + Send + Sync + 'static,
    {
        FunctionDef {
            name: name.to_string(),
            signature: Signature::new(params, ret),
            kind,
            body: Arc::new(body),
        }
    }
}

pub type Validator<T> = Arc<dyn Fn(&T) -> Result<(), ExceptionValue> + Send + Sync>;

#[derive(Clone)]
pub struct RecordType {
    pub name: String,
    pub fields: Vec<(String, TypeTag)>,
    pub validator: Option<Validator<Value>>,
}

impl RecordType {
    pub fn new(name: &str, fields: Vec<(&str, TypeTag)>) -> Self {
        RecordType {
            name: name.to_string(),
            fields: fields.into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
            validator: None,
        }
    }

    pub fn with_validator<F>(mut self, f: F) -> Self
    where
        F: Fn(&Value) -> Result<(), ExceptionValue> + Send + Sync + 'static,
    {
        self.validator = Some(Arc::new(f));
        self
    }

    pub fn field_type(&self, name: &str) -> Option<&TypeTag> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("{0} is already registered")]
    Duplicate(String),
}

/// Functions, record types, and per-type constraint validators. Immutable
/// once built and shareable across sessions.
#[derive(Clone, Default)]
pub struct Registry {
    functions: HashMap<String, FunctionDef>,
    records: HashMap<String, RecordType>,
    constraint_validators: HashMap<String, Validator<Constraint>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Metacomputation operators plus the calendar, people, places and
    /// weather library.
    pub fn standard() -> Self {
        let mut r = Registry::new();
        crate::metacompute::install(&mut r).expect("fresh registry");
        crate::library::install(&mut r).expect("fresh registry");
        r
    }

    pub fn register(&mut self, def: FunctionDef) -> Result<(), RegistryError> {
        if self.functions.contains_key(&def.name) || self.records.contains_key(&def.name) {
            return Err(RegistryError::Duplicate(def.name));
        }
        self.functions.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn register_record(&mut self, record: RecordType) -> Result<(), RegistryError> {
        if self.functions.contains_key(&record.name) || self.records.contains_key(&record.name) {
            return Err(RegistryError::Duplicate(record.name));
        }
        self.records.insert(record.name.clone(), record);
        Ok(())
    }

    pub fn register_constraint_validator<F>(&mut self, base: &str, f: F)
    where
        F: Fn(&Constraint) -> Result<(), ExceptionValue> + Send + Sync + 'static,
    {
        self.constraint_validators.insert(base.to_string(), Arc::new(f));
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.get(name)
    }

    pub fn record(&self, name: &str) -> Option<&RecordType> {
        self.records.get(name)
    }

    pub fn kind_of(&self, name: &str) -> Option<FunctionKind> {
        self.function(name).map(|f| f.kind)
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    /// True when `label` dispatches to a metacomputation operator.
    pub fn is_metacomputation(&self, label: &Label) -> bool {
        label
            .name()
            .and_then(|n| self.kind_of(n))
            .is_some_and(|k| k == FunctionKind::Metacomputation)
    }

    /// Declared type of each named slot of a node, for missing-argument lookup.
    pub fn keyword_slots(&self, label: &Label) -> Vec<(String, TypeTag)> {
        let Some(name) = label.name() else {
            return vec![];
        };
        if let Some(f) = self.function(name) {
            return f
                .signature
                .params
                .iter()
                .filter(|p| !p.variadic)
                .map(|p| (p.name.clone(), p.ty.clone()))
                .collect();
        }
        let Label::Constructor { type_arg, .. } = label else {
            return vec![];
        };
        match constraint_form(name, type_arg.as_ref()) {
            Some(ConstraintForm::Typed(TypeTag::Named(base))) => {
                let renames = crate::types::alias(name).map_or(&[][..], |a| a.renames);
                self.record(&base)
                    .map(|r| {
                        r.fields
                            .iter()
                            .map(|(f, t)| {
                                let written = renames
                                    .iter()
                                    .find(|(_, to)| to == f)
                                    .map_or(f.as_str(), |(from, _)| from);
                                (written.to_string(), TypeTag::constraint(t.clone()))
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            }
            Some(_) => vec![],
            None => self
                .record(name)
                .map(|r| r.fields.clone())
                .unwrap_or_default(),
        }
    }
}

/// Everything a function body can see while it runs.
pub struct Invocation<'a> {
    pub graph: &'a mut DataflowGraph,
    pub world: &'a mut WorldState,
    pub registry: &'a Registry,
    pub salience: &'a dyn Salience,
    pub node: NodeId,
    pub turn: usize,
    bound: Vec<(String, Vec<NodeId>)>,
}

impl Invocation<'_> {
    pub fn arg_node(&self, name: &str) -> Option<NodeId> {
        self.arg_nodes(name).first().copied()
    }

    pub fn arg_nodes(&self, name: &str) -> &[NodeId] {
        self.bound
            .iter()
            .find(|(n, _)| n == name)
            .map_or(&[], |(_, ids)| ids.as_slice())
    }

    /// Value of a bound argument; absent and missing arguments read as `None`.
    pub fn value(&self, name: &str) -> Option<Value> {
        let id = self.arg_node(name)?;
        read_value(self.graph, id).ok().filter(|v| !v.is_missing())
    }

    pub fn values(&self, name: &str) -> Vec<Value> {
        self.arg_nodes(name)
            .iter()
            .filter_map(|id| read_value(self.graph, *id).ok())
            .collect()
    }

    pub fn require(&self, name: &str) -> Result<Value, ExceptionValue> {
        self.value(name)
            .ok_or_else(|| ExceptionValue::type_error(format!("argument {name} is required")))
    }

    pub fn num(&self, name: &str) -> Result<f64, ExceptionValue> {
        self.require(name)?
            .as_num()
            .ok_or_else(|| ExceptionValue::type_error(format!("argument {name} must be a number")))
    }

    pub fn constraint(&self, name: &str) -> Result<Constraint, ExceptionValue> {
        match self.require(name)? {
            Value::Constraint(c) => Ok(c),
            v => Err(ExceptionValue::type_error(format!(
                "argument {name} must be a constraint, got {}",
                v.canonical()
            ))),
        }
    }

    pub fn provenance(&self, origin: Origin) -> Provenance {
        Provenance::new(self.turn, origin)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub node: NodeId,
    pub label: String,
    pub args: Vec<String>,
    pub result: String,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}({})\t{}", self.node, self.label, self.args.join(", "), self.result)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
}

/// Evaluates every unevaluated node reachable from `root`. World changes are
/// rolled back when the turn raises.
pub fn evaluate_turn(
    graph: &mut DataflowGraph,
    root: NodeId,
    registry: &Registry,
    salience: &dyn Salience,
    world: &mut WorldState,
    options: &EvalOptions,
) -> Evaluation {
    let snapshot = world.clone();
    let turn = graph.get(root).provenance.turn;
    let mut ev = Evaluator {
        graph,
        registry,
        salience,
        world,
        turn,
        trace: options.trace.then(Vec::new),
        first_exception: None,
    };
    ev.eval(root);
    let outcome = match ev.graph.resolve_value(root) {
        Ok(t) => Outcome::Value(t),
        Err(_) => Outcome::Raised(
            ev.first_exception
                .clone()
                .or_else(|| blocking_exception(ev.graph, root))
                .unwrap_or_else(|| ExceptionValue::new("Unresolved", "evaluation did not complete")),
        ),
    };
    let trace = ev.trace.take().unwrap_or_default();
    if matches!(outcome, Outcome::Raised(_)) {
        *world = snapshot;
    }
    Evaluation { outcome, trace }
}

/// The exception, possibly from an earlier turn, that keeps `node` unresolved.
pub fn blocking_exception(graph: &DataflowGraph, node: NodeId) -> Option<ExceptionValue> {
    let mut stack = vec![node];
    let mut seen = std::collections::HashSet::new();
    while let Some(n) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        let node = graph.get(n);
        if let EvalState::Exception(e) = &node.state {
            return Some(e.clone());
        }
        if let Some(r) = node.result {
            if r != n {
                stack.push(r);
            }
        }
        stack.extend(node.args.iter().rev().map(|(_, a)| *a));
    }
    None
}

struct Evaluator<'a> {
    graph: &'a mut DataflowGraph,
    registry: &'a Registry,
    salience: &'a dyn Salience,
    world: &'a mut WorldState,
    turn: usize,
    trace: Option<Vec<TraceEntry>>,
    first_exception: Option<ExceptionValue>,
}

impl Evaluator<'_> {
    /// Returns whether `n` is resolvable afterwards.
    fn eval(&mut self, n: NodeId) -> bool {
        match &self.graph.get(n).state {
            EvalState::Exception(_) => return false,
            EvalState::Evaluated => {
                return match self.graph.resolve_value(n) {
                    Ok(_) => true,
                    Err(crate::graph::GraphError::Unresolved(m)) if m != n => self.eval(m),
                    Err(_) => false,
                }
            }
            EvalState::Unevaluated => {}
        }
        let node = self.graph.get(n).clone();
        let lazy = self.lazy_positions(&node);
        let mut ready = true;
        for (i, (_, a)) in node.args.iter().enumerate() {
            if !lazy.contains(&i) && !self.eval(*a) {
                ready = false;
            }
        }
        if !ready {
            return false;
        }
        match self.dispatch(n, &node) {
            Ok(ret) => {
                let target = match ret {
                    Return::SelfTerminal => n,
                    Return::Node(m) => m,
                    Return::Value(v) => {
                        match materialize(self.graph, &v, Provenance::new(self.turn, Origin::EvaluationResult)) {
                            Ok(m) => m,
                            Err(e) => return self.raise(n, &node, ExceptionValue::new("GraphError", e.to_string())),
                        }
                    }
                };
                if let Err(e) = self.graph.set_result(n, target) {
                    return self.raise(n, &node, ExceptionValue::new("GraphError", e.to_string()));
                }
                let ok = target == n || self.eval(target);
                self.record(n, &node, || {
                    if target == n {
                        "terminal".to_string()
                    } else {
                        format!("-> {target}")
                    }
                });
                ok
            }
            Err(exc) => self.raise(n, &node, exc),
        }
    }

    fn raise(&mut self, n: NodeId, node: &crate::graph::Node, mut exc: ExceptionValue) -> bool {
        exc.source = Some(n);
        if self.first_exception.is_none() {
            self.first_exception = Some(exc.clone());
        }
        let text = format!("raised {exc}");
        let _ = self.graph.set_exception(n, exc);
        self.record(n, node, || text.clone());
        false
    }

    fn record(&mut self, n: NodeId, node: &crate::graph::Node, result: impl Fn() -> String) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let graph = &*self.graph;
        let args = node
            .args
            .iter()
            .map(|(k, a)| {
                let v = read_value(graph, *a).map_or_else(|_| format!("#{a}"), |v| v.canonical());
                match k {
                    Some(k) => format!("{k}={v}"),
                    None => v,
                }
            })
            .collect();
        trace.push(TraceEntry {
            node: n,
            label: node.label.to_string(),
            args,
            result: result(),
        });
    }

    fn lazy_positions(&self, node: &crate::graph::Node) -> Vec<usize> {
        let Some(f) = node.label.name().and_then(|n| self.registry.function(n)) else {
            return vec![];
        };
        node.args
            .iter()
            .enumerate()
            .filter(|(i, (k, _))| {
                let p = match k {
                    Some(k) => f.signature.param(k),
                    None => f.signature.positional(*i),
                };
                p.is_some_and(|p| p.lazy)
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn dispatch(&mut self, n: NodeId, node: &crate::graph::Node) -> Result<Return, ExceptionValue> {
        match &node.label {
            Label::Literal(_) | Label::Enum(_) | Label::Missing(_) | Label::List => Ok(Return::SelfTerminal),
            Label::Call(name) => match self.registry.function(name) {
                Some(f) => self.call(n, node, f),
                None => Err(ExceptionValue::new("UnknownFunction", format!("no function named {name}"))),
            },
            Label::Constructor { name, type_arg } => {
                if let Some(f) = self.registry.function(name) {
                    return self.call(n, node, f);
                }
                let value = read_node_shallow(self.graph, n)
                    .map_err(|e| ExceptionValue::type_error(e.to_string()))?;
                match constraint_form(name, type_arg.as_ref()) {
                    Some(_) => {
                        if let Value::Constraint(c) = &value {
                            self.validate_constraint(c)?;
                        }
                        Ok(Return::SelfTerminal)
                    }
                    None => {
                        let Some(record) = self.registry.record(name) else {
                            return Err(ExceptionValue::new(
                                "UnknownFunction",
                                format!("no constructor named {name}"),
                            ));
                        };
                        check_record_fields(record, &value)?;
                        if let Some(v) = &record.validator {
                            v(&value)?;
                        }
                        Ok(Return::SelfTerminal)
                    }
                }
            }
        }
    }

    fn validate_constraint(&self, c: &Constraint) -> Result<(), ExceptionValue> {
        if let Some(TypeTag::Named(base)) = &c.base {
            if let Some(v) = self.registry.constraint_validators.get(base) {
                v(c)?;
            }
        }
        Ok(())
    }

    fn call(&mut self, n: NodeId, node: &crate::graph::Node, f: &FunctionDef) -> Result<Return, ExceptionValue> {
        let bound = bind(&f.signature, node).map_err(|m| ExceptionValue::new("ArityError", format!("{}: {m}", f.name)))?;
        for (name, ids) in &bound {
            let param = f.signature.param(name).expect("bound names come from the signature");
            if param.lazy {
                continue;
            }
            for id in ids {
                let v = read_value(self.graph, *id).map_err(|e| ExceptionValue::type_error(e.to_string()))?;
                if !v.is_missing() && !type_of(&v).conforms_to(&param.ty) {
                    return Err(ExceptionValue::type_error(format!(
                        "{}: argument {name} expects {}, got {}",
                        f.name,
                        param.ty,
                        type_of(&v)
                    ))
                    .with_detail("argument", Value::str(name.clone())));
                }
            }
        }
        let mut inv = Invocation {
            graph: self.graph,
            world: self.world,
            registry: self.registry,
            salience: self.salience,
            node: n,
            turn: self.turn,
            bound,
        };
        (f.body)(&mut inv)
    }
}

fn check_record_fields(record: &RecordType, value: &Value) -> Result<(), ExceptionValue> {
    let Value::Record { fields, .. } = value else {
        return Ok(());
    };
    for (i, (k, v)) in fields.iter().enumerate() {
        let ty = match k {
            Some(k) => record.field_type(k).ok_or_else(|| {
                ExceptionValue::new("ArityError", format!("{} has no field {k}", record.name))
            })?,
            None => match record.fields.get(i) {
                Some((_, t)) => t,
                None => {
                    return Err(ExceptionValue::new(
                        "ArityError",
                        format!("too many fields for {}", record.name),
                    ))
                }
            },
        };
        if !v.is_missing() && !type_of(v).conforms_to(ty) {
            return Err(ExceptionValue::type_error(format!(
                "{} field {} expects {ty}, got {}",
                record.name,
                k.as_deref().unwrap_or("#"),
                type_of(v)
            )));
        }
    }
    Ok(())
}

/// Positional arguments fill parameters in order, keywords by name.
fn bind(sig: &Signature, node: &crate::graph::Node) -> Result<Vec<(String, Vec<NodeId>)>, String> {
    let mut bound: Vec<(String, Vec<NodeId>)> = sig.params.iter().map(|p| (p.name.clone(), vec![])).collect();
    let mut pos = 0;
    for (k, a) in &node.args {
        let idx = match k {
            Some(k) => sig
                .params
                .iter()
                .position(|p| &p.name == k)
                .ok_or_else(|| format!("unexpected keyword {k}"))?,
            None => {
                let idx = if pos < sig.params.len() {
                    pos
                } else if sig.params.last().is_some_and(|p| p.variadic) {
                    sig.params.len() - 1
                } else {
                    return Err(format!("expected at most {} arguments", sig.params.len()));
                };
                pos += 1;
                idx
            }
        };
        if !sig.params[idx].variadic && !bound[idx].1.is_empty() {
            return Err(format!("{} given twice", sig.params[idx].name));
        }
        bound[idx].1.push(*a);
    }
    for (p, (_, ids)) in sig.params.iter().zip(&bound) {
        if !p.optional && ids.is_empty() {
            return Err(format!("missing argument {}", p.name));
        }
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Speaker;
    use crate::metacompute::HeuristicSalience;
    use crate::program::{extend_graph, parse};

    fn run(registry: &Registry, text: &str) -> (DataflowGraph, Outcome) {
        let mut g = DataflowGraph::new();
        let root = extend_graph(&mut g, &parse(text).unwrap(), 0, Speaker::User).unwrap();
        let mut world = WorldState::default();
        let ev = evaluate_turn(&mut g, root, registry, &HeuristicSalience::default(), &mut world, &EvalOptions::default());
        (g, ev.outcome)
    }

    fn numeric_registry() -> Registry {
        let mut r = Registry::new();
        r.register(FunctionDef::new(
            "add",
            vec![Param::new("x", TypeTag::named("Number")), Param::new("y", TypeTag::named("Number"))],
            TypeTag::named("Number"),
            FunctionKind::Pure,
            |inv| Ok(Return::Value(Value::Num(inv.num("x")? + inv.num("y")?))),
        ))
        .unwrap();
        r.register(FunctionDef::new(
            "fail",
            vec![],
            TypeTag::named("Number"),
            FunctionKind::Pure,
            |_| Err(ExceptionValue::new("Boom", "")),
        ))
        .unwrap();
        r
    }

    #[test]
    fn literal_is_its_own_value() {
        let (g, out) = run(&numeric_registry(), "2020");
        let Outcome::Value(t) = out else { panic!() };
        assert_eq!(read_value(&g, t).unwrap(), Value::Num(2020.0));
    }

    #[test]
    fn evaluates_nested_calls() {
        let (g, out) = run(&numeric_registry(), "add(add(1, 2), y=4)");
        let Outcome::Value(t) = out else { panic!("{out:?}") };
        assert_eq!(read_value(&g, t).unwrap(), Value::Num(7.0));
    }

    #[test]
    fn exceptions_block_downstream_only() {
        let (g, out) = run(&numeric_registry(), "add(add(1, 2), fail())");
        let Outcome::Raised(e) = out else { panic!() };
        assert_eq!(e.kind, "Boom");
        let states: Vec<_> = g.nodes().map(|(_, n)| n.state.clone()).collect();
        assert!(matches!(states[4], EvalState::Unevaluated));
        assert!(matches!(states[3], EvalState::Exception(_)));
        assert_eq!(states[2], EvalState::Evaluated);
    }

    #[test]
    fn arity_type_and_unknown_errors_become_outcomes() {
        let r = numeric_registry();
        let kind = |text| match run(&r, text).1 {
            Outcome::Raised(e) => e.kind,
            o => panic!("{o:?}"),
        };
        assert_eq!(kind("add(1)"), "ArityError");
        assert_eq!(kind("add(1, 2, 3)"), "ArityError");
        assert_eq!(kind("add(1, 'x')"), "TypeError");
        assert_eq!(kind("nope()"), "UnknownFunction");
        assert_eq!(kind("Nope(1)"), "UnknownFunction");
    }

    #[test]
    fn trace_lists_nodes_in_evaluation_order() {
        let r = numeric_registry();
        let mut g = DataflowGraph::new();
        let root = extend_graph(&mut g, &parse("add(1, 2)").unwrap(), 0, Speaker::User).unwrap();
        let mut world = WorldState::default();
        let ev = evaluate_turn(&mut g, root, &r, &HeuristicSalience::default(), &mut world, &EvalOptions { trace: true });
        let nodes: Vec<_> = ev.trace.iter().map(|t| t.node.0).collect();
        assert_eq!(nodes, vec![0, 1, 2]);
        assert_eq!(ev.trace[2].args, vec!["1", "2"]);
    }
}
