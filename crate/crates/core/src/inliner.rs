//! Rewrites programs so that `refer` and `revise` calls are replaced by the
//! computations they resolved to, and exports per-turn training records.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::Registry;
use crate::graph::{DataflowGraph, Label, NodeId, Speaker};
use crate::library::WorldState;
use crate::metacompute::HeuristicSalience;
use crate::program::{linearize, parse, Arg, Expression, Program};
use crate::session::{Script, Session, SessionError};
use crate::value::{read_value, value_to_expr};

#[derive(Debug, Error)]
pub enum InlineError {
    #[error("{function} at node {node} did not resolve")]
    Unresolved { function: String, node: NodeId },
    #[error("cannot read value of node {0}: {1}")]
    Value(NodeId, String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Inlines `program` as it would be evaluated after `history`. The history
/// itself is left untouched.
pub fn inline_turn(history: &Session, program: &Program) -> Result<Program, InlineError> {
    let mut session = history.clone();
    let report = session.user_turn(program)?;
    let expr = inline_node(session.graph(), session.registry(), report.root)?;
    Ok(Program::new(expr))
}

/// Program text for the computation rooted at `root`, with `refer` and
/// `revise` replaced by their results. `reviseConstraint` is kept.
pub fn inline_node(graph: &DataflowGraph, registry: &Registry, root: NodeId) -> Result<Expression, InlineError> {
    let producers = producers(graph, registry);
    Inliner { graph, producers: &producers }.expr(root)
}

/// For each node that is the result of an ordinary call, the call that produced it.
fn producers(graph: &DataflowGraph, registry: &Registry) -> HashMap<NodeId, NodeId> {
    let mut map = HashMap::new();
    for (id, node) in graph.nodes() {
        if registry.is_metacomputation(&node.label) {
            continue;
        }
        if let Some(r) = node.result.filter(|r| *r != id) {
            map.entry(r).or_insert(id);
        }
    }
    map
}

struct Inliner<'a> {
    graph: &'a DataflowGraph,
    producers: &'a HashMap<NodeId, NodeId>,
}

impl Inliner<'_> {
    fn expr(&self, id: NodeId) -> Result<Expression, InlineError> {
        let node = self.graph.get(id);
        match &node.label {
            Label::Call(name) if name == "refer" || name == "revise" => {
                let target = node.result.ok_or_else(|| InlineError::Unresolved {
                    function: name.clone(),
                    node: id,
                })?;
                self.expr(self.defining(target))
            }
            Label::Call(name) => Ok(Expression::call(name.clone(), self.args(id)?)),
            Label::Constructor { name, type_arg } => Ok(match type_arg {
                Some(t) => Expression::typed_call(name.clone(), t.clone(), self.args(id)?),
                None => Expression::call(name.clone(), self.args(id)?),
            }),
            Label::List => Ok(Expression::List(
                self.args(id)?.into_iter().map(|a| a.value).collect(),
            )),
            Label::Enum(e) => Ok(Expression::Enum(e.clone())),
            Label::Literal(_) | Label::Missing(_) => read_value(self.graph, id)
                .map(|v| value_to_expr(&v))
                .map_err(|e| InlineError::Value(id, e.to_string())),
        }
    }

    /// The outermost ordinary call whose result chain reaches `node`.
    fn defining(&self, mut node: NodeId) -> NodeId {
        while let Some(p) = self.producers.get(&node) {
            node = *p;
        }
        node
    }

    fn args(&self, id: NodeId) -> Result<Vec<Arg>, InlineError> {
        self.graph
            .get(id)
            .args
            .iter()
            .map(|(k, a)| {
                Ok(Arg {
                    keyword: k.clone(),
                    value: self.expr(*a)?,
                })
            })
            .collect()
    }
}

/// True if the program still contains `refer` or `revise`.
pub fn has_inlinable_calls(program: &Program) -> bool {
    program.expr.mentions("refer") || program.expr.mentions("revise")
}

/// Inlines every user turn of `script`, evaluating the original programs
/// in order so that later turns see the real history.
pub fn inline_script(script: &Script, session: &mut Session) -> Result<Vec<Program>, InlineError> {
    let mut out = vec![];
    for (i, line) in script.user_programs().enumerate() {
        let text = line.program.as_deref().unwrap_or_default();
        let program = parse(text).map_err(|source| SessionError::Parse { line: i + 1, source })?;
        out.push(inline_turn(session, &program)?);
        session.user_turn(&program)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dataflow,
    Inlined,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dataflow" => Ok(Mode::Dataflow),
            "inlined" => Ok(Mode::Inlined),
            _ => Err(format!("unknown mode {s:?} (expected dataflow or inlined)")),
        }
    }
}

/// What stands for the agent side of earlier turns in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgentContext {
    #[default]
    Program,
    Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub dialogue_id: String,
    pub turn: usize,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub mode: Mode,
    pub context: usize,
    pub agent: AgentContext,
    pub max_lookback: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            mode: Mode::Dataflow,
            context: 2,
            agent: AgentContext::Program,
            max_lookback: HeuristicSalience::default().max_lookback,
        }
    }
}

pub const USER_SEPARATOR: &str = "__User";
pub const AGENT_SEPARATOR: &str = "__Agent";

pub fn utterance_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

struct ExportTurn {
    turn: usize,
    utterance: String,
    target: Vec<String>,
    response: Vec<String>,
}

/// One record per user turn. The source holds the previous `context` turns'
/// utterances and agent sides followed by the current utterance, each
/// segment led by a speaker separator.
pub fn export_dataset(
    dialogues: &[(String, Script)],
    world: &WorldState,
    options: &ExportOptions,
) -> Result<Vec<ExportRecord>, InlineError> {
    let mut records = vec![];
    for (id, script) in dialogues {
        let turns = export_turns(script, world, options)?;
        for (i, t) in turns.iter().enumerate() {
            let mut source = vec![];
            for prev in &turns[i.saturating_sub(options.context)..i] {
                source.push(USER_SEPARATOR.to_string());
                source.extend(utterance_tokens(&prev.utterance));
                source.push(AGENT_SEPARATOR.to_string());
                match options.agent {
                    AgentContext::Program => source.extend(prev.target.iter().cloned()),
                    AgentContext::Response => source.extend(prev.response.iter().cloned()),
                }
            }
            source.push(USER_SEPARATOR.to_string());
            source.extend(utterance_tokens(&t.utterance));
            records.push(ExportRecord {
                dialogue_id: id.clone(),
                turn: t.turn,
                source_tokens: source,
                target_tokens: t.target.clone(),
            });
        }
    }
    Ok(records)
}

fn export_turns(script: &Script, world: &WorldState, options: &ExportOptions) -> Result<Vec<ExportTurn>, InlineError> {
    let inlined = match options.mode {
        Mode::Dataflow => None,
        Mode::Inlined => {
            let mut session = Session::new(
                Arc::new(Registry::standard()),
                world.clone(),
                Arc::new(HeuristicSalience::new(options.max_lookback)),
            );
            Some(inline_script(script, &mut session)?)
        }
    };
    let mut turns: Vec<ExportTurn> = vec![];
    let mut user_index = 0;
    for (i, line) in script.lines.iter().enumerate() {
        match line.speaker {
            Speaker::User => {
                let text = line.program.as_deref().unwrap_or_default();
                let program = match &inlined {
                    Some(p) => p[user_index].clone(),
                    None => parse(text).map_err(|source| SessionError::Parse { line: i + 1, source })?,
                };
                turns.push(ExportTurn {
                    turn: line.turn.unwrap_or(2 * user_index),
                    utterance: line.utterance.clone(),
                    target: linearize(&program),
                    response: vec![],
                });
                user_index += 1;
            }
            Speaker::Agent => {
                if let Some(last) = turns.last_mut() {
                    last.response.extend(utterance_tokens(&line.utterance));
                }
            }
        }
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> WorldState {
        WorldState::from_json(
            r#"{"clock": "2020-04-20T08:00:00", "events": [
                {"id": 1, "name": "retreat", "start": "2020-04-27T09:00:00", "end": "2020-04-27T17:00:00"},
                {"id": 2, "name": "retreat", "start": "2021-04-30T09:00:00", "end": "2021-04-30T17:00:00"}]}"#,
        )
        .unwrap()
    }

    fn inline_all(programs: &[&str]) -> Vec<String> {
        let mut session = Session::standard(world());
        programs
            .iter()
            .map(|p| {
                let program = parse(p).unwrap();
                let inlined = inline_turn(&session, &program).unwrap();
                session.user_turn(&program).unwrap();
                inlined.to_string()
            })
            .collect()
    }

    #[test]
    fn refer_and_revise_are_expanded() {
        let out = inline_all(&[
            "start(findEvent(EventSpec(name='retreat', start=after(now()))))",
            "dayOfWeek(refer())",
            "revise(new=DateTimeSpec(year=2021), oldLoc=Constraint[DateTimeSpec](), rootLoc=RoleConstraint(output))",
        ]);
        assert_eq!(out[1], "dayOfWeek(start(findEvent(EventSpec(name='retreat', start=after(now())))))");
        assert_eq!(out[2], "dayOfWeek(start(findEvent(EventSpec(name='retreat', start=DateTimeSpec(year=2021)))))");
    }

    #[test]
    fn plain_programs_are_unchanged() {
        let text = "start(findEvent(EventSpec(name='retreat', start=after(now()))))";
        assert_eq!(inline_all(&[text])[0], text);
    }

    #[test]
    fn unresolved_refer_is_an_error() {
        let session = Session::standard(world());
        let err = inline_turn(&session, &parse("dayOfWeek(refer(Constraint[DateTime]()))").unwrap());
        assert!(matches!(err, Err(InlineError::Unresolved { .. })), "{err:?}");
    }
}
