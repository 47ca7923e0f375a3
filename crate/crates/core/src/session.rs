//! A dialogue session: graph, world and registry, plus dialogue scripts and replay.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{describe_outcome, evaluate_turn, EvalOptions, Evaluation, Outcome, Registry};
use crate::graph::{DataflowGraph, NodeId, Speaker};
use crate::library::WorldState;
use crate::metacompute::{HeuristicSalience, Salience};
use crate::program::{extend_graph, parse, print_expression, ExtendError, ParseError, Program};
use crate::value::read_value;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("line {line}: malformed script record: {source}")]
    Script { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Expected { line: usize, message: String },
    #[error(transparent)]
    Extend(#[from] ExtendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct Session {
    graph: DataflowGraph,
    registry: Arc<Registry>,
    world: WorldState,
    salience: Arc<dyn Salience>,
    next_turn: usize,
    pub options: EvalOptions,
}

#[derive(Debug, Clone)]
pub struct TurnReport {
    pub turn: usize,
    pub root: NodeId,
    pub evaluation: Evaluation,
    pub response: String,
}

impl TurnReport {
    pub fn outcome(&self) -> &Outcome {
        &self.evaluation.outcome
    }
}

impl Session {
    pub fn new(registry: Arc<Registry>, world: WorldState, salience: Arc<dyn Salience>) -> Self {
        Session {
            graph: DataflowGraph::new(),
            registry,
            world,
            salience,
            next_turn: 0,
            options: EvalOptions::default(),
        }
    }

    /// Standard library with the default salience model.
    pub fn standard(world: WorldState) -> Self {
        Self::new(Arc::new(Registry::standard()), world, Arc::new(HeuristicSalience::default()))
    }

    pub fn graph(&self) -> &DataflowGraph {
        &self.graph
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn salience(&self) -> &dyn Salience {
        &*self.salience
    }

    pub fn next_turn(&self) -> usize {
        self.next_turn
    }

    /// Adds and evaluates a user program, then records the agent's turn whose
    /// root is the outcome node.
    pub fn user_turn(&mut self, program: &Program) -> Result<TurnReport, SessionError> {
        let turn = self.next_turn;
        let root = extend_graph(&mut self.graph, program, turn, Speaker::User)?;
        let evaluation = evaluate_turn(&mut self.graph, root, &self.registry, &*self.salience, &mut self.world, &self.options);
        let agent_root = match &evaluation.outcome {
            Outcome::Value(n) => *n,
            Outcome::Raised(e) => e.source.unwrap_or(root),
        };
        self.graph
            .push_turn_root(turn + 1, Speaker::Agent, agent_root)
            .map_err(ExtendError::from)?;
        self.next_turn = turn + 2;
        let response = describe_outcome(&evaluation.outcome, &self.graph);
        Ok(TurnReport {
            turn,
            root,
            evaluation,
            response,
        })
    }

    pub fn user_text(&mut self, text: &str) -> Result<TurnReport, SessionError> {
        let program = parse(text).map_err(|source| SessionError::Parse { line: 0, source })?;
        self.user_turn(&program)
    }

    /// Canonical text of a turn outcome: the printed value, or `raises Kind(path)`.
    pub fn outcome_text(&self, outcome: &Outcome) -> String {
        match outcome {
            Outcome::Value(n) => read_value(&self.graph, *n).map_or_else(|e| format!("<{e}>"), |v| v.canonical()),
            Outcome::Raised(e) => match &e.path {
                Some(p) => format!("raises {}({p})", e.kind),
                None => format!("raises {}", e.kind),
            },
        }
    }
}

/// Expected outcome of a scripted user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Value {
        value: String,
    },
    Raises {
        raises: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<Vec<String>>,
    },
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Value { value } => f.write_str(value),
            Expected::Raises { raises, path: Some(p) } => write!(f, "raises {raises}({})", p.join(".")),
            Expected::Raises { raises, path: None } => write!(f, "raises {raises}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
    pub speaker: Speaker,
    #[serde(default)]
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

/// A dialogue script: one JSON record per utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

impl Script {
    pub fn from_jsonl(text: &str) -> Result<Self, SessionError> {
        let mut lines = vec![];
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ScriptLine = serde_json::from_str(raw).map_err(|source| SessionError::Script { line: i + 1, source })?;
            if line.speaker == Speaker::User {
                let Some(p) = &line.program else {
                    return Err(SessionError::Expected {
                        line: i + 1,
                        message: "user turns need a program".into(),
                    });
                };
                parse(p).map_err(|source| SessionError::Parse { line: i + 1, source })?;
            }
            lines.push(line);
        }
        Ok(Script { lines })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn user_programs(&self) -> impl Iterator<Item = &ScriptLine> {
        self.lines.iter().filter(|l| l.speaker == Speaker::User)
    }
}

#[derive(Debug, Clone)]
pub struct TurnCheck {
    pub turn: usize,
    pub utterance: String,
    pub program: String,
    pub actual: String,
    pub response: String,
    pub expected: Option<Expected>,
    pub passed: bool,
    pub trace: Vec<crate::evaluator::TraceEntry>,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub turns: Vec<TurnCheck>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.turns.iter().all(|t| t.passed)
    }
}

fn expected_matches(expected: &Expected, actual: &Outcome, session: &Session) -> bool {
    match (expected, actual) {
        (Expected::Value { value }, Outcome::Value(_)) => {
            let want = crate::program::parse_expression(value).map_or_else(|_| value.clone(), |e| print_expression(&e));
            session.outcome_text(actual) == want
        }
        (Expected::Raises { raises, path }, Outcome::Raised(e)) => {
            e.kind == *raises && path.as_ref().is_none_or(|p| e.path.as_ref().map(|k| &k.0) == Some(p))
        }
        _ => false,
    }
}

/// Runs every user turn of `script` in order and checks expectations.
pub fn replay(script: &Script, session: &mut Session) -> Result<ReplayReport, SessionError> {
    let mut turns = vec![];
    for (i, line) in script.lines.iter().enumerate() {
        if line.speaker != Speaker::User {
            continue;
        }
        let text = line.program.as_deref().expect("validated on load");
        let program = parse(text).map_err(|source| SessionError::Parse { line: i + 1, source })?;
        let report = session.user_turn(&program)?;
        let actual = session.outcome_text(report.outcome());
        let passed = line
            .expected
            .as_ref()
            .is_none_or(|e| expected_matches(e, report.outcome(), session));
        turns.push(TurnCheck {
            turn: report.turn,
            utterance: line.utterance.clone(),
            program: text.to_string(),
            actual,
            response: report.response,
            expected: line.expected.clone(),
            passed,
            trace: report.evaluation.trace,
        });
    }
    Ok(ReplayReport { turns })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCRIPT: &str = r#"
{"turn": 0, "speaker": "user", "utterance": "now", "program": "now()", "expected": {"value": "DateTime(date=Date(year=2020, month=apr, day=20), time=Time(hour=8, minute=0))"}}
{"turn": 1, "speaker": "agent", "utterance": "It is 8 am."}
{"turn": 2, "speaker": "user", "utterance": "fence", "program": "fenceNavigation()", "expected": {"raises": "FenceException"}}
"#;

    fn world() -> WorldState {
        WorldState::from_json(r#"{"clock": "2020-04-20T08:00:00"}"#).unwrap()
    }

    #[test]
    fn replays_and_checks_expectations() {
        let script = Script::from_jsonl(SCRIPT).unwrap();
        let mut session = Session::standard(world());
        let report = replay(&script, &mut session).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.turns[1].response, "I can't answer questions about transit.");
        let roots: Vec<_> = session.graph().turn_roots().iter().map(|t| (t.turn, t.speaker)).collect();
        assert_eq!(roots, vec![(0, Speaker::User), (1, Speaker::Agent), (2, Speaker::User), (3, Speaker::Agent)]);
    }

    #[test]
    fn mismatches_are_reported() {
        let script = Script::from_jsonl(&SCRIPT.replace("hour=8", "hour=9")).unwrap();
        let report = replay(&script, &mut Session::standard(world())).unwrap();
        assert!(!report.passed());
        assert!(!report.turns[0].passed);
    }

    #[test]
    fn bad_programs_are_rejected_on_load() {
        let bad = r#"{"speaker": "user", "program": "foo(a=1, 2)"}"#;
        assert!(matches!(Script::from_jsonl(bad), Err(SessionError::Parse { line: 1, .. })));
    }
}
