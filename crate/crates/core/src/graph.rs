//! The append-only dataflow graph: labeled nodes, argument edges, and
//! at most one result edge per node.

use std::fmt;

use thiserror::Error;

use crate::evaluator::ExceptionValue;
use crate::program::{print_expression, TypeExpr};
use crate::types::TypeTag;
use crate::value::{value_to_expr, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Call(String),
    Constructor {
        name: String,
        type_arg: Option<TypeExpr>,
    },
    Literal(Value),
    Enum(String),
    List,
    /// An implicitly present argument, materialized on demand.
    Missing(TypeTag),
}

impl Label {
    pub fn name(&self) -> Option<&str> {
        match self {
            Label::Call(n) | Label::Constructor { name: n, .. } => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Call(n) => f.write_str(n),
            Label::Constructor { name, type_arg } => match type_arg {
                Some(t) => write!(f, "{name}[{t}]"),
                None => f.write_str(name),
            },
            Label::Literal(v) => f.write_str(&print_expression(&value_to_expr(v))),
            Label::Enum(n) => f.write_str(n),
            Label::List => f.write_str("[]"),
            Label::Missing(t) => write!(f, "missing:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalState {
    Unevaluated,
    Evaluated,
    Exception(ExceptionValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "user",
            Speaker::Agent => "agent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    UserProgram,
    EvaluationResult,
    GenerationExtension,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::UserProgram => "program",
            Origin::EvaluationResult => "result",
            Origin::GenerationExtension => "generated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub turn: usize,
    pub origin: Origin,
}

impl Provenance {
    pub fn new(turn: usize, origin: Origin) -> Self {
        Provenance { turn, origin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: Label,
    pub args: Vec<(Option<String>, NodeId)>,
    pub result: Option<NodeId>,
    pub state: EvalState,
    pub provenance: Provenance,
}

impl Node {
    pub fn arg(&self, keyword: &str) -> Option<NodeId> {
        self.args
            .iter()
            .find(|(k, _)| k.as_deref() == Some(keyword))
            .map(|(_, id)| *id)
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.result == Some(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurnRoot {
    pub turn: usize,
    pub speaker: Speaker,
    pub root: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node id {0}")]
    UnknownNodeId(NodeId),
    #[error("node {0} already has a result")]
    ResultAlreadySet(NodeId),
    #[error("result edge {from} -> {to} would close a cycle of result edges")]
    ResultCycle { from: NodeId, to: NodeId },
    #[error("turn roots must be strictly ordered: {turn} after {last}")]
    NotStrictlyOrdered { turn: usize, last: usize },
    #[error("node {0} is not evaluated")]
    Unresolved(NodeId),
    #[error("node {0} raised an exception")]
    ExceptionEncountered(NodeId),
}

/// Nodes are only ever appended; the one permitted mutation is setting a
/// node's result (or exception) exactly once.
#[derive(Debug, Clone, Default)]
pub struct DataflowGraph {
    nodes: Vec<Node>,
    users: Vec<Vec<(NodeId, usize)>>,
    turn_roots: Vec<TurnRoot>,
}

impl DataflowGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.index()).ok_or(GraphError::UnknownNodeId(id))
    }

    /// Panicking accessor for ids known to come from this graph.
    pub fn get(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    /// Nodes that take `id` as an argument, with the argument position.
    pub fn users(&self, id: NodeId) -> &[(NodeId, usize)] {
        self.users.get(id.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn turn_roots(&self) -> &[TurnRoot] {
        &self.turn_roots
    }

    /// Arguments must already exist, so argument edges always point to
    /// older nodes and can never close a cycle.
    pub fn add_node(
        &mut self,
        label: Label,
        args: Vec<(Option<String>, NodeId)>,
        provenance: Provenance,
    ) -> Result<NodeId, GraphError> {
        for (_, a) in &args {
            if !self.contains(*a) {
                return Err(GraphError::UnknownNodeId(*a));
            }
        }
        let id = NodeId(self.nodes.len() as u32);
        for (pos, (_, a)) in args.iter().enumerate() {
            self.users[a.index()].push((id, pos));
        }
        self.nodes.push(Node {
            label,
            args,
            result: None,
            state: EvalState::Unevaluated,
            provenance,
        });
        self.users.push(Vec::new());
        Ok(id)
    }

    pub fn set_result(&mut self, node: NodeId, result: NodeId) -> Result<(), GraphError> {
        if !self.contains(result) {
            return Err(GraphError::UnknownNodeId(result));
        }
        let n = self.node(node)?;
        if n.result.is_some() || n.state != EvalState::Unevaluated {
            return Err(GraphError::ResultAlreadySet(node));
        }
        if result != node {
            let mut cur = result;
            while let Some(next) = self.nodes[cur.index()].result {
                if next == node {
                    return Err(GraphError::ResultCycle { from: node, to: result });
                }
                if next == cur {
                    break;
                }
                cur = next;
            }
        }
        let n = &mut self.nodes[node.index()];
        n.result = Some(result);
        n.state = EvalState::Evaluated;
        Ok(())
    }

    pub fn set_exception(&mut self, node: NodeId, exception: ExceptionValue) -> Result<(), GraphError> {
        let n = self.node(node)?;
        if n.result.is_some() || n.state != EvalState::Unevaluated {
            return Err(GraphError::ResultAlreadySet(node));
        }
        self.nodes[node.index()].state = EvalState::Exception(exception);
        Ok(())
    }

    pub fn push_turn_root(&mut self, turn: usize, speaker: Speaker, root: NodeId) -> Result<(), GraphError> {
        self.node(root)?;
        if let Some(last) = self.turn_roots.last() {
            if turn <= last.turn {
                return Err(GraphError::NotStrictlyOrdered {
                    turn,
                    last: last.turn,
                });
            }
        }
        self.turn_roots.push(TurnRoot {
            turn,
            speaker,
            root,
        });
        Ok(())
    }

    /// Follows result edges to the terminal node.
    pub fn resolve_value(&self, node: NodeId) -> Result<NodeId, GraphError> {
        let mut cur = node;
        loop {
            let n = self.node(cur)?;
            match (&n.state, n.result) {
                (EvalState::Exception(_), _) => return Err(GraphError::ExceptionEncountered(cur)),
                (_, Some(r)) if r == cur => return Ok(cur),
                (_, Some(r)) => cur = r,
                (_, None) => return Err(GraphError::Unresolved(cur)),
            }
        }
    }

    /// Line-oriented snapshot, one node per line in id order.
    pub fn dump(&self) -> String {
        let mut speaker_of = std::collections::HashMap::new();
        for tr in &self.turn_roots {
            speaker_of.insert(tr.turn, tr.speaker);
        }
        let mut out = String::new();
        for (id, n) in self.nodes() {
            let args = n
                .args
                .iter()
                .map(|(k, a)| match k {
                    Some(k) => format!("{k}={a}"),
                    None => a.to_string(),
                })
                .collect::<Vec<_>>()
                .join(",");
            let result = n.result.map_or("-".to_string(), |r| r.to_string());
            let speaker = speaker_of
                .get(&n.provenance.turn)
                .copied()
                .unwrap_or(if n.provenance.turn % 2 == 0 {
                    Speaker::User
                } else {
                    Speaker::Agent
                });
            let state = match &n.state {
                EvalState::Unevaluated => "unevaluated".to_string(),
                EvalState::Evaluated => "evaluated".to_string(),
                EvalState::Exception(e) => format!("exception:{}", e.kind),
            };
            out.push_str(&format!(
                "{id}\t{}\t{args}\t{result}\t{}:{speaker}:{}\t{state}\n",
                n.label, n.provenance.turn, n.provenance.origin
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance::new(0, Origin::UserProgram)
    }

    #[test]
    fn add_and_resolve() {
        let mut g = DataflowGraph::new();
        let one = g.add_node(Label::Literal(Value::Num(1.0)), vec![], prov()).unwrap();
        assert_eq!(one, NodeId(0));
        let days = g
            .add_node(
                Label::Constructor {
                    name: "Days".into(),
                    type_arg: None,
                },
                vec![(None, one)],
                prov(),
            )
            .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.users(one), &[(days, 0)]);
        assert_eq!(
            g.add_node(Label::List, vec![(None, NodeId(9))], prov()),
            Err(GraphError::UnknownNodeId(NodeId(9)))
        );
        assert_eq!(g.resolve_value(one), Err(GraphError::Unresolved(one)));
        g.set_result(one, one).unwrap();
        assert_eq!(g.resolve_value(one), Ok(one));
        assert_eq!(g.set_result(one, one), Err(GraphError::ResultAlreadySet(one)));
        g.set_result(days, one).unwrap();
        assert_eq!(g.resolve_value(days), Ok(one));
    }

    #[test]
    fn result_cycles_rejected() {
        let mut g = DataflowGraph::new();
        let a = g.add_node(Label::Call("f".into()), vec![], prov()).unwrap();
        let b = g.add_node(Label::Call("g".into()), vec![], prov()).unwrap();
        g.set_result(b, a).unwrap();
        assert_eq!(g.set_result(a, b), Err(GraphError::ResultCycle { from: a, to: b }));
    }

    #[test]
    fn turn_roots_strictly_ordered() {
        let mut g = DataflowGraph::new();
        let a = g.add_node(Label::Enum("x".into()), vec![], prov()).unwrap();
        g.push_turn_root(0, Speaker::User, a).unwrap();
        g.push_turn_root(1, Speaker::Agent, a).unwrap();
        assert!(matches!(
            g.push_turn_root(1, Speaker::User, a),
            Err(GraphError::NotStrictlyOrdered { .. })
        ));
    }

    #[test]
    fn dump_format() {
        let mut g = DataflowGraph::new();
        let one = g.add_node(Label::Literal(Value::Num(1.0)), vec![], prov()).unwrap();
        let d = g
            .add_node(Label::Call("f".into()), vec![(Some("x".into()), one)], prov())
            .unwrap();
        g.set_result(one, one).unwrap();
        g.push_turn_root(0, Speaker::User, d).unwrap();
        assert_eq!(
            g.dump(),
            "0\t1\t\t0\t0:user:program\tevaluated\n1\tf\tx=0\t-\t0:user:program\tunevaluated\n"
        );
    }
}
