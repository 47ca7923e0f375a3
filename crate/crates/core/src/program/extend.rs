use thiserror::Error;

use super::{is_constructor_name, Expression, Program};
use crate::graph::{DataflowGraph, GraphError, Label, NodeId, Origin, Provenance, Speaker};
use crate::value::Value;

#[derive(Debug, Error, PartialEq)]
pub enum ExtendError {
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Adds one unevaluated node per AST node and records the root as the
/// utterance's turn root.
pub fn extend_graph(
    graph: &mut DataflowGraph,
    program: &Program,
    turn: usize,
    speaker: Speaker,
) -> Result<NodeId, ExtendError> {
    let provenance = Provenance::new(turn, Origin::UserProgram);
    let root = extend_graph_at(graph, &program.expr, provenance)?;
    graph.push_turn_root(turn, speaker, root)?;
    Ok(root)
}

/// Like [`extend_graph`] but without registering a turn root.
pub fn extend_graph_at(
    graph: &mut DataflowGraph,
    expr: &Expression,
    provenance: Provenance,
) -> Result<NodeId, ExtendError> {
    let (label, args) = match expr {
        Expression::Call {
            name,
            type_arg,
            args,
        } => {
            let mut ids = Vec::with_capacity(args.len());
            for arg in args {
                let id = extend_graph_at(graph, &arg.value, provenance)?;
                ids.push((arg.keyword.clone(), id));
            }
            let label = if is_constructor_name(name, type_arg.is_some()) {
                Label::Constructor {
                    name: name.clone(),
                    type_arg: type_arg.clone(),
                }
            } else {
                Label::Call(name.clone())
            };
            (label, ids)
        }
        Expression::Str(s) => (Label::Literal(Value::Str(s.clone())), vec![]),
        Expression::Num(n) => (Label::Literal(Value::Num(*n)), vec![]),
        Expression::Enum(name) => (Label::Enum(name.clone()), vec![]),
        Expression::List(items) => {
            let mut ids = Vec::with_capacity(items.len());
            for item in items {
                ids.push((None, extend_graph_at(graph, item, provenance)?));
            }
            (Label::List, ids)
        }
    };
    Ok(graph.add_node(label, args, provenance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EvalState;
    use crate::program::parse;

    #[test]
    fn adds_one_node_per_ast_node() {
        let mut g = DataflowGraph::new();
        let p = parse("start(findEvent(EventSpec(name='retreat', start=after(now()))))").unwrap();
        let root = extend_graph(&mut g, &p, 0, Speaker::User).unwrap();
        assert_eq!(g.len(), p.node_count());
        assert_eq!(g.len(), 6);
        assert_eq!(g.node(root).unwrap().label, Label::Call("start".into()));
        assert!(g.nodes().all(|(_, n)| n.state == EvalState::Unevaluated));
        assert_eq!(g.turn_roots().len(), 1);
    }

    #[test]
    fn no_cross_turn_dedup() {
        let mut g = DataflowGraph::new();
        let p = parse("now()").unwrap();
        let a = extend_graph(&mut g, &p, 0, Speaker::User).unwrap();
        let b = extend_graph(&mut g, &p, 2, Speaker::User).unwrap();
        assert_ne!(a, b);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn labels_follow_syntax() {
        let mut g = DataflowGraph::new();
        let p = parse("RoleConstraint([date, weekday])").unwrap();
        let root = extend_graph(&mut g, &p, 0, Speaker::User).unwrap();
        let node = g.node(root).unwrap();
        assert!(matches!(node.label, Label::Constructor { .. }));
        let list = g.node(node.args[0].1).unwrap();
        assert_eq!(list.label, Label::List);
        assert_eq!(list.args.len(), 2);
    }
}
