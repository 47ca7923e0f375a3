//! Dialogue state as an append-only dataflow graph.
//!
//! Each user turn is a program in a small call-expression language. The
//! program extends the graph, is evaluated node by node, and may call the
//! metacomputation operators `refer`, `revise` and `reviseConstraint`, which
//! retrieve and rewrite computations from earlier turns.

pub mod cli;
pub mod constraints;
pub mod evaluator;
pub mod graph;
pub mod inliner;
pub mod library;
pub mod metacompute;
pub mod multiwoz;
pub mod program;
pub mod session;
pub mod types;
pub mod value;
