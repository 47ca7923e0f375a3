//! Extend the standard library with a new record type and function, then use
//! them with `refer` and `revise` like any built-in.

use std::sync::Arc;

use dataflow_dialogue::evaluator::{FunctionDef, FunctionKind, Param, RecordType, Registry, Return};
use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::metacompute::HeuristicSalience;
use dataflow_dialogue::session::Session;
use dataflow_dialogue::types::TypeTag;
use dataflow_dialogue::value::Value;

fn main() {
    let mut registry = Registry::standard();
    registry
        .register_record(RecordType::new("Pizza", vec![("size", TypeTag::named("Number")), ("topping", TypeTag::named("String"))]))
        .unwrap();
    registry
        .register(FunctionDef::new(
            "price",
            vec![Param::new("pizza", TypeTag::named("Pizza"))],
            TypeTag::named("Number"),
            FunctionKind::Pure,
            |inv| {
                let pizza = inv.require("pizza")?;
                let size = pizza.field("size").and_then(|v| v.as_num()).unwrap_or(0.0);
                let extra = if pizza.field("topping").and_then(|v| v.text()).is_some() { 2.0 } else { 0.0 };
                Ok(Return::Value(Value::Num(size * 0.75 + extra)))
            },
        ))
        .unwrap();

    let world = WorldState::from_json(r#"{"clock": "2020-04-20T08:00:00"}"#).unwrap();
    let mut session = Session::new(Arc::new(registry), world, Arc::new(HeuristicSalience::default()));
    for program in [
        "price(Pizza(size=12, topping='olives'))",
        "revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(size), new=16)",
        "+(refer(Constraint[Number]()), 1)",
    ] {
        let report = session.user_text(program).unwrap();
        println!("{program}\n  => {}", session.outcome_text(report.outcome()));
    }
}
