//! Build constraints, test values against them, and merge a revision into an
//! existing constraint.

use dataflow_dialogue::constraints::{holds, merge_constraints, Clause, Constraint};
use dataflow_dialogue::evaluator::Outcome;
use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;
use dataflow_dialogue::types::TypeTag;
use dataflow_dialogue::value::{read_value, Value};

fn evaluate(session: &mut Session, text: &str) -> Value {
    let report = session.user_text(text).unwrap();
    let Outcome::Value(n) = report.outcome() else {
        panic!("{text} raised {}", session.outcome_text(report.outcome()));
    };
    read_value(session.graph(), *n).unwrap()
}

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let mut session = Session::standard(world);

    let by_hand = Constraint::typed(TypeTag::named("Event")).with(Clause::PropertyEq {
        field: "name".into(),
        value: Value::str("lunch"),
    });
    println!("built by hand: {}", Value::Constraint(by_hand.clone()).canonical());

    let lunch = evaluate(&mut session, "findEvent(EventSpec(name='lunch'))");
    let dentist = evaluate(&mut session, "findEvent(EventSpec(name='dentist'))");
    println!("lunch satisfies it:   {}", holds(&by_hand, &lunch));
    println!("dentist satisfies it: {}", holds(&by_hand, &dentist));

    let Value::Constraint(old) = evaluate(&mut session, "EventSpec(name='sync', start=DateTimeSpec(weekday=monday))") else {
        unreachable!()
    };
    let Value::Constraint(new) = evaluate(&mut session, "EventSpec(start=DateTimeSpec(weekday=tuesday))") else {
        unreachable!()
    };
    let merged = merge_constraints(&old, &new).unwrap();
    println!("old:    {}", Value::Constraint(old).canonical());
    println!("new:    {}", Value::Constraint(new).canonical());
    println!("merged: {}", Value::Constraint(merged.constraint).canonical());
}
