//! Extend a dataflow graph with a program, evaluate it, and inspect the trace
//! and the resulting graph.

use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let mut session = Session::standard(world);
    session.options.trace = true;
    let report = session
        .user_text("+(start(findEvent(EventSpec(name='retreat', start=after(now())))), Days(1))")
        .unwrap();

    println!("evaluation order:");
    for entry in &report.evaluation.trace {
        println!("  {entry}");
    }
    println!("value: {}", session.outcome_text(report.outcome()));
    println!("agent: {}", report.response);
    println!("\ngraph:\n{}", session.graph().dump());
}
