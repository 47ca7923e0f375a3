//! Revise an earlier computation: substitute a sub-computation, fill in a
//! missing argument, and share every unchanged node with the original.

use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;

fn show(session: &mut Session, program: &str) {
    let before = session.graph().len();
    let report = session.user_text(program).unwrap();
    println!("program: {program}");
    println!("value:   {}", session.outcome_text(report.outcome()));
    println!("agent:   {}", report.response);
    println!("nodes added: {}\n", session.graph().len() - before);
}

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let mut session = Session::standard(world.clone());

    println!("-- substitution of an existing constraint");
    show(&mut session, "start(findEvent(EventSpec(name='retreat', start=after(now()))))");
    show(&mut session, "revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[DateTimeSpec](), new=DateTimeSpec(year=2021))");

    println!("-- filling an argument that was never given");
    let mut session = Session::standard(world);
    show(&mut session, "start(findEvent(EventSpec(name='lunch')))");
    show(&mut session, "revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[DateTimeSpec], new=tomorrow())");
}
