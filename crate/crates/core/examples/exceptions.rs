//! Exceptions as first-class outcomes: an invalid date is repaired by revising
//! it, and missing slots are filled one at a time.

use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();

    let mut session = Session::standard(world.clone());
    for program in [
        "findEvent(EventSpec(start=DateTimeSpec(month=feb, day=30)))",
        "revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[DateTimeSpec](), new=DateTimeSpec(month=feb, day=28))",
    ] {
        let report = session.user_text(program).unwrap();
        println!("program: {program}");
        println!("outcome: {}", session.outcome_text(report.outcome()));
        println!("agent:   {}\n", report.response);
    }

    let mut session = Session::standard(world);
    for program in [
        "createEvent()",
        "revise(rootLoc=RoleConstraint(output), oldLoc=RoleConstraint(name), new='Planning meeting')",
    ] {
        let report = session.user_text(program).unwrap();
        println!("program: {program}");
        println!("outcome: {}", session.outcome_text(report.outcome()));
        println!("agent:   {}\n", report.response);
    }
}
