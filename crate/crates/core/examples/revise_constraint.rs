//! Refine an event under construction by merging a new constraint into the
//! one the user gave earlier, then confirm it.

use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let mut session = Session::standard(world);
    let turns = [
        "createCommitEventWrapper(createPreflightEventWrapper(EventBuilder(subject='go to the airport', start=dateAtTime(date=tomorrow(), time=numberAM(8)))))",
        "reviseConstraint(rootLoc=RoleConstraint(output), oldLoc=Constraint[EventBuilder](), new=EventBuilder(location=LocationKeyphrase('LaGuardia Airport')))",
        "confirmAndReturnAction()",
    ];
    for program in turns {
        let report = session.user_text(program).unwrap();
        println!("program: {program}");
        println!("value:   {}", session.outcome_text(report.outcome()));
        println!("agent:   {}\n", report.response);
    }
    for event in &session.world().events {
        println!("{event:?}");
    }
}
