//! Resolve `refer` calls against salient earlier computations.

use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::Session;

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let mut session = Session::standard(world);
    let turns = [
        ("What's on my calendar this morning?", "findEvent(EventSpec(start=and(today(), during(morning()))))"),
        ("What's after that?", "findEvent(EventSpec(start=after(end(refer(Constraint[Event]())))))"),
        ("How many people are at the 9 am one?", "length(attendees(refer(Constraint[Event](start=am(9)))))"),
    ];
    for (utterance, program) in turns {
        let report = session.user_text(program).unwrap();
        println!("user:    {utterance}");
        println!("program: {program}");
        println!("value:   {}", session.outcome_text(report.outcome()));
        println!("agent:   {}\n", report.response);
    }
}
