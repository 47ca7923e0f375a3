//! Replace `refer` and `revise` with the computations they resolve to, and
//! export a dialogue as source/target token sequences.

use dataflow_dialogue::inliner::{export_dataset, inline_script, ExportOptions, Mode};
use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::program::print;
use dataflow_dialogue::session::{Script, Session};

fn main() {
    let world = WorldState::from_json(include_str!("../data/fixtures/calendar.json")).unwrap();
    let script = Script::from_jsonl(include_str!("../data/scripts/retreat.jsonl")).unwrap();

    let mut session = Session::standard(world.clone());
    let inlined = inline_script(&script, &mut session).unwrap();
    for (line, program) in script.user_programs().zip(&inlined) {
        println!("dataflow: {}", line.program.as_deref().unwrap_or_default());
        println!("inlined:  {}\n", print(program));
    }

    for mode in [Mode::Dataflow, Mode::Inlined] {
        let options = ExportOptions {
            mode,
            ..ExportOptions::default()
        };
        let records = export_dataset(&[("retreat".to_string(), script.clone())], &world, &options).unwrap();
        let last = records.last().unwrap();
        println!("{mode:?} turn {}:", last.turn);
        println!("  source: {}", last.source_tokens.join(" "));
        println!("  target: {}", last.target_tokens.join(" "));
    }
}
