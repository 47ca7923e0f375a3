//! Convert slot-filling dialogues into dataflow programs, execute them back
//! into belief states, and score the result.

use dataflow_dialogue::multiwoz::{convert_dialogue, execute_to_state, score, synthesize, Schema, SynthOptions};
use dataflow_dialogue::program::print;

fn main() {
    let schema = Schema::from_json(include_str!("../data/multiwoz/schema.json")).unwrap();
    let dialogues = synthesize(
        &schema,
        &SynthOptions {
            dialogues: 50,
            seed: 11,
            ..SynthOptions::default()
        },
    );

    let (mut predicted, mut gold, mut refers) = (vec![], vec![], 0);
    for (i, d) in dialogues.iter().enumerate() {
        let converted = convert_dialogue(&d.turns, &schema).unwrap();
        refers += converted.refer_count();
        if i == 0 {
            for (turn, program) in d.turns.iter().zip(&converted.programs) {
                println!("user:    {}", turn.utterance);
                println!("program: {}", program.as_ref().map_or("(no change)".to_string(), print));
            }
            println!();
        }
        predicted.push(execute_to_state(&converted.programs, &schema));
        gold.push(d.states());
    }
    println!("{refers} refer calls across {} dialogues", dialogues.len());
    println!("{}", score(&predicted, &gold).unwrap());
}
