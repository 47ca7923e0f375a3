//! Parse a program, print it canonically, and round-trip its token sequence.

use dataflow_dialogue::program::{delinearize, linearize, parse, print};

fn main() {
    let text = "start(findEvent(EventSpec(name = 'retreat',start=after(now()))))";
    let program = parse(text).expect("valid program");
    println!("canonical: {}", print(&program));
    println!("nodes:     {}", program.node_count());

    let tokens = linearize(&program);
    println!("tokens:    {}", tokens.join(" "));
    assert_eq!(delinearize(&tokens).unwrap(), program);

    match parse("findEvent(name='x', 3)") {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected:  {e}"),
    }
}
