//! Parses the bundled architecture file, prints it back and renders it as
//! DOT.

use privarch::frontend::{check_dot, export_dot, parse_spec, print_spec};

fn main() {
    let text = include_str!("../fixtures/coppa.parch");
    let doc = parse_spec(text).expect("fixture parses");
    let printed = print_spec(&doc);
    print!("{printed}");
    assert_eq!(parse_spec(&printed).expect("reparse"), doc);

    let dot = export_dot(&doc.architecture, None);
    print!("{dot}");
    let stats = check_dot(&dot).expect("well-formed");
    println!("# {} nodes, {} edges", stats.nodes, stats.edges);

    match parse_spec("types INFO;\nagent Child holds info INFO;") {
        Ok(_) => unreachable!(),
        Err(e) => println!("# error: {e}"),
    }
}
