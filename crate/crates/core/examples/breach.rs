//! Finds the one-step privacy breach in the unprotected architecture.

use privarch::explorer::{explore, ExploreConfig};
use privarch::fixtures::{coppa_constraints, coppa_unsafe};
use privarch::frontend::print_trace;

fn main() {
    let arch = coppa_unsafe();
    let out = explore(&arch, &coppa_constraints(), &[], ExploreConfig::depth(3)).expect("explore");
    for (c, tr) in &out.counterexamples {
        println!("violates `{c}`:");
        print!("{}", print_trace(tr));
    }
    println!("{} states, exhaustive: {}", out.states_visited, out.exhausted);
}
