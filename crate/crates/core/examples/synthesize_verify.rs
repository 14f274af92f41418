//! Builds both certified-interface extensions and checks their partition
//! conditions.

use privarch::fixtures::{coppa_constraints, coppa_create_constraints, coppa_unsafe};
use privarch::synthesis::{build_safe_architecture, Algorithm, SynthesisConfig};
use privarch::verify::{verify_theorem1, verify_theorem3};
use privarch::Constraint;

fn main() {
    let arch = coppa_unsafe();

    let one = build_safe_architecture(&arch, &coppa_create_constraints(), &SynthesisConfig::new(Algorithm::One))
        .expect("single-interface synthesis");
    let neg: Vec<_> = coppa_create_constraints()
        .into_iter()
        .filter_map(|c| match c {
            Constraint::NegCreate(n) => Some(n),
            _ => None,
        })
        .collect();
    println!(
        "algorithm 1: {} agents, {} types, {} constructors",
        one.arch.agents.len(),
        one.arch.type_system.atomic_types.len(),
        one.arch.type_system.constructors.len()
    );
    print!("{}", verify_theorem1(&one.arch, &one.canonical_partition, &neg));

    let two = build_safe_architecture(&arch, &coppa_constraints(), &SynthesisConfig::new(Algorithm::Two))
        .expect("split-interface synthesis");
    let neg: Vec<_> = coppa_constraints()
        .into_iter()
        .filter_map(|c| match c {
            Constraint::NegPossess(n) => Some(n),
            _ => None,
        })
        .collect();
    let edges: usize = two.arch.channels.values().map(|t| t.len()).sum();
    println!(
        "algorithm 2: {} agents, {} types, {} constructors, {} channel types",
        two.arch.agents.len(),
        two.arch.type_system.atomic_types.len(),
        two.arch.type_system.constructors.len(),
        edges
    );
    print!("{}", verify_theorem3(&two.arch, &two.canonical_partition, &neg));
}
