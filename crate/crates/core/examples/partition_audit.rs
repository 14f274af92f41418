//! Audits partitions of the split-interface architecture: the canonical one
//! passes, a partition that moves an output interface does not.

use privarch::fixtures::{coppa_constraints, coppa_negative, coppa_unsafe, parent, website};
use privarch::frontend::print_partition;
use privarch::synthesis::{build_safe_architecture, SynthesisConfig};
use privarch::verify::verify_theorem3;
use privarch::AgentId;

fn main() {
    let sa = build_safe_architecture(&coppa_unsafe(), &coppa_constraints(), &SynthesisConfig::default())
        .expect("synthesis");
    let neg = coppa_negative();

    print!("{}", print_partition(&sa.canonical_partition));
    print!("{}", verify_theorem3(&sa.arch, &sa.canonical_partition, &neg));

    let mut moved = sa.canonical_partition.clone();
    moved.assign(AgentId::output_interface(&parent()), website());
    let report = verify_theorem3(&sa.arch, &moved, &neg);
    print!("{report}");
    let json = serde_json::to_string_pretty(&report).expect("json");
    println!("{json}");
}
