//! Searches the split-interface architecture for a run that gives the
//! website the child's info, with and without the forwarding grants.

use privarch::explorer::{explore, ExploreConfig};
use privarch::fixtures::{coppa_constraints, coppa_unsafe};
use privarch::frontend::print_trace;
use privarch::synthesis::{build_safe_architecture, coppa_grants, relax_interface_forwarding, SynthesisConfig};
use privarch::Constraint;

fn main() {
    let sa = build_safe_architecture(&coppa_unsafe(), &coppa_constraints(), &SynthesisConfig::default())
        .expect("synthesis");
    let (relaxed, locals) = relax_interface_forwarding(&sa, &coppa_grants()).expect("grants");

    for (name, arch, locals) in [("synthesized", &sa.arch, &[][..]), ("with grants", &relaxed.arch, &locals[..])] {
        let out = explore(arch, &coppa_constraints(), locals, ExploreConfig::default()).expect("explore");
        println!(
            "{name}: {} counterexample(s), {} states, exhaustive: {}",
            out.counterexamples.len(),
            out.states_visited,
            out.exhausted
        );
        for (goal, tr) in &out.witnesses {
            println!("witness for `{}` in {} events:", Constraint::Positive(goal.clone()), tr.len());
            print!("{}", print_trace(tr));
        }
    }
}
