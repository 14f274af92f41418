//! Checks the forwarding rule an input interface must follow before it may
//! pass a base value to its output interface.

use privarch::constraints::check_local;
use privarch::fixtures::{coppa_constraints, coppa_unsafe};
use privarch::frontend::parse_trace;
use privarch::synthesis::{build_safe_architecture, coppa_grants, relax_interface_forwarding, SynthesisConfig};
use privarch::trace::check_trace_valid;

fn main() {
    let sa = build_safe_architecture(&coppa_unsafe(), &coppa_constraints(), &SynthesisConfig::default())
        .expect("synthesis");
    let (relaxed, locals) = relax_interface_forwarding(&sa, &coppa_grants()).expect("grants");
    for l in &locals {
        println!("local {} -> {} : {} after {}", l.gate_sender, l.gate_receiver, l.gate_type, l.must_prev_receiver);
    }

    let prefix = "Website -> O:Website : policy : POLICY;\n\
                  O:Website -> I:Parent : m[Parent](POLICY)(policy) : C[Parent](POLICY);\n";
    let forward = "I:Parent -> O:Parent : pi[Parent](POLICY)(m[Parent](POLICY)(policy)) : POLICY;\n";
    let deliver = "I:Parent -> Parent : pi[Parent](POLICY)(m[Parent](POLICY)(policy)) : POLICY;\n";

    for (name, text) in [
        ("forward first", format!("{prefix}{forward}")),
        ("deliver first", format!("{prefix}{deliver}{forward}")),
    ] {
        let tr = parse_trace(&text, &relaxed.arch).expect("syntax");
        let ok = check_trace_valid(&relaxed.arch, &tr).is_valid()
            && locals.iter().all(|l| check_local(&tr, l).compliant);
        println!("{name}: {}", if ok { "allowed" } else { "rejected" });
    }
}
