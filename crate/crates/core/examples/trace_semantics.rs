//! Walks a short trace through the knowledge tracker and the compliance
//! checker.

use privarch::constraints::check_compliance;
use privarch::fixtures::*;
use privarch::trace::{check_trace_valid, derives, possession_closure, KnowledgeTracker};
use privarch::{Event, TermExpr, Trace, TypeExpr};

fn main() {
    let arch = coppa_unsafe();
    let tr = Trace::new(vec![
        Event::typed(&arch, website(), TermExpr::con("policy"), parent()).expect("typed"),
        Event::typed(&arch, parent(), TermExpr::con("consent"), website()).expect("typed"),
        Event::typed(&arch, child(), TermExpr::con("info"), website()).expect("typed"),
    ]);
    println!("valid: {:?}", check_trace_valid(&arch, &tr));

    let mut k = KnowledgeTracker::new(&arch);
    for e in &tr.events {
        k.push(e);
        let held: Vec<String> = k.state().possessed_by(&website()).map(|t| t.to_string()).collect();
        println!("after {e}: Website has {}", held.join(", "));
    }

    let ok = derives(&arch, &tr, &website(), &TermExpr::con("info"), &TypeExpr::Atomic(info())).expect("valid trace");
    println!("Website derives info: {ok}");

    let states = possession_closure(&arch, &tr).expect("valid trace");
    let verdict = check_compliance(&states, &tr, &coppa_constraints());
    println!("compliant: {}", verdict.compliant);

    // Out of order: the website hears about the info before consent arrives.
    let early = Trace::new(vec![tr.events[2].clone(), tr.events[0].clone(), tr.events[1].clone()]);
    let states = possession_closure(&arch, &early).expect("valid trace");
    for v in check_compliance(&states, &early, &coppa_constraints()).violations {
        println!("violation after {} event(s): {}", v.prefix_length, v.constraint);
    }
}
