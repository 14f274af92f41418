use std::collections::BTreeMap;
use std::fmt::Write;

use super::SpecDocument;
use crate::architecture::AgentId;
use crate::calculus::{AtomicType, Name};
use crate::synthesis::Grant;
use crate::trace::Trace;
use crate::verify::Partition;

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical text for a document. A constructor held by exactly one agent is
/// written with its signature beside that agent; the others go in a `ctor`
/// statement.
pub fn print_spec(doc: &SpecDocument) -> String {
    let arch = &doc.architecture;
    let ts = &arch.type_system;
    let mut out = String::new();

    let kinds: [fn(&AtomicType) -> bool; 3] = [
        |t| matches!(t, AtomicType::Base(_)),
        |t| matches!(t, AtomicType::Certified { .. }),
        |t| matches!(t, AtomicType::Proof { .. }),
    ];
    for kind in kinds {
        let types: Vec<_> = ts.atomic_types.iter().filter(|t| kind(t)).collect();
        if !types.is_empty() {
            let _ = writeln!(out, "types {};", join(types));
        }
    }

    let mut holders: BTreeMap<&Name, usize> = BTreeMap::new();
    for set in arch.holdings.values() {
        for c in set {
            *holders.entry(c).or_default() += 1;
        }
    }
    let inline = |c: &Name| holders.get(c) == Some(&1) && ts.constructors.contains_key(c);
    let shared: Vec<_> = ts.constructors.values().filter(|d| !inline(&d.name)).collect();
    if !shared.is_empty() {
        let _ = writeln!(
            out,
            "ctor {};",
            join(shared.iter().map(|d| format!("{}: {}", d.name, d.signature)))
        );
    }

    let mut agents: Vec<&AgentId> = arch.agents.iter().collect();
    for a in arch.holdings.keys() {
        if !arch.agents.contains(a) {
            agents.push(a);
        }
    }
    for a in agents {
        let held: Vec<String> = arch
            .holdings_of(a)
            .map(|c| match ts.constructors.get(c) {
                Some(d) if inline(c) => format!("{c}: {}", d.signature),
                _ => c.to_string(),
            })
            .collect();
        if held.is_empty() {
            let _ = writeln!(out, "agent {a};");
        } else {
            let _ = writeln!(out, "agent {a} holds {};", held.join(", "));
        }
    }

    for ((from, to), types) in &arch.channels {
        if !types.is_empty() {
            let _ = writeln!(out, "channel {from} -> {to} : {};", join(types));
        }
    }
    for c in &doc.constraints {
        let _ = writeln!(out, "constraint {c};");
    }
    if let Some(a) = doc.options.algorithm {
        let _ = writeln!(out, "option algorithm {};", a.number());
    }
    if let Some(c) = doc.options.cap {
        let _ = writeln!(out, "option cap {c};");
    }
    out
}

pub fn print_trace(tr: &Trace) -> String {
    let mut out = String::new();
    for e in &tr.events {
        let _ = writeln!(out, "{} -> {} : {} : {};", e.sender, e.receiver, e.term, e.msg_type);
    }
    out
}

pub fn print_partition(p: &Partition) -> String {
    let mut out = String::new();
    for (owner, members) in p.cells() {
        let _ = writeln!(out, "cell {owner}: {};", join(members));
    }
    out
}

pub fn print_grants(grants: &[Grant]) -> String {
    grants.iter().map(|g| format!("{g};\n")).collect()
}
