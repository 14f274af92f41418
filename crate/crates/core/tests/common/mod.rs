#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use privarch::architecture::{AgentId, Architecture};
use privarch::calculus::{AtomicType, ConstructorDecl, TermExpr, TypeExpr, TypeSystem};
use privarch::constraints::{Constraint, LocalSend, NegCreate, NegPossess, Positive};
use privarch::trace::{Event, Trace};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const AGENT_NAMES: [&str; 3] = ["Alice", "Bob", "Carol"];
pub const TERM_BOUND: usize = 6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `A1 -> ... -> An -> T` into its argument types and target.
pub fn split_sig(t: &TypeExpr) -> (Vec<TypeExpr>, TypeExpr) {
    let mut args = Vec::new();
    let mut cur = t;
    while let TypeExpr::Arrow(d, c) = cur {
        args.push((**d).clone());
        cur = c;
    }
    (args, cur.clone())
}

fn apply_type(f: &TypeExpr, x: &TypeExpr) -> Option<TypeExpr> {
    match f {
        TypeExpr::Arrow(d, c) if **d == *x => Some((**c).clone()),
        _ => None,
    }
}

/// A random first-order architecture: up to 3 agents, 4 base types and 5
/// constructors of arity at most 2. At least one nullary constructor is held.
pub fn random_arch(r: &mut impl Rng) -> Architecture {
    let n_agents = if r.gen_bool(0.1) { 1 } else { r.gen_range(2..=3) };
    let n_types = r.gen_range(1..=4);
    let n_ctors = r.gen_range(1..=5);
    let agents: Vec<AgentId> = AGENT_NAMES[..n_agents].iter().map(AgentId::original).collect();
    let types: Vec<AtomicType> = (0..n_types).map(|i| AtomicType::base(format!("T{i}"))).collect();

    let mut ts = TypeSystem::new();
    for t in &types {
        ts.add_type(t.clone());
    }
    let mut arch_ctors = Vec::new();
    for i in 0..n_ctors {
        let arity = if i == 0 { 0 } else { r.gen_range(0..=2) };
        let args: Vec<AtomicType> = (0..arity).map(|_| types.choose(r).unwrap().clone()).collect();
        let target = types.choose(r).unwrap().clone();
        let decl = ConstructorDecl::with_parts(format!("c{i}"), args, target);
        ts.add_constructor(decl.clone()).unwrap();
        arch_ctors.push(decl);
    }
    let mut arch = Architecture::new(ts);
    for a in &agents {
        arch.add_agent(a.clone());
    }
    for (i, c) in arch_ctors.iter().enumerate() {
        let holders = if i == 0 { 1 } else { r.gen_range(0..=2) };
        for a in agents.choose_multiple(r, holders) {
            arch.grant(a, c.name.as_str());
        }
    }
    for from in &agents {
        for to in &agents {
            if from == to || !r.gen_bool(0.6) {
                continue;
            }
            for t in &types {
                if r.gen_bool(0.5) {
                    arch.allow(from, to, t.clone());
                }
            }
        }
    }
    arch
}

/// Every term of size at most `bound` that `a` can derive after `events`,
/// with its type. Terms `a` received are included whatever their size.
pub fn enumerate_terms(
    arch: &Architecture,
    events: &[Event],
    a: &AgentId,
    bound: usize,
) -> BTreeMap<TermExpr, TypeExpr> {
    let mut known: BTreeMap<TermExpr, TypeExpr> = BTreeMap::new();
    for n in arch.holdings_of(a) {
        if let Some(c) = arch.type_system.constructors.get(n) {
            known.insert(TermExpr::con(n.as_str()), c.signature.clone());
        }
    }
    for e in events.iter().filter(|e| &e.receiver == a) {
        known.insert(e.term.clone(), TypeExpr::Atomic(e.msg_type.clone()));
    }
    loop {
        let mut fresh = Vec::new();
        for (f, ft) in &known {
            for (x, xt) in &known {
                if f.size() + x.size() > bound {
                    continue;
                }
                if let Some(rt) = apply_type(ft, xt) {
                    let t = TermExpr::app(f.clone(), x.clone());
                    if !known.contains_key(&t) {
                        fresh.push((t, rt));
                    }
                }
            }
        }
        if fresh.is_empty() {
            return known;
        }
        for (t, ty) in fresh {
            known.insert(t, ty);
        }
    }
}

/// Every well-typed term of size at most `bound` built from all declared
/// constructors.
pub fn all_terms(ts: &TypeSystem, bound: usize) -> BTreeMap<TermExpr, TypeExpr> {
    let mut known: BTreeMap<TermExpr, TypeExpr> = ts
        .constructors
        .values()
        .map(|c| (TermExpr::con(c.name.as_str()), c.signature.clone()))
        .collect();
    loop {
        let mut fresh = Vec::new();
        for (f, ft) in &known {
            for (x, xt) in &known {
                if f.size() + x.size() > bound {
                    continue;
                }
                if let Some(rt) = apply_type(ft, xt) {
                    let t = TermExpr::app(f.clone(), x.clone());
                    if !known.contains_key(&t) {
                        fresh.push((t, rt));
                    }
                }
            }
        }
        if fresh.is_empty() {
            return known;
        }
        for (t, ty) in fresh {
            known.insert(t, ty);
        }
    }
}

pub type TypeState = BTreeMap<AgentId, BTreeSet<AtomicType>>;

/// Closes every agent's types under the constructors it holds.
pub fn close_types(arch: &Architecture, have: &mut TypeState) {
    loop {
        let mut changed = false;
        for a in &arch.agents {
            for n in arch.holdings_of(a) {
                let Some(c) = arch.type_system.constructors.get(n) else {
                    continue;
                };
                let (args, target) = split_sig(&c.signature);
                let atomic: Option<Vec<AtomicType>> = args.iter().map(|t| t.as_atomic().cloned()).collect();
                let (Some(args), Some(target)) = (atomic, target.as_atomic().cloned()) else {
                    continue;
                };
                let set = have.entry(a.clone()).or_default();
                if args.iter().all(|t| set.contains(t)) {
                    changed |= set.insert(target);
                }
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn initial_types(arch: &Architecture) -> TypeState {
    let mut have: TypeState = arch.agents.iter().map(|a| (a.clone(), BTreeSet::new())).collect();
    close_types(arch, &mut have);
    have
}

/// Type-level forward saturation: which atomic types each agent can obtain
/// after `events`, ignoring term identity.
pub fn saturate_types(arch: &Architecture, events: &[Event]) -> TypeState {
    let mut have = initial_types(arch);
    for e in events {
        have.get_mut(&e.receiver).unwrap().insert(e.msg_type.clone());
        close_types(arch, &mut have);
    }
    have
}

/// Every state one permitted send away from `s`.
pub fn successors(arch: &Architecture, s: &TypeState) -> Vec<TypeState> {
    let mut out = Vec::new();
    for ((a, b), types) in &arch.channels {
        for t in types.iter().filter_map(|t| t.as_atomic()) {
            if s[a].contains(t) && !s[b].contains(t) {
                let mut n = s.clone();
                n.get_mut(b).unwrap().insert(t.clone());
                close_types(arch, &mut n);
                out.push(n);
            }
        }
    }
    out
}

/// Layers of a naive breadth-first search: `layers[d]` holds the states
/// first reached with `d` events. Stops after `depth` layers or when no new
/// state appears.
pub fn bfs_layers(arch: &Architecture, depth: usize) -> Vec<Vec<TypeState>> {
    let root = initial_types(arch);
    let mut seen = BTreeSet::from([root.clone()]);
    let mut layers = vec![vec![root]];
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in layers.last().unwrap() {
            for n in successors(arch, s) {
                if seen.insert(n.clone()) {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layers.push(next);
    }
    layers
}

/// A random valid trace of at most `max_len` events. Each event sends a term
/// the sender can derive (found by enumeration) over a permitted channel.
pub fn random_trace(arch: &Architecture, r: &mut impl Rng, max_len: usize) -> Trace {
    let len = r.gen_range(0..=max_len);
    let mut events: Vec<Event> = Vec::new();
    for _ in 0..len {
        let mut options = Vec::new();
        for a in &arch.agents {
            let terms = enumerate_terms(arch, &events, a, TERM_BOUND);
            for (t, ty) in &terms {
                let Some(at) = ty.as_atomic() else { continue };
                for b in &arch.agents {
                    if a != b && arch.permits(a, b, at) {
                        options.push(Event {
                            sender: a.clone(),
                            term: t.clone(),
                            msg_type: at.clone(),
                            receiver: b.clone(),
                        });
                    }
                }
            }
        }
        match options.choose(r) {
            Some(e) => events.push(e.clone()),
            None => break,
        }
    }
    Trace::new(events)
}

fn base_types(arch: &Architecture) -> Vec<AtomicType> {
    arch.type_system.base_types().cloned().collect()
}

/// True iff `a` holds a constructor whose target is `t`.
pub fn computes(arch: &Architecture, a: &AgentId, t: &AtomicType) -> bool {
    arch.holdings_of(a).any(|n| {
        arch.type_system
            .constructors
            .get(n)
            .is_some_and(|c| split_sig(&c.signature).1 == TypeExpr::Atomic(t.clone()))
    })
}

/// Random `ni A => B` constraints whose subject cannot build its trigger.
pub fn random_neg_create(arch: &Architecture, r: &mut impl Rng) -> Vec<NegCreate> {
    let agents: Vec<AgentId> = arch.agents.iter().cloned().collect();
    let types = base_types(arch);
    let mut out = Vec::new();
    for _ in 0..r.gen_range(1..=3) {
        let a = agents.choose(r).unwrap().clone();
        let t = types.choose(r).unwrap().clone();
        let b = types.choose(r).unwrap().clone();
        let c = NegCreate::new(a.clone(), t.clone(), b.clone());
        if t != b && !computes(arch, &a, &t) && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Random `ni A => b ni B` constraints whose subject cannot build its trigger.
pub fn random_neg_possess(arch: &Architecture, r: &mut impl Rng) -> Vec<NegPossess> {
    let agents: Vec<AgentId> = arch.agents.iter().cloned().collect();
    let types = base_types(arch);
    let mut out = Vec::new();
    for _ in 0..r.gen_range(1..=3) {
        let a = agents.choose(r).unwrap().clone();
        let t = types.choose(r).unwrap().clone();
        let h = agents.choose(r).unwrap().clone();
        let b = types.choose(r).unwrap().clone();
        if computes(arch, &a, &t) {
            continue;
        }
        if let Ok(c) = NegPossess::new(a, t, h, b) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// Any mix of constraint forms over the declared agents and types.
pub fn random_constraints(arch: &Architecture, r: &mut impl Rng) -> Vec<Constraint> {
    let agents: Vec<AgentId> = arch.agents.iter().cloned().collect();
    let types: Vec<AtomicType> = arch.type_system.atomic_types.iter().cloned().collect();
    let mut out = Vec::new();
    if agents.is_empty() || types.is_empty() {
        return out;
    }
    for _ in 0..r.gen_range(0..=4) {
        let pick_a = |r: &mut dyn rand::RngCore| agents.choose(r).unwrap().clone();
        let pick_t = |r: &mut dyn rand::RngCore| types.choose(r).unwrap().clone();
        let c = match r.gen_range(0..4) {
            0 => Constraint::NegCreate(NegCreate::new(pick_a(r), pick_t(r), pick_t(r))),
            1 => match NegPossess::new(pick_a(r), pick_t(r), pick_a(r), pick_t(r)) {
                Ok(n) => Constraint::NegPossess(n),
                Err(_) => continue,
            },
            2 => Constraint::Positive(Positive::new(pick_a(r), pick_t(r))),
            _ => Constraint::LocalSend(LocalSend {
                gate_sender: pick_a(r),
                gate_type: pick_t(r),
                gate_receiver: pick_a(r),
                must_prev_receiver: pick_a(r),
            }),
        };
        out.push(c);
    }
    out
}
