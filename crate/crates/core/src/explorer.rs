//! Bounded search over type-level knowledge states.
//!
//! A state records which atomic types each agent possesses (closed under the
//! agents' constructors) plus, when local forwarding constraints are in play,
//! which forwarding obligations have been discharged. An abstract event
//! `(sender, receiver, type)` is enabled when the channel allows the type and
//! the sender possesses it.
//!
//! Each negative constraint and each positive goal gets its own breadth-first
//! search, so the first hit is a shortest trace. Three prunings keep the
//! searches small without losing shortest hits:
//!
//! * only events in the backward cone of the goal fact are expanded;
//! * for a negative constraint, states where the consequent already holds are
//!   dropped, since possession never shrinks;
//! * a max-cost relaxation gives a lower bound on the remaining events; states
//!   whose bound is infinite are dropped as hopeless, and states that cannot
//!   reach the goal within the depth bound are dropped as depth-limited.
//!
//! Abstract hits are turned into concrete traces with the canonical witness
//! terms of [`KnowledgeTracker`] and re-checked against the trace and
//! constraint checkers. A hit that fails the re-check (which can only happen
//! through local constraints, whose term identity the abstraction ignores) is
//! discarded and the search continues.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::architecture::{AgentId, Architecture};
use crate::calculus::AtomicType;
use crate::constraints::{
    check_local, check_neg_create, check_neg_possess, check_positive, Constraint, LocalSend, Positive,
};
use crate::report::VerdictReport;
use crate::trace::{check_trace_valid, possession_closure, Event, KnowledgeTracker, Trace};

pub const DEFAULT_DEPTH: usize = 12;
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Maximum number of events in a trace.
    pub depth: usize,
    /// Maximum number of distinct states stored, over all goals.
    pub budget: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            depth: DEFAULT_DEPTH,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl ExploreConfig {
    pub fn depth(depth: usize) -> Self {
        ExploreConfig {
            depth,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchOutcome {
    /// At most one shortest counterexample per violated negative constraint.
    pub counterexamples: Vec<(Constraint, Trace)>,
    /// At most one shortest witness per reachable positive goal.
    pub witnesses: Vec<(Positive, Trace)>,
    /// True iff every goal was decided: found, or shown unreachable at any
    /// depth, without hitting the budget.
    pub exhausted: bool,
    pub states_visited: usize,
    /// Goals left undecided by the depth bound or the budget.
    pub unsettled: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("invalid architecture:\n{0}")]
    InvalidArchitecture(VerdictReport),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("constraint `{0}` mentions an agent or type outside the architecture")]
    OutOfScope(Box<Constraint>),
    #[error("could not rebuild a concrete trace: {0}")]
    ReconstructionFailure(String),
}

/// An abstract event: `sender` passes some term of `ty` to `receiver`.
pub type AbstractEvent = (AgentId, AtomicType, AgentId);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: usize) -> bool {
        let was = self.get(i);
        self.0[i / 64] |= 1 << (i % 64);
        !was
    }

    fn and(&self, mask: &Bits) -> Bits {
        Bits(self.0.iter().zip(&mask.0).map(|(a, b)| a & b).collect())
    }
}

struct RuleIx {
    args: Vec<usize>,
    target: usize,
}

struct EventIx {
    sender: usize,
    ty: usize,
    receiver: usize,
    pre: usize,
    add: usize,
    gated_by: Vec<usize>,
    discharges: Vec<usize>,
}

/// The architecture compiled to fact indices. Fact `(a, t)` is bit
/// `a * |types| + t`; gate `g` is bit `facts + g`.
struct Model {
    agents: Vec<AgentId>,
    types: Vec<AtomicType>,
    facts: usize,
    gates: usize,
    rules: Vec<RuleIx>,
    rules_of: Vec<Vec<usize>>,
    events: Vec<EventIx>,
    dischargers: Vec<Vec<usize>>,
}

impl Model {
    fn new(arch: &Architecture, locals: &[LocalSend]) -> Model {
        let agents: Vec<AgentId> = arch.agents.iter().cloned().collect();
        let types: Vec<AtomicType> = arch.type_system.atomic_types.iter().cloned().collect();
        let facts = agents.len() * types.len();
        let mut m = Model {
            rules: Vec::new(),
            rules_of: vec![Vec::new(); agents.len()],
            events: Vec::new(),
            dischargers: vec![Vec::new(); locals.len()],
            facts,
            gates: locals.len(),
            agents,
            types,
        };
        for (ai, a) in m.agents.clone().iter().enumerate() {
            for r in arch.rules_of(a) {
                let args: Option<Vec<usize>> = r.args.iter().map(|t| m.fact(a, t)).collect();
                if let (Some(args), Some(target)) = (args, m.fact(a, &r.target)) {
                    m.rules_of[ai].push(m.rules.len());
                    m.rules.push(RuleIx { args, target });
                }
            }
        }
        for (from, to, ty) in arch.channel_entries() {
            let (Some(s), Some(r), Some(t)) = (m.agent(&from), m.agent(&to), m.ty(&ty)) else {
                continue;
            };
            let mut e = EventIx {
                sender: s,
                ty: t,
                receiver: r,
                pre: s * m.types.len() + t,
                add: r * m.types.len() + t,
                gated_by: Vec::new(),
                discharges: Vec::new(),
            };
            for (g, l) in locals.iter().enumerate() {
                if l.gate_sender == from && l.gate_type == ty {
                    if l.gate_receiver == to {
                        e.gated_by.push(g);
                    }
                    if l.must_prev_receiver == to {
                        e.discharges.push(g);
                        m.dischargers[g].push(m.events.len());
                    }
                }
            }
            m.events.push(e);
        }
        m
    }

    fn agent(&self, a: &AgentId) -> Option<usize> {
        self.agents.binary_search(a).ok()
    }

    fn ty(&self, t: &AtomicType) -> Option<usize> {
        self.types.binary_search(t).ok()
    }

    fn fact(&self, a: &AgentId, t: &AtomicType) -> Option<usize> {
        Some(self.agent(a)? * self.types.len() + self.ty(t)?)
    }

    fn bits(&self) -> usize {
        self.facts + self.gates
    }

    fn saturate(&self, s: &mut Bits, agent: usize) {
        loop {
            let mut changed = false;
            for &ri in &self.rules_of[agent] {
                let r = &self.rules[ri];
                if !s.get(r.target) && r.args.iter().all(|&a| s.get(a)) {
                    s.set(r.target);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn initial(&self) -> Bits {
        let mut s = Bits::new(self.bits());
        for a in 0..self.agents.len() {
            self.saturate(&mut s, a);
        }
        s
    }

    fn enabled(&self, s: &Bits, e: &EventIx) -> bool {
        s.get(e.pre) && e.gated_by.iter().all(|&g| s.get(self.facts + g))
    }

    /// The successor state, or `None` if `e` is disabled or changes nothing.
    fn apply(&self, s: &Bits, e: &EventIx) -> Option<Bits> {
        if !self.enabled(s, e) {
            return None;
        }
        let mut next = s.clone();
        let mut changed = false;
        if next.set(e.add) {
            self.saturate(&mut next, e.receiver);
            changed = true;
        }
        for &g in &e.discharges {
            changed |= next.set(self.facts + g);
        }
        changed.then_some(next)
    }

    fn abstract_event(&self, ei: usize) -> AbstractEvent {
        let e = &self.events[ei];
        (self.agents[e.sender].clone(), self.types[e.ty].clone(), self.agents[e.receiver].clone())
    }

    fn possessed(&self, s: &Bits) -> BTreeMap<AgentId, BTreeSet<AtomicType>> {
        let nt = self.types.len();
        self.agents
            .iter()
            .enumerate()
            .map(|(ai, a)| {
                let set = (0..nt).filter(|&t| s.get(ai * nt + t)).map(|t| self.types[t].clone()).collect();
                (a.clone(), set)
            })
            .collect()
    }
}

const INF: u32 = u32::MAX;

/// What one search is after.
struct Goal {
    target: usize,
    /// Facts whose presence ends the search branch (the consequent).
    blocked: Vec<usize>,
}

/// The part of the model one goal can use.
struct Cone {
    events: Vec<usize>,
    mask: Bits,
    pre_events: Vec<Vec<usize>>,
    pre_rules: Vec<Vec<usize>>,
    blocked: Vec<bool>,
}

impl Cone {
    fn new(m: &Model, goal: &Goal) -> Cone {
        let mut relevant = vec![false; m.facts];
        let mut ev = vec![false; m.events.len()];
        let mut ru = vec![false; m.rules.len()];
        let mut work = vec![goal.target];
        relevant[goal.target] = true;
        let mut gates_needed = vec![false; m.gates];
        while let Some(f) = work.pop() {
            let mut mark = |x: usize, work: &mut Vec<usize>| {
                if !relevant[x] {
                    relevant[x] = true;
                    work.push(x);
                }
            };
            for (ri, r) in m.rules.iter().enumerate() {
                if r.target == f && !ru[ri] {
                    ru[ri] = true;
                    for &a in &r.args {
                        mark(a, &mut work);
                    }
                }
            }
            for (ei, e) in m.events.iter().enumerate() {
                if e.add == f && !ev[ei] {
                    ev[ei] = true;
                    mark(e.pre, &mut work);
                    for &g in &e.gated_by {
                        if !gates_needed[g] {
                            gates_needed[g] = true;
                            for &d in &m.dischargers[g] {
                                ev[d] = true;
                                mark(m.events[d].pre, &mut work);
                            }
                        }
                    }
                }
            }
        }

        // Keep the consequent and whatever closes into it.
        let mut blocked = vec![false; m.facts];
        let mut keep = relevant.clone();
        let mut work: Vec<usize> = goal.blocked.clone();
        for &b in &goal.blocked {
            blocked[b] = true;
            keep[b] = true;
        }
        while let Some(f) = work.pop() {
            for r in m.rules.iter().filter(|r| r.target == f) {
                for &a in &r.args {
                    if !keep[a] {
                        keep[a] = true;
                        work.push(a);
                    }
                }
            }
        }

        let mut mask = Bits::new(m.bits());
        for (f, k) in keep.iter().enumerate() {
            if *k {
                mask.set(f);
            }
        }
        for (g, n) in gates_needed.iter().enumerate() {
            if *n {
                mask.set(m.facts + g);
            }
        }
        let events: Vec<usize> = (0..m.events.len()).filter(|&i| ev[i]).collect();
        let rules: Vec<usize> = (0..m.rules.len()).filter(|&i| ru[i]).collect();
        let mut pre_events = vec![Vec::new(); m.facts];
        for &ei in &events {
            pre_events[m.events[ei].pre].push(ei);
        }
        let mut pre_rules = vec![Vec::new(); m.facts];
        for &ri in &rules {
            let mut args = m.rules[ri].args.clone();
            args.sort_unstable();
            args.dedup();
            for a in args {
                pre_rules[a].push(ri);
            }
        }
        Cone {
            events,
            mask,
            pre_events,
            pre_rules,
            blocked,
        }
    }

    fn dead(&self, s: &Bits) -> bool {
        self.blocked.iter().enumerate().any(|(f, b)| *b && s.get(f))
    }

    /// Lower bound on the events still needed to reach `target`, ignoring
    /// that facts must arrive together. Blocked facts count as unreachable.
    fn lower_bound(&self, m: &Model, s: &Bits, target: usize) -> u32 {
        if s.get(target) {
            return 0;
        }
        let mut cost = vec![INF; m.facts];
        let mut done = vec![false; m.facts];
        let mut missing = vec![usize::MAX; m.rules.len()];
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new()];
        let offer = |f: usize, c: u32, cost: &mut Vec<u32>, buckets: &mut Vec<Vec<usize>>| {
            if self.blocked[f] || c >= cost[f] {
                return;
            }
            cost[f] = c;
            let c = c as usize;
            if buckets.len() <= c {
                buckets.resize(c + 1, Vec::new());
            }
            buckets[c].push(f);
        };
        for f in 0..m.facts {
            if s.get(f) {
                offer(f, 0, &mut cost, &mut buckets);
            }
        }
        let mut level = 0;
        while level < buckets.len() {
            let mut i = 0;
            while i < buckets[level].len() {
                let f = buckets[level][i];
                i += 1;
                if done[f] || cost[f] as usize != level {
                    continue;
                }
                done[f] = true;
                if f == target {
                    return level as u32;
                }
                let c = level as u32;
                for &ri in &self.pre_rules[f] {
                    let r = &m.rules[ri];
                    if missing[ri] == usize::MAX {
                        let mut a = r.args.clone();
                        a.sort_unstable();
                        a.dedup();
                        missing[ri] = a.len();
                    }
                    missing[ri] -= 1;
                    if missing[ri] == 0 {
                        offer(r.target, c, &mut cost, &mut buckets);
                    }
                }
                for &ei in &self.pre_events[f] {
                    let e = &m.events[ei];
                    let open = e.gated_by.iter().all(|&g| s.get(m.facts + g));
                    if open {
                        offer(e.add, c + 1, &mut cost, &mut buckets);
                    } else if e.gated_by.iter().all(|&g| {
                        s.get(m.facts + g)
                            || m.dischargers[g].iter().any(|&d| !self.blocked[m.events[d].add])
                    }) {
                        offer(e.add, c + 2, &mut cost, &mut buckets);
                    }
                }
            }
            level += 1;
        }
        INF
    }
}

struct Node {
    state: Bits,
    parent: usize,
    event: usize,
    depth: usize,
}

enum Settled {
    Found(Trace),
    Absent,
    Unsettled,
}

struct Search<'a> {
    arch: &'a Architecture,
    model: &'a Model,
    cfg: ExploreConfig,
    visited_total: usize,
    budget_hit: bool,
}

impl Search<'_> {
    fn run(&mut self, goal: &Goal, accept: &dyn Fn(&Trace) -> bool) -> Result<Settled, ExploreError> {
        let m = self.model;
        let cone = Cone::new(m, goal);
        let full_root = m.initial();
        let root = full_root.and(&cone.mask);
        let hit = |s: &Bits| s.get(goal.target) && !cone.dead(s);
        let mut nodes = vec![Node {
            state: root.clone(),
            parent: usize::MAX,
            event: usize::MAX,
            depth: 0,
        }];
        let mut seen: HashSet<Bits> = HashSet::new();
        seen.insert(root.clone());
        self.visited_total += 1;

        if hit(&root) {
            let tr = Trace::default();
            if accept(&tr) {
                return Ok(Settled::Found(tr));
            }
        }
        if cone.dead(&root) {
            return Ok(Settled::Absent);
        }
        let h0 = cone.lower_bound(m, &root, goal.target);
        if h0 == INF {
            return Ok(Settled::Absent);
        }
        let mut limited = h0 as usize > self.cfg.depth;
        let mut queue = VecDeque::new();
        if !limited {
            queue.push_back(0usize);
        }

        while let Some(ni) = queue.pop_front() {
            let depth = nodes[ni].depth;
            if depth >= self.cfg.depth {
                limited = true;
                continue;
            }
            for &ei in &cone.events {
                let Some(next) = m.apply(&nodes[ni].state, &m.events[ei]) else {
                    continue;
                };
                let next = next.and(&cone.mask);
                if seen.contains(&next) {
                    continue;
                }
                if self.visited_total >= self.cfg.budget {
                    self.budget_hit = true;
                    return Ok(Settled::Unsettled);
                }
                seen.insert(next.clone());
                self.visited_total += 1;
                let is_hit = hit(&next);
                nodes.push(Node {
                    state: next,
                    parent: ni,
                    event: ei,
                    depth: depth + 1,
                });
                let id = nodes.len() - 1;
                if is_hit {
                    let tr = reconstruct(self.arch, &path(m, &nodes, id))?;
                    if accept(&tr) {
                        return Ok(Settled::Found(tr));
                    }
                }
                let s = &nodes[id].state;
                if cone.dead(s) {
                    continue;
                }
                let h = cone.lower_bound(m, s, goal.target);
                if h == INF {
                    continue;
                }
                if depth + 1 + h as usize > self.cfg.depth {
                    limited = true;
                    continue;
                }
                queue.push_back(id);
            }
        }
        Ok(if limited { Settled::Unsettled } else { Settled::Absent })
    }
}

fn path(m: &Model, nodes: &[Node], mut id: usize) -> Vec<AbstractEvent> {
    let mut out = Vec::new();
    while nodes[id].parent != usize::MAX {
        out.push(m.abstract_event(nodes[id].event));
        id = nodes[id].parent;
    }
    out.reverse();
    out
}

/// Turns abstract events into a concrete trace, sending the sender's current
/// canonical witness term at each step.
pub fn reconstruct(arch: &Architecture, events: &[AbstractEvent]) -> Result<Trace, ExploreError> {
    let mut tracker = KnowledgeTracker::new(arch);
    let mut out = Vec::with_capacity(events.len());
    for (s, t, r) in events {
        let term = tracker.state().witness(s, t).cloned().ok_or_else(|| {
            ExploreError::ReconstructionFailure(format!("`{s}` has no term of {t} to send to `{r}`"))
        })?;
        let e = Event {
            sender: s.clone(),
            term,
            msg_type: t.clone(),
            receiver: r.clone(),
        };
        tracker.push(&e);
        out.push(e);
    }
    let tr = Trace::new(out);
    if let crate::trace::Validity::Invalid { index, reason } = check_trace_valid(arch, &tr) {
        return Err(ExploreError::ReconstructionFailure(format!("event {index}: {reason}")));
    }
    Ok(tr)
}

type Accept<'a> = Box<dyn Fn(&Trace) -> bool + 'a>;

fn in_scope(arch: &Architecture, c: &Constraint) -> bool {
    c.agents().iter().all(|a| arch.agents.contains(*a))
        && c.types().iter().all(|t| arch.type_system.atomic_types.contains(*t))
}

/// Searches for counterexamples to the negative constraints of `cs` and
/// witnesses for its positive constraints. Local constraints in `cs` are
/// enforced together with `locals`.
pub fn explore(
    arch: &Architecture,
    cs: &[Constraint],
    locals: &[LocalSend],
    cfg: ExploreConfig,
) -> Result<SearchOutcome, ExploreError> {
    let report = arch.validate();
    if !report.passed {
        return Err(ExploreError::InvalidArchitecture(report));
    }
    if cfg.depth == 0 {
        return Err(ExploreError::ZeroDepth);
    }
    for c in cs {
        if !in_scope(arch, c) {
            return Err(ExploreError::OutOfScope(Box::new(c.clone())));
        }
    }
    let mut all_locals: Vec<LocalSend> = locals.to_vec();
    for c in cs {
        if let Constraint::LocalSend(l) = c {
            if !all_locals.contains(l) {
                all_locals.push(l.clone());
            }
        }
    }
    let model = Model::new(arch, &all_locals);
    let mut search = Search {
        arch,
        model: &model,
        cfg,
        visited_total: 0,
        budget_hit: false,
    };
    let local_ok = |tr: &Trace| all_locals.iter().all(|l| check_local(tr, l).compliant);
    let mut out = SearchOutcome::default();
    let mut settled = true;

    for c in cs {
        let fact = |a: &AgentId, t: &AtomicType| model.fact(a, t).expect("in scope");
        let (goal, accept): (Goal, Accept) = match c {
            Constraint::NegCreate(n) => {
                let blocked = model.agents.iter().map(|a| fact(a, &n.required)).collect();
                let n = n.clone();
                (
                    Goal { target: fact(&n.subject, &n.trigger), blocked },
                    Box::new(move |tr: &Trace| {
                        possession_closure(arch, tr).is_ok_and(|st| !check_neg_create(&st, &n).compliant)
                    }),
                )
            }
            Constraint::NegPossess(n) => {
                let blocked = vec![fact(&n.holder, &n.required)];
                let n = n.clone();
                (
                    Goal { target: fact(&n.subject, &n.trigger), blocked },
                    Box::new(move |tr: &Trace| {
                        possession_closure(arch, tr).is_ok_and(|st| !check_neg_possess(&st, &n).compliant)
                    }),
                )
            }
            Constraint::Positive(p) => {
                let p = p.clone();
                (
                    Goal { target: fact(&p.subject, &p.goal), blocked: Vec::new() },
                    Box::new(move |tr: &Trace| {
                        possession_closure(arch, tr).is_ok_and(|st| check_positive(&st, &p))
                    }),
                )
            }
            Constraint::LocalSend(_) => continue,
        };
        let accept = |tr: &Trace| local_ok(tr) && accept(tr);
        match search.run(&goal, &accept)? {
            Settled::Found(tr) => match c {
                Constraint::Positive(p) => out.witnesses.push((p.clone(), tr)),
                other => out.counterexamples.push((other.clone(), tr)),
            },
            Settled::Absent => {}
            Settled::Unsettled => {
                settled = false;
                out.unsettled.push(c.clone());
            }
        }
    }
    out.states_visited = search.visited_total;
    out.exhausted = settled && !search.budget_hit;
    Ok(out)
}

/// Every distinct possession map reachable with at most `depth` events, by
/// plain breadth-first search without pruning.
pub fn reachable_states(
    arch: &Architecture,
    locals: &[LocalSend],
    depth: usize,
) -> Vec<BTreeMap<AgentId, BTreeSet<AtomicType>>> {
    let m = Model::new(arch, locals);
    let root = m.initial();
    let mut seen = HashSet::new();
    seen.insert(root.clone());
    let mut layer = vec![root];
    for _ in 0..depth {
        let mut next_layer = Vec::new();
        for s in &layer {
            for e in &m.events {
                if let Some(n) = m.apply(s, e) {
                    if seen.insert(n.clone()) {
                        next_layer.push(n);
                    }
                }
            }
        }
        layer = next_layer;
    }
    let maps: BTreeSet<_> = seen.iter().map(|s| m.possessed(s)).collect();
    maps.into_iter().collect()
}
