//! Trace semantics: events, derivability of possession judgements, trace
//! validity and the per-prefix type-level possession closure.
//!
//! A judgement `tr |- a ni t : T` is derivable when `a` holds `t`'s head
//! constructor initially and can derive every argument, or when some event
//! of `tr` delivered exactly `t` to `a`. Possession never expires, so a term
//! delivered at any earlier event stays derivable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::architecture::{AgentId, Architecture, Rule};
use crate::calculus::{AtomicType, TermExpr, TypeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub sender: AgentId,
    pub term: TermExpr,
    pub msg_type: AtomicType,
    pub receiver: AgentId,
}

impl Event {
    /// Builds an event, inferring the message type from the term.
    pub fn typed(
        arch: &Architecture,
        sender: AgentId,
        term: TermExpr,
        receiver: AgentId,
    ) -> Result<Event, TraceError> {
        let ty = arch
            .type_system
            .infer_type(&term)
            .map_err(|e| TraceError::Malformed(e.to_string()))?;
        let msg_type = match ty {
            TypeExpr::Atomic(a) => a,
            other => {
                return Err(TraceError::Malformed(format!(
                    "term `{term}` has non-atomic type {other}"
                )))
            }
        };
        if sender == receiver {
            return Err(TraceError::Malformed(format!("`{sender}` sends to itself")));
        }
        Ok(Event {
            sender,
            term,
            msg_type,
            receiver,
        })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} : {} : {}",
            self.sender, self.receiver, self.term, self.msg_type
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(events: Vec<Event>) -> Self {
        Trace { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn prefix(&self, n: usize) -> Trace {
        Trace::new(self.events[..n].to_vec())
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        Trace::new(events)
    }
}

impl FromIterator<Event> for Trace {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Trace::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvalidReason {
    /// The event is ill-formed: unknown agent, self-send, or a term whose
    /// type is not the stated atomic type.
    Malformed(String),
    /// The message type is not in `M(sender, receiver)`.
    Channel,
    /// The sender cannot derive the term from the preceding prefix.
    Possession,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::Malformed(m) => write!(f, "malformed event: {m}"),
            InvalidReason::Channel => f.write_str("channel violation"),
            InvalidReason::Possession => f.write_str("possession violation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid { index: usize, reason: InvalidReason },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("invalid trace: event {index}: {reason}")]
    InvalidTrace { index: usize, reason: InvalidReason },
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("malformed event: {0}")]
    Malformed(String),
}

fn require_valid(arch: &Architecture, tr: &Trace) -> Result<(), TraceError> {
    match check_trace_valid(arch, tr) {
        Validity::Valid => Ok(()),
        Validity::Invalid { index, reason } => Err(TraceError::InvalidTrace { index, reason }),
    }
}

/// Term-level derivability of `a ni t` after `events`, assuming `t` is
/// well-typed and `events` is a valid trace.
pub(crate) fn derivable_at(arch: &Architecture, events: &[Event], a: &AgentId, t: &TermExpr) -> bool {
    match t {
        TermExpr::Con(c) if arch.holds(a, c) && arch.type_system.constructor(c).is_some() => {
            return true
        }
        _ => {}
    }
    if events.iter().any(|e| &e.receiver == a && &e.term == t) {
        return true;
    }
    match t {
        TermExpr::App(f, x) => derivable_at(arch, events, a, f) && derivable_at(arch, events, a, x),
        TermExpr::Con(_) => false,
    }
}

/// Checks every event against its channel and the sender's possession after
/// the preceding prefix. Reports the first offending event.
pub fn check_trace_valid(arch: &Architecture, tr: &Trace) -> Validity {
    for (index, e) in tr.events.iter().enumerate() {
        let invalid = |reason| Validity::Invalid { index, reason };
        for agent in [&e.sender, &e.receiver] {
            if !arch.agents.contains(agent) {
                return invalid(InvalidReason::Malformed(format!("unknown agent `{agent}`")));
            }
        }
        if e.sender == e.receiver {
            return invalid(InvalidReason::Malformed(format!("`{}` sends to itself", e.sender)));
        }
        match arch.type_system.infer_type(&e.term) {
            Ok(TypeExpr::Atomic(ref t)) if *t == e.msg_type => {}
            Ok(other) => {
                return invalid(InvalidReason::Malformed(format!(
                    "term `{}` has type {other}, not {}",
                    e.term, e.msg_type
                )))
            }
            Err(err) => return invalid(InvalidReason::Malformed(err.to_string())),
        }
        if !arch.permits(&e.sender, &e.receiver, &e.msg_type) {
            return invalid(InvalidReason::Channel);
        }
        if !derivable_at(arch, &tr.events[..index], &e.sender, &e.term) {
            return invalid(InvalidReason::Possession);
        }
    }
    Validity::Valid
}

/// Decides `tr |- a ni t : ty`.
pub fn derives(
    arch: &Architecture,
    tr: &Trace,
    a: &AgentId,
    t: &TermExpr,
    ty: &TypeExpr,
) -> Result<bool, TraceError> {
    require_valid(arch, tr)?;
    if !arch.agents.contains(a) {
        return Err(TraceError::UnknownAgent(a.clone()));
    }
    match arch.type_system.infer_type(t) {
        Ok(inferred) if &inferred == ty => Ok(derivable_at(arch, &tr.events, a, t)),
        _ => Ok(false),
    }
}

/// If `a ni t` after `tr1`, then also after `tr1 ++ tr2`.
pub fn weakening_holds(
    arch: &Architecture,
    tr1: &Trace,
    tr2: &Trace,
    a: &AgentId,
    t: &TermExpr,
    ty: &TypeExpr,
) -> Result<bool, TraceError> {
    let full = tr1.concat(tr2);
    require_valid(arch, &full)?;
    Ok(!derives(arch, tr1, a, t, ty)? || derives(arch, &full, a, t, ty)?)
}

/// How a possessed term came to be: `computer` built it with `head` from
/// `args`, then it travelled along `chain` (event indices, in order) to the
/// agent asked about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub computer: AgentId,
    pub head: crate::calculus::Name,
    pub args: Vec<TermExpr>,
    pub chain: Vec<usize>,
}

/// Decomposes a derivable judgement into its computing agent and message
/// chain. `None` means the judgement is not derivable.
pub fn generation(arch: &Architecture, tr: &Trace, a: &AgentId, t: &TermExpr) -> Option<Generation> {
    fn locate(
        arch: &Architecture,
        events: &[Event],
        upto: usize,
        a: &AgentId,
        t: &TermExpr,
    ) -> Option<(AgentId, Vec<usize>)> {
        let prefix = &events[..upto];
        if arch.holds(a, t.head())
            && t.spine_args().iter().all(|x| derivable_at(arch, prefix, a, x))
        {
            return Some((a.clone(), Vec::new()));
        }
        for (j, e) in prefix.iter().enumerate() {
            if &e.receiver == a && &e.term == t {
                if let Some((computer, mut chain)) = locate(arch, events, j, &e.sender, t) {
                    chain.push(j);
                    return Some((computer, chain));
                }
            }
        }
        None
    }
    arch.type_system.infer_type(t).ok()?;
    let (computer, chain) = locate(arch, &tr.events, tr.len(), a, t)?;
    Some(Generation {
        computer,
        head: t.head().clone(),
        args: t.spine_args().into_iter().cloned().collect(),
        chain,
    })
}

/// Type-level knowledge after one trace prefix, with the canonical
/// (smallest) witness term for every possessed type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeState {
    pub possessed: BTreeMap<AgentId, BTreeSet<AtomicType>>,
    pub witnesses: BTreeMap<(AgentId, AtomicType), TermExpr>,
}

impl KnowledgeState {
    pub fn possesses(&self, a: &AgentId, t: &AtomicType) -> bool {
        self.possessed.get(a).is_some_and(|s| s.contains(t))
    }

    pub fn witness(&self, a: &AgentId, t: &AtomicType) -> Option<&TermExpr> {
        self.witnesses.get(&(a.clone(), t.clone()))
    }

    pub fn possessed_by(&self, a: &AgentId) -> impl Iterator<Item = &AtomicType> + '_ {
        self.possessed.get(a).into_iter().flatten()
    }

    /// True iff some agent possesses `t`.
    pub fn exists(&self, t: &AtomicType) -> bool {
        self.possessed.values().any(|s| s.contains(t))
    }

    fn offer(&mut self, a: &AgentId, t: &AtomicType, term: TermExpr) -> bool {
        let key = (a.clone(), t.clone());
        let better = match self.witnesses.get(&key) {
            Some(cur) => term.canonical_cmp(cur).is_lt(),
            None => true,
        };
        if better {
            self.possessed.entry(a.clone()).or_default().insert(t.clone());
            self.witnesses.insert(key, term);
        }
        better
    }
}

/// Incrementally folds events into a [`KnowledgeState`]. The caller is
/// responsible for only pushing events that are valid at the current prefix.
#[derive(Debug, Clone)]
pub struct KnowledgeTracker {
    rules: BTreeMap<AgentId, Vec<Rule>>,
    state: KnowledgeState,
}

impl KnowledgeTracker {
    pub fn new(arch: &Architecture) -> Self {
        let rules: BTreeMap<_, _> = arch
            .agents
            .iter()
            .map(|a| (a.clone(), arch.rules_of(a)))
            .collect();
        let mut tracker = KnowledgeTracker {
            rules,
            state: KnowledgeState::default(),
        };
        for a in &arch.agents {
            tracker.state.possessed.entry(a.clone()).or_default();
            tracker.saturate(a);
        }
        tracker
    }

    pub fn state(&self) -> &KnowledgeState {
        &self.state
    }

    pub fn push(&mut self, e: &Event) {
        if self.state.offer(&e.receiver, &e.msg_type, e.term.clone()) {
            self.saturate(&e.receiver);
        }
    }

    /// Closes `a`'s knowledge under its constructors, improving witnesses
    /// until no candidate beats the current one.
    fn saturate(&mut self, a: &AgentId) {
        let Some(rules) = self.rules.get(a) else {
            return;
        };
        loop {
            let mut changed = false;
            for r in rules {
                let args: Option<Vec<TermExpr>> = r
                    .args
                    .iter()
                    .map(|t| self.state.witness(a, t).cloned())
                    .collect();
                if let Some(args) = args {
                    let cand = TermExpr::apply(r.constructor.as_str(), args);
                    changed |= self.state.offer(a, &r.target, cand);
                }
            }
            if !changed {
                break;
            }
        }
    }
}

/// One knowledge state per prefix of `tr`, starting with the empty prefix.
pub fn possession_closure(arch: &Architecture, tr: &Trace) -> Result<Vec<KnowledgeState>, TraceError> {
    require_valid(arch, tr)?;
    let mut tracker = KnowledgeTracker::new(arch);
    let mut out = Vec::with_capacity(tr.len() + 1);
    out.push(tracker.state().clone());
    for e in &tr.events {
        tracker.push(e);
        out.push(tracker.state().clone());
    }
    Ok(out)
}
