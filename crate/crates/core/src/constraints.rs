//! Privacy constraints and trace compliance.
//!
//! Negative constraints are checked prefix by prefix: whenever the trigger
//! is possessed after a prefix, the requirement must hold after that same
//! prefix. This realises "must previously have" because a single event gives
//! one new message to one agent, so for distinct `(agent, type)` pairs the
//! trigger and the requirement cannot first become true at the same event
//! unless the requirement is forced by the receiver's own constructors.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::architecture::AgentId;
use crate::calculus::AtomicType;
use crate::trace::{KnowledgeState, Trace};

/// `subject ni trigger => required`: once `subject` has a `trigger`, some
/// agent must have a `required`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NegCreate {
    pub subject: AgentId,
    pub trigger: AtomicType,
    pub required: AtomicType,
}

impl NegCreate {
    pub fn new(subject: AgentId, trigger: AtomicType, required: AtomicType) -> Self {
        NegCreate {
            subject,
            trigger,
            required,
        }
    }
}

/// `subject ni trigger => holder ni required`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NegPossess {
    pub subject: AgentId,
    pub trigger: AtomicType,
    pub holder: AgentId,
    pub required: AtomicType,
}

impl NegPossess {
    /// Rejects the trivial `a ni A => a ni A`.
    pub fn new(
        subject: AgentId,
        trigger: AtomicType,
        holder: AgentId,
        required: AtomicType,
    ) -> Result<Self, ConstraintError> {
        if subject == holder && trigger == required {
            return Err(ConstraintError::Trivial {
                agent: subject,
                ty: trigger,
            });
        }
        Ok(NegPossess {
            subject,
            trigger,
            holder,
            required,
        })
    }
}

/// `pos(subject, goal)`: some trace must give `subject` a `goal`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Positive {
    pub subject: AgentId,
    pub goal: AtomicType,
}

impl Positive {
    pub fn new(subject: AgentId, goal: AtomicType) -> Self {
        Positive { subject, goal }
    }
}

/// If `gate_sender` sends `t : gate_type` to `gate_receiver`, it must earlier
/// have sent the very same `t` to `must_prev_receiver`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalSend {
    pub gate_sender: AgentId,
    pub gate_type: AtomicType,
    pub gate_receiver: AgentId,
    pub must_prev_receiver: AgentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    NegCreate(NegCreate),
    NegPossess(NegPossess),
    Positive(Positive),
    LocalSend(LocalSend),
}

impl Constraint {
    pub fn is_negative(&self) -> bool {
        matches!(self, Constraint::NegCreate(_) | Constraint::NegPossess(_))
    }

    /// The atomic types mentioned.
    pub fn types(&self) -> Vec<&AtomicType> {
        match self {
            Constraint::NegCreate(c) => vec![&c.trigger, &c.required],
            Constraint::NegPossess(c) => vec![&c.trigger, &c.required],
            Constraint::Positive(c) => vec![&c.goal],
            Constraint::LocalSend(c) => vec![&c.gate_type],
        }
    }

    /// The agents mentioned.
    pub fn agents(&self) -> Vec<&AgentId> {
        match self {
            Constraint::NegCreate(c) => vec![&c.subject],
            Constraint::NegPossess(c) => vec![&c.subject, &c.holder],
            Constraint::Positive(c) => vec![&c.subject],
            Constraint::LocalSend(c) => vec![&c.gate_sender, &c.gate_receiver, &c.must_prev_receiver],
        }
    }
}

impl fmt::Display for NegCreate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ni {} => {}", self.subject, self.trigger, self.required)
    }
}

impl fmt::Display for NegPossess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ni {} => {} ni {}",
            self.subject, self.trigger, self.holder, self.required
        )
    }
}

impl fmt::Display for Positive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pos({}, {})", self.subject, self.goal)
    }
}

impl fmt::Display for LocalSend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "local {} -> {} : {} after {}",
            self.gate_sender, self.gate_receiver, self.gate_type, self.must_prev_receiver
        )
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::NegCreate(c) => c.fmt(f),
            Constraint::NegPossess(c) => c.fmt(f),
            Constraint::Positive(c) => c.fmt(f),
            Constraint::LocalSend(c) => c.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("constraint `{agent} ni {ty} => {agent} ni {ty}` is trivial")]
    Trivial { agent: AgentId, ty: AtomicType },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplianceViolation {
    #[serde(serialize_with = "crate::report::display")]
    pub constraint: Constraint,
    /// Number of events in the offending prefix.
    pub prefix_length: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplianceVerdict {
    pub compliant: bool,
    pub violations: Vec<ComplianceViolation>,
}

impl ComplianceVerdict {
    fn from_violations(violations: Vec<ComplianceViolation>) -> Self {
        ComplianceVerdict {
            compliant: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(mut self, other: ComplianceVerdict) -> Self {
        self.violations.extend(other.violations);
        ComplianceVerdict::from_violations(self.violations)
    }
}

/// Reports the first prefix at which `c`'s trigger is held but no agent has
/// `required`. Initial holdings count as created.
pub fn check_neg_create(states: &[KnowledgeState], c: &NegCreate) -> ComplianceVerdict {
    let first = states
        .iter()
        .position(|s| s.possesses(&c.subject, &c.trigger) && !s.exists(&c.required));
    ComplianceVerdict::from_violations(
        first
            .map(|i| ComplianceViolation {
                constraint: Constraint::NegCreate(c.clone()),
                prefix_length: i,
                detail: format!(
                    "`{}` has {} but no agent has {}",
                    c.subject, c.trigger, c.required
                ),
            })
            .into_iter()
            .collect(),
    )
}

/// Reports the first prefix at which the trigger is held but `holder` does
/// not have `required`.
pub fn check_neg_possess(states: &[KnowledgeState], c: &NegPossess) -> ComplianceVerdict {
    let first = states.iter().position(|s| {
        s.possesses(&c.subject, &c.trigger) && !s.possesses(&c.holder, &c.required)
    });
    ComplianceVerdict::from_violations(
        first
            .map(|i| ComplianceViolation {
                constraint: Constraint::NegPossess(c.clone()),
                prefix_length: i,
                detail: format!(
                    "`{}` has {} but `{}` does not have {}",
                    c.subject, c.trigger, c.holder, c.required
                ),
            })
            .into_iter()
            .collect(),
    )
}

/// True iff the goal is possessed at the end of the trace.
pub fn check_positive(states: &[KnowledgeState], c: &Positive) -> bool {
    states
        .last()
        .is_some_and(|s| s.possesses(&c.subject, &c.goal))
}

/// Every gate event must be preceded by a forwarding event that carries the
/// identical term.
pub fn check_local(tr: &Trace, c: &LocalSend) -> ComplianceVerdict {
    let mut violations = Vec::new();
    for (i, e) in tr.events.iter().enumerate() {
        let gated = e.sender == c.gate_sender
            && e.receiver == c.gate_receiver
            && e.msg_type == c.gate_type;
        if !gated {
            continue;
        }
        let forwarded = tr.events[..i].iter().any(|p| {
            p.sender == c.gate_sender
                && p.receiver == c.must_prev_receiver
                && p.msg_type == c.gate_type
                && p.term == e.term
        });
        if !forwarded {
            violations.push(ComplianceViolation {
                constraint: Constraint::LocalSend(c.clone()),
                prefix_length: i + 1,
                detail: format!(
                    "`{}` sent `{}` to `{}` without first sending it to `{}`",
                    c.gate_sender, e.term, c.gate_receiver, c.must_prev_receiver
                ),
            });
        }
    }
    ComplianceVerdict::from_violations(violations)
}

/// Checks every negative and local constraint. Positive constraints are not
/// obligations of a single trace and are skipped here; see [`check_positive`].
pub fn check_compliance(states: &[KnowledgeState], tr: &Trace, cs: &[Constraint]) -> ComplianceVerdict {
    cs.iter().fold(ComplianceVerdict::from_violations(Vec::new()), |acc, c| {
        let v = match c {
            Constraint::NegCreate(n) => check_neg_create(states, n),
            Constraint::NegPossess(n) => check_neg_possess(states, n),
            Constraint::LocalSend(l) => check_local(tr, l),
            Constraint::Positive(_) => return acc,
        };
        acc.merge(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::TermExpr;
    use crate::fixtures::*;
    use crate::trace::{possession_closure, Event};

    fn states_after(events: &[(AgentId, &str, AgentId)]) -> Vec<KnowledgeState> {
        let arch = coppa_unsafe();
        let tr: Trace = events
            .iter()
            .map(|(a, t, b)| Event::typed(&arch, a.clone(), TermExpr::con(t), b.clone()).unwrap())
            .collect();
        possession_closure(&arch, &tr).unwrap()
    }

    #[test]
    fn neg_create_counts_initial_holdings() {
        let st = states_after(&[(child(), "info", website())]);
        let c = NegCreate::new(website(), info(), consent());
        assert!(check_neg_create(&st, &c).compliant);

        let fresh = NegCreate::new(website(), info(), AtomicType::base("X"));
        let v = check_neg_create(&st, &fresh);
        assert!(!v.compliant);
        assert_eq!(v.violations[0].prefix_length, 1);

        let st0 = states_after(&[]);
        assert!(check_neg_create(&st0, &fresh).compliant);
    }

    #[test]
    fn neg_possess_breach_on_unsafe_architecture() {
        let st = states_after(&[(child(), "info", website())]);
        let [first, second] = <[NegPossess; 2]>::try_from(coppa_negative()).unwrap();
        let v = check_neg_possess(&st, &first);
        assert!(!v.compliant);
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].prefix_length, 1);
        assert!(check_neg_possess(&st, &second).compliant);
    }

    #[test]
    fn trivial_neg_possess_is_rejected() {
        assert!(NegPossess::new(website(), info(), website(), info()).is_err());
        assert!(NegPossess::new(website(), info(), parent(), info()).is_ok());
    }

    #[test]
    fn positive_examples() {
        let st0 = states_after(&[]);
        assert!(check_positive(&st0, &Positive::new(child(), info())));
        assert!(!check_positive(&st0, &Positive::new(website(), info())));
        let st = states_after(&[(child(), "info", website())]);
        assert!(check_positive(&st, &Positive::new(website(), info())));
    }

    fn local_fixture() -> (LocalSend, AgentId, AgentId, AgentId) {
        let p = parent();
        let ip = AgentId::input_interface(&p);
        let op = AgentId::output_interface(&p);
        (
            LocalSend {
                gate_sender: ip.clone(),
                gate_type: policy(),
                gate_receiver: op.clone(),
                must_prev_receiver: p.clone(),
            },
            ip,
            op,
            p,
        )
    }

    fn raw(from: &AgentId, term: TermExpr, to: &AgentId) -> Event {
        Event {
            sender: from.clone(),
            term,
            msg_type: policy(),
            receiver: to.clone(),
        }
    }

    #[test]
    fn local_send_requires_identical_prior_forward() {
        let (c, ip, op, p) = local_fixture();
        let t = TermExpr::con("policy");
        let ok = Trace::new(vec![raw(&ip, t.clone(), &p), raw(&ip, t.clone(), &op)]);
        assert!(check_local(&ok, &c).compliant);

        let missing = Trace::new(vec![raw(&ip, t.clone(), &op)]);
        let v = check_local(&missing, &c);
        assert!(!v.compliant);
        assert_eq!(v.violations[0].prefix_length, 1);

        let other = TermExpr::apply("wrap", [TermExpr::con("policy")]);
        let different = Trace::new(vec![raw(&ip, other, &p), raw(&ip, t, &op)]);
        assert!(!check_local(&different, &c).compliant);
    }

    #[test]
    fn violations_are_prefix_closed() {
        let st = states_after(&[(website(), "policy", parent()), (child(), "info", website())]);
        let [first, _] = <[NegPossess; 2]>::try_from(coppa_negative()).unwrap();
        assert!(!check_neg_possess(&st, &first).compliant);
        assert!(check_neg_possess(&st[..2], &first).compliant);
    }
}
