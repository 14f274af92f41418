//! Agents, their initial constructor holdings and the typed channels between
//! them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{signature_parts, AtomicType, ConstructorDecl, Name, TypeExpr, TypeSystem};
use crate::report::{VerdictReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Original,
    /// The single interface of the certify/unwrap construction.
    Interface,
    InputInterface,
    OutputInterface,
}

/// An agent. For interface kinds `name` is the owner's name; the rendered
/// name gets an `I:` or `O:` prefix, which user-declared names cannot carry.
///
/// Ordering is by kind first, so original agents sort before interfaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId {
    kind: AgentKind,
    name: Name,
}

impl AgentId {
    pub fn original(name: impl AsRef<str>) -> Self {
        AgentId {
            kind: AgentKind::Original,
            name: Name::new(name),
        }
    }

    pub fn interface(owner: &AgentId) -> Self {
        AgentId {
            kind: AgentKind::Interface,
            name: owner.name.clone(),
        }
    }

    pub fn input_interface(owner: &AgentId) -> Self {
        AgentId {
            kind: AgentKind::InputInterface,
            name: owner.name.clone(),
        }
    }

    pub fn output_interface(owner: &AgentId) -> Self {
        AgentId {
            kind: AgentKind::OutputInterface,
            name: owner.name.clone(),
        }
    }

    pub fn with_kind(kind: AgentKind, name: impl AsRef<str>) -> Self {
        AgentId {
            kind,
            name: Name::new(name),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    /// The owner's (or the agent's own) undecorated name.
    pub fn base_name(&self) -> &Name {
        &self.name
    }

    pub fn is_original(&self) -> bool {
        self.kind == AgentKind::Original
    }

    /// The original agent this one belongs to; itself for original agents.
    pub fn owner(&self) -> AgentId {
        AgentId::original(self.name.as_str())
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AgentKind::Original => write!(f, "{}", self.name),
            AgentKind::Interface | AgentKind::InputInterface => write!(f, "I:{}", self.name),
            AgentKind::OutputInterface => write!(f, "O:{}", self.name),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchitectureError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
}

/// One saturation rule of an agent: holding `constructor` and terms of all
/// `args` yields a term of `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub constructor: Name,
    pub args: Vec<AtomicType>,
    pub target: AtomicType,
}

/// Channels absent from `channels` carry nothing. Empty sets are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Architecture {
    pub type_system: TypeSystem,
    pub agents: BTreeSet<AgentId>,
    pub holdings: BTreeMap<AgentId, BTreeSet<Name>>,
    pub channels: BTreeMap<(AgentId, AgentId), BTreeSet<TypeExpr>>,
}

impl Architecture {
    pub fn new(type_system: TypeSystem) -> Self {
        Architecture {
            type_system,
            ..Default::default()
        }
    }

    pub fn add_agent(&mut self, a: AgentId) -> &mut Self {
        self.agents.insert(a);
        self
    }

    /// Gives `a` the constructor `c` initially.
    pub fn grant(&mut self, a: &AgentId, c: impl AsRef<str>) -> &mut Self {
        self.holdings
            .entry(a.clone())
            .or_default()
            .insert(Name::new(c));
        self
    }

    /// Declares `c` in the type system and gives it to `a`.
    pub fn grant_decl(&mut self, a: &AgentId, c: ConstructorDecl) -> &mut Self {
        let name = c.name.clone();
        // Redeclaration conflicts surface in `validate`.
        let _ = self.type_system.add_constructor(c);
        self.grant(a, name.as_str())
    }

    pub fn allow(&mut self, from: &AgentId, to: &AgentId, t: AtomicType) -> &mut Self {
        self.allow_type(from, to, TypeExpr::Atomic(t))
    }

    pub fn allow_type(&mut self, from: &AgentId, to: &AgentId, t: TypeExpr) -> &mut Self {
        self.channels
            .entry((from.clone(), to.clone()))
            .or_default()
            .insert(t);
        self
    }

    pub fn holdings_of(&self, a: &AgentId) -> impl Iterator<Item = &Name> + '_ {
        self.holdings.get(a).into_iter().flatten()
    }

    pub fn holds(&self, a: &AgentId, c: &Name) -> bool {
        self.holdings.get(a).is_some_and(|h| h.contains(c))
    }

    /// True iff `t` is in `M(from, to)`.
    pub fn permits(&self, from: &AgentId, to: &AgentId, t: &AtomicType) -> bool {
        self.channels
            .get(&(from.clone(), to.clone()))
            .is_some_and(|ts| ts.iter().any(|x| x.as_atomic() == Some(t)))
    }

    /// Atomic types of `M(from, to)`.
    pub fn channel_types(&self, from: &AgentId, to: &AgentId) -> Vec<AtomicType> {
        self.channels
            .get(&(from.clone(), to.clone()))
            .into_iter()
            .flatten()
            .filter_map(|t| t.as_atomic().cloned())
            .collect()
    }

    /// `(from, to, type)` for every atomic channel entry, in canonical order.
    pub fn channel_entries(&self) -> Vec<(AgentId, AgentId, AtomicType)> {
        let mut out = Vec::new();
        for ((from, to), ts) in &self.channels {
            for t in ts {
                if let Some(a) = t.as_atomic() {
                    out.push((from.clone(), to.clone(), a.clone()));
                }
            }
        }
        out.sort();
        out
    }

    pub fn originals(&self) -> impl Iterator<Item = &AgentId> + '_ {
        self.agents.iter().filter(|a| a.is_original())
    }

    /// Constructors held by `a`, decomposed. Undeclared or malformed
    /// constructors are skipped; `validate` reports them.
    pub fn rules_of(&self, a: &AgentId) -> Vec<Rule> {
        self.holdings_of(a)
            .filter_map(|n| self.type_system.constructor(n))
            .filter_map(|c| {
                signature_parts(c).ok().map(|(args, target)| Rule {
                    constructor: c.name.clone(),
                    args,
                    target,
                })
            })
            .collect()
    }

    pub fn can_compute(&self, a: &AgentId, t: &AtomicType) -> Result<bool, ArchitectureError> {
        can_compute(self, a, t)
    }

    pub fn validate(&self) -> VerdictReport {
        validate_architecture(self)
    }
}

/// True iff `a` initially holds a constructor `B1 -> ... -> Bn -> t`
/// (`n = 0` included).
pub fn can_compute(arch: &Architecture, a: &AgentId, t: &AtomicType) -> Result<bool, ArchitectureError> {
    if !arch.agents.contains(a) {
        return Err(ArchitectureError::UnknownAgent(a.clone()));
    }
    Ok(arch.rules_of(a).iter().any(|r| &r.target == t))
}

/// Lists every broken architecture invariant. An empty report means valid.
pub fn validate_architecture(arch: &Architecture) -> VerdictReport {
    let ts = &arch.type_system;
    let mut v = Vec::new();

    for c in ts.constructors.values() {
        if signature_parts(c).is_err() {
            v.push(Violation::new(
                "arch.signature",
                [c.name.to_string()],
                format!("constructor `{}` has non-atomic argument in {}", c.name, c.signature),
            ));
        }
    }
    for (c, t) in ts.undeclared_types() {
        v.push(Violation::new(
            "arch.undeclared-type",
            [c.to_string(), t.to_string()],
            format!("constructor `{c}` mentions undeclared type {t}"),
        ));
    }
    for t in &ts.atomic_types {
        match t {
            AtomicType::Base(n) => {
                if !is_identifier(n.as_str()) {
                    v.push(Violation::new(
                        "arch.type-name",
                        [t.to_string()],
                        format!("base type name `{n}` is not an identifier"),
                    ));
                }
            }
            AtomicType::Certified { reader: who, inner } | AtomicType::Proof { holder: who, inner } => {
                if !ts.atomic_types.contains(&AtomicType::Base(inner.clone())) {
                    v.push(Violation::new(
                        "arch.wrapped-type",
                        [t.to_string()],
                        format!("{t} wraps `{inner}`, which is not a declared base type"),
                    ));
                }
                if !who.is_original() || !arch.agents.contains(who) {
                    v.push(Violation::new(
                        "arch.wrapped-type",
                        [t.to_string()],
                        format!("{t} is indexed by `{who}`, which is not an original agent"),
                    ));
                }
            }
        }
    }

    for a in &arch.agents {
        if !is_identifier(a.base_name().as_str()) {
            v.push(Violation::new(
                "arch.agent-name",
                [a.to_string()],
                format!("agent name `{}` is not an identifier", a.base_name()),
            ));
        }
        if !a.is_original() && !arch.agents.contains(&a.owner()) {
            v.push(Violation::new(
                "arch.interface-owner",
                [a.to_string()],
                format!("interface `{a}` has no original owner `{}`", a.owner()),
            ));
        }
        if a.kind() == AgentKind::InputInterface {
            let owner = a.owner();
            if arch.agents.contains(&AgentId::interface(&owner)) {
                v.push(Violation::new(
                    "arch.interface-kind",
                    [a.to_string()],
                    format!("`{owner}` has both a plain interface and an input interface"),
                ));
            }
            if !arch.agents.contains(&AgentId::output_interface(&owner)) {
                v.push(Violation::new(
                    "arch.interface-kind",
                    [a.to_string()],
                    format!("input interface `{a}` has no matching output interface"),
                ));
            }
        }
    }

    for (a, held) in &arch.holdings {
        if !arch.agents.contains(a) {
            v.push(Violation::new(
                "arch.unknown-agent",
                [a.to_string()],
                format!("holdings given for undeclared agent `{a}`"),
            ));
        }
        for c in held {
            if ts.constructor(c).is_none() {
                v.push(Violation::new(
                    "arch.undeclared-constructor",
                    [a.to_string(), c.to_string()],
                    format!("`{a}` holds undeclared constructor `{c}`"),
                ));
            }
        }
    }

    for ((from, to), types) in &arch.channels {
        let chan = format!("{from} -> {to}");
        for end in [from, to] {
            if !arch.agents.contains(end) {
                v.push(Violation::new(
                    "arch.unknown-agent",
                    [chan.clone()],
                    format!("channel {chan} names undeclared agent `{end}`"),
                ));
            }
        }
        if from == to {
            v.push(Violation::new(
                "arch.self-channel",
                [chan.clone()],
                format!("channel from `{from}` to itself"),
            ));
        }
        for t in types {
            match t.as_atomic() {
                None => v.push(Violation::new(
                    "arch.channel-atomic",
                    [chan.clone(), t.to_string()],
                    format!("channel {chan} carries non-atomic type {t}"),
                )),
                Some(a) if !ts.atomic_types.contains(a) => v.push(Violation::new(
                    "arch.undeclared-type",
                    [chan.clone(), a.to_string()],
                    format!("channel {chan} carries undeclared type {a}"),
                )),
                Some(_) => {}
            }
        }
    }

    VerdictReport::new(v, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn can_compute_examples() {
        let arch = fixtures::coppa_unsafe();
        let child = AgentId::original("Child");
        let web = AgentId::original("Website");
        assert!(arch.can_compute(&child, &AtomicType::base("INFO")).unwrap());
        assert!(!arch.can_compute(&web, &AtomicType::base("INFO")).unwrap());

        let mut empty = Architecture::new(arch.type_system.clone());
        empty.add_agent(child.clone());
        assert!(!empty.can_compute(&child, &AtomicType::base("INFO")).unwrap());
        assert_eq!(
            empty.can_compute(&web, &AtomicType::base("INFO")),
            Err(ArchitectureError::UnknownAgent(web))
        );
    }

    #[test]
    fn coppa_is_valid() {
        let report = fixtures::coppa_unsafe().validate();
        assert!(report.passed, "{report}");
    }

    #[test]
    fn arrow_typed_channel_is_one_violation() {
        let mut arch = fixtures::coppa_unsafe();
        let child = AgentId::original("Child");
        let web = AgentId::original("Website");
        arch.allow_type(
            &child,
            &web,
            TypeExpr::arrow(AtomicType::base("INFO").into(), AtomicType::base("INFO").into()),
        );
        let report = arch.validate();
        assert_eq!(report.violations.len(), 1, "{report}");
        assert_eq!(report.violations[0].premise, "arch.channel-atomic");
        assert!(report.violations[0].witness[0].contains("Child -> Website"));
    }

    #[test]
    fn undeclared_constructor_is_one_violation() {
        let mut arch = fixtures::coppa_unsafe();
        arch.grant(&AgentId::original("Parent"), "ghost");
        let report = arch.validate();
        assert_eq!(report.violations.len(), 1, "{report}");
        assert_eq!(report.violations[0].premise, "arch.undeclared-constructor");
        assert!(report.violations[0].witness.contains(&"ghost".to_string()));
    }

    #[test]
    fn self_channel_is_rejected() {
        let mut arch = fixtures::coppa_unsafe();
        let child = AgentId::original("Child");
        arch.allow(&child, &child, AtomicType::base("INFO"));
        let report = arch.validate();
        assert_eq!(report.of("arch.self-channel").count(), 1);
    }

    #[test]
    fn can_compute_is_monotone_in_holdings() {
        let mut arch = fixtures::coppa_unsafe();
        let web = AgentId::original("Website");
        let before: Vec<bool> = arch
            .type_system
            .atomic_types
            .iter()
            .map(|t| arch.can_compute(&web, t).unwrap())
            .collect();
        arch.grant(&web, "info");
        let after: Vec<bool> = arch
            .type_system
            .atomic_types
            .iter()
            .map(|t| arch.can_compute(&web, t).unwrap())
            .collect();
        assert!(before.iter().zip(&after).all(|(b, a)| !b || *a));
        assert!(arch.can_compute(&web, &AtomicType::base("INFO")).unwrap());
    }

    #[test]
    fn agent_display_and_order() {
        let w = AgentId::original("Website");
        assert_eq!(AgentId::input_interface(&w).to_string(), "I:Website");
        assert_eq!(AgentId::output_interface(&w).to_string(), "O:Website");
        assert_eq!(AgentId::interface(&w).owner(), w);
        assert!(AgentId::original("Zed") < AgentId::input_interface(&w));
    }
}
