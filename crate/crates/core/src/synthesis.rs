//! Safe type systems and safe architectures.
//!
//! Both constructions put certified types `C[a](A)` on every cross-cell
//! channel. The single-interface construction certifies an `A` for `a` only
//! when certified evidence of every required type is supplied; the
//! input/output construction additionally uses proof types `P[b](B)` that only
//! `b`'s output interface can mint, and only from a `B` that `b` handed over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::architecture::{AgentId, AgentKind, Architecture};
use crate::calculus::{AtomicType, ConstructorDecl, Name, TypeSystem};
use crate::constraints::{Constraint, LocalSend, NegCreate, NegPossess};
use crate::report::VerdictReport;
use crate::verify::Partition;

pub const DEFAULT_FAMILY_CAP: usize = 10_000;

/// `m[a](A)`, or `m[a](A){b1,b2}` for one member of a tuple-indexed family.
pub fn m_name(agent: &AgentId, ty: &Name, tuple: Option<&[AgentId]>) -> Name {
    match tuple {
        None => Name::new(format!("m[{agent}]({ty})")),
        Some(bs) => {
            let bs: Vec<String> = bs.iter().map(|b| b.to_string()).collect();
            Name::new(format!("m[{agent}]({ty}){{{}}}", bs.join(",")))
        }
    }
}

pub fn pi_name(agent: &AgentId, ty: &Name) -> Name {
    Name::new(format!("pi[{agent}]({ty})"))
}

pub fn p_name(agent: &AgentId, ty: &Name) -> Name {
    Name::new(format!("p[{agent}]({ty})"))
}

/// `pi[a](A) : C[a](A) -> A`.
pub fn pi_decl(agent: &AgentId, ty: &Name) -> ConstructorDecl {
    ConstructorDecl::with_parts(
        pi_name(agent, ty).as_str(),
        [AtomicType::certified(agent.clone(), ty.as_str())],
        AtomicType::base(ty.as_str()),
    )
}

/// `p[a](A) : A -> P[a](A)`.
pub fn p_decl(agent: &AgentId, ty: &Name) -> ConstructorDecl {
    ConstructorDecl::with_parts(
        p_name(agent, ty).as_str(),
        [AtomicType::base(ty.as_str())],
        AtomicType::proof(agent.clone(), ty.as_str()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    /// Single interface per agent, certified types only.
    One,
    /// Input and output interfaces, certified and proof types.
    Two,
}

impl Algorithm {
    pub fn number(self) -> u8 {
        match self {
            Algorithm::One => 1,
            Algorithm::Two => 2,
        }
    }

    pub fn from_number(n: u64) -> Option<Algorithm> {
        match n {
            1 => Some(Algorithm::One),
            2 => Some(Algorithm::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisConfig {
    pub algorithm: Algorithm,
    /// Largest number of agent tuples one certification family may have.
    pub m_family_cap: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            algorithm: Algorithm::Two,
            m_family_cap: DEFAULT_FAMILY_CAP,
        }
    }
}

impl SynthesisConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SynthesisConfig {
            algorithm,
            ..Default::default()
        }
    }
}

/// Where a synthesized type or constructor came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    #[serde(serialize_with = "crate::report::display")]
    pub agent: AgentId,
    #[serde(serialize_with = "crate::report::display")]
    pub base: Name,
    /// The negative constraints on `(agent, base)`, in argument order.
    #[serde(serialize_with = "display_all")]
    pub constraints: Vec<Constraint>,
}

fn display_all<S: serde::Serializer>(cs: &[Constraint], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(cs.iter().map(|c| c.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeArchitecture {
    pub algorithm: Algorithm,
    pub arch: Architecture,
    pub canonical_partition: Partition,
    /// Keyed by constructor name or rendered type.
    pub provenance: BTreeMap<String, Provenance>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("input architecture is invalid:\n{0}")]
    InvalidArchitecture(VerdictReport),
    #[error("input agent `{0}` is not an original agent")]
    NotOriginal(AgentId),
    #[error("input type {0} is not a base type")]
    NotBase(AtomicType),
    #[error("constraint out of scope: {0}")]
    ConstraintOutOfScope(String),
    #[error("algorithm {algorithm} does not accept constraint `{constraint}`")]
    WrongConstraintForm {
        algorithm: Algorithm,
        constraint: String,
    },
    #[error("certification family for `{agent}` and {ty} needs {size} members, above the cap of {cap}")]
    FamilyTooLarge {
        agent: AgentId,
        ty: Name,
        size: u128,
        cap: usize,
    },
    #[error("`{input}` and `{output}` are not the input and output interfaces of one agent")]
    NotAnInterfacePair { input: AgentId, output: AgentId },
    #[error("cannot grant {0}: not a base type of the architecture")]
    GrantType(AtomicType),
}

fn check_scope(
    ts: &TypeSystem,
    agents: &BTreeSet<AgentId>,
    c: &Constraint,
) -> Result<(), SynthesisError> {
    for a in c.agents() {
        if !agents.contains(a) {
            return Err(SynthesisError::ConstraintOutOfScope(format!(
                "`{c}` names unknown agent `{a}`"
            )));
        }
    }
    for t in c.types() {
        if !t.is_base() || !ts.atomic_types.contains(t) {
            return Err(SynthesisError::ConstraintOutOfScope(format!(
                "`{c}` names {t}, which is not a base type"
            )));
        }
    }
    Ok(())
}

fn check_inputs(ts: &TypeSystem, agents: &BTreeSet<AgentId>) -> Result<(), SynthesisError> {
    if let Some(a) = agents.iter().find(|a| !a.is_original()) {
        return Err(SynthesisError::NotOriginal(a.clone()));
    }
    if let Some(t) = ts.atomic_types.iter().find(|t| !t.is_base()) {
        return Err(SynthesisError::NotBase(t.clone()));
    }
    Ok(())
}

fn certified_types(ts: &mut TypeSystem, agents: &BTreeSet<AgentId>, proofs: bool) -> Vec<(AgentId, Name)> {
    let bases: Vec<Name> = ts.base_types().map(|t| t.inner().clone()).collect();
    let mut pairs = Vec::new();
    for a in agents {
        for b in &bases {
            ts.add_type(AtomicType::certified(a.clone(), b.as_str()));
            if proofs {
                ts.add_type(AtomicType::proof(a.clone(), b.as_str()));
            }
            pairs.push((a.clone(), b.clone()));
        }
    }
    pairs
}

fn insert(ts: &mut TypeSystem, c: ConstructorDecl) {
    // Names produced here cannot clash with user identifiers.
    ts.add_constructor(c).expect("synthesized constructor names are unique");
}

type Built = (TypeSystem, BTreeMap<String, Provenance>);

/// The certified type system for `ni A => B` constraints over `agents`.
pub fn build_safe_type_system_v1(
    ts: &TypeSystem,
    agents: &BTreeSet<AgentId>,
    neg: &[NegCreate],
    cap: usize,
) -> Result<Built, SynthesisError> {
    check_inputs(ts, agents)?;
    for c in neg {
        check_scope(ts, agents, &Constraint::NegCreate(c.clone()))?;
    }
    let mut out = ts.clone();
    let mut prov = BTreeMap::new();
    let pairs = certified_types(&mut out, agents, false);
    let roster: Vec<AgentId> = agents.iter().cloned().collect();

    for (a, ty) in pairs {
        let mut group: Vec<&NegCreate> = neg
            .iter()
            .filter(|c| c.subject == a && c.trigger.inner() == &ty)
            .collect();
        group.sort_by(|x, y| x.required.cmp(&y.required));
        group.dedup();
        let provenance = Provenance {
            agent: a.clone(),
            base: ty.clone(),
            constraints: group.iter().map(|c| Constraint::NegCreate((*c).clone())).collect(),
        };
        let n = group.len() as u32;
        let size = (roster.len() as u128).checked_pow(n).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(SynthesisError::FamilyTooLarge {
                agent: a,
                ty,
                size,
                cap,
            });
        }
        let target = AtomicType::certified(a.clone(), ty.as_str());
        for tuple in tuples(&roster, n as usize) {
            let mut args = vec![AtomicType::base(ty.as_str())];
            args.extend(
                group
                    .iter()
                    .zip(&tuple)
                    .map(|(c, b)| AtomicType::certified(b.clone(), c.required.inner().as_str())),
            );
            let name = m_name(&a, &ty, (n > 0).then_some(&tuple[..]));
            insert(&mut out, ConstructorDecl::with_parts(name.as_str(), args, target.clone()));
            prov.insert(name.to_string(), provenance.clone());
        }
        let pi = pi_decl(&a, &ty);
        prov.insert(pi.name.to_string(), provenance.clone());
        insert(&mut out, pi);
        prov.insert(target.to_string(), provenance);
    }
    Ok((out, prov))
}

/// Every length-`n` sequence over `roster`, in lexicographic order.
fn tuples(roster: &[AgentId], n: usize) -> Vec<Vec<AgentId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                roster.iter().map(move |b| {
                    let mut next = prefix.clone();
                    next.push(b.clone());
                    next
                })
            })
            .collect();
    }
    out
}

/// The certified-and-proof type system for `ni A => b ni B` constraints.
pub fn build_safe_type_system_v2(
    ts: &TypeSystem,
    agents: &BTreeSet<AgentId>,
    neg: &[NegPossess],
) -> Result<Built, SynthesisError> {
    check_inputs(ts, agents)?;
    for c in neg {
        check_scope(ts, agents, &Constraint::NegPossess(c.clone()))?;
    }
    let mut out = ts.clone();
    let mut prov = BTreeMap::new();
    let pairs = certified_types(&mut out, agents, true);

    for (a, ty) in pairs {
        let mut group: Vec<&NegPossess> = neg
            .iter()
            .filter(|c| c.subject == a && c.trigger.inner() == &ty)
            .collect();
        group.sort_by(|x, y| (&x.required, &x.holder).cmp(&(&y.required, &y.holder)));
        group.dedup();
        let provenance = Provenance {
            agent: a.clone(),
            base: ty.clone(),
            constraints: group.iter().map(|c| Constraint::NegPossess((*c).clone())).collect(),
        };
        let mut args = vec![AtomicType::base(ty.as_str())];
        args.extend(
            group
                .iter()
                .map(|c| AtomicType::proof(c.holder.clone(), c.required.inner().as_str())),
        );
        let target = AtomicType::certified(a.clone(), ty.as_str());
        let m = ConstructorDecl::with_parts(m_name(&a, &ty, None).as_str(), args, target.clone());
        for c in [m, pi_decl(&a, &ty), p_decl(&a, &ty)] {
            prov.insert(c.name.to_string(), provenance.clone());
            insert(&mut out, c);
        }
        prov.insert(target.to_string(), provenance.clone());
        prov.insert(AtomicType::proof(a.clone(), ty.as_str()).to_string(), provenance);
    }
    Ok((out, prov))
}

fn check_source(arch: &Architecture) -> Result<(), SynthesisError> {
    let report = arch.validate();
    if !report.passed {
        return Err(SynthesisError::InvalidArchitecture(report));
    }
    check_inputs(&arch.type_system, &arch.agents)
}

fn hypothesis_warnings(arch: &Architecture, triggers: &[(AgentId, AtomicType)]) -> Vec<String> {
    let mut out: Vec<String> = triggers
        .iter()
        .filter(|(a, t)| arch.can_compute(a, t).unwrap_or(false))
        .map(|(a, t)| format!("`{a}` can compute {t} itself, so constraints triggered by it are not guaranteed"))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Builds the safe architecture for `cs` with the configured algorithm.
/// Positive constraints are accepted and ignored; they are goals for the
/// explorer.
pub fn build_safe_architecture(
    arch: &Architecture,
    cs: &[Constraint],
    cfg: &SynthesisConfig,
) -> Result<SafeArchitecture, SynthesisError> {
    match cfg.algorithm {
        Algorithm::One => build_safe_architecture_v1(arch, cs, cfg),
        Algorithm::Two => build_safe_architecture_v2(arch, cs),
    }
}

fn wrong_form(algorithm: Algorithm, c: &Constraint) -> SynthesisError {
    SynthesisError::WrongConstraintForm {
        algorithm,
        constraint: c.to_string(),
    }
}

/// Adds one interface per agent. The interfaces hold every certification
/// constructor and the agent's own unwrappers; agents talk only to their
/// interface, and interfaces exchange certified terms.
pub fn build_safe_architecture_v1(
    arch: &Architecture,
    cs: &[Constraint],
    cfg: &SynthesisConfig,
) -> Result<SafeArchitecture, SynthesisError> {
    check_source(arch)?;
    let mut neg = Vec::new();
    for c in cs {
        match c {
            Constraint::NegCreate(n) => neg.push(n.clone()),
            Constraint::Positive(_) => {}
            other => return Err(wrong_form(Algorithm::One, other)),
        }
    }
    let (ts, provenance) = build_safe_type_system_v1(&arch.type_system, &arch.agents, &neg, cfg.m_family_cap)?;
    let bases: Vec<AtomicType> = arch.type_system.base_types().cloned().collect();
    let mut out = Architecture::new(ts.clone());
    out.holdings = arch.holdings.clone();
    let originals: Vec<AgentId> = arch.agents.iter().cloned().collect();
    let interfaces: Vec<AgentId> = originals.iter().map(AgentId::interface).collect();
    for (a, i) in originals.iter().zip(&interfaces) {
        out.add_agent(a.clone()).add_agent(i.clone());
    }

    let certs: Vec<&ConstructorDecl> = ts
        .constructors
        .values()
        .filter(|c| provenance.contains_key(c.name.as_str()) && c.name.as_str().starts_with("m["))
        .collect();
    for (a, i) in originals.iter().zip(&interfaces) {
        for c in &certs {
            out.grant(i, c.name.as_str());
        }
        for b in &bases {
            out.grant(i, pi_name(a, b.inner()).as_str());
            out.allow(a, i, b.clone()).allow(i, a, b.clone());
        }
    }
    let certified: Vec<AtomicType> = ts
        .atomic_types
        .iter()
        .filter(|t| matches!(t, AtomicType::Certified { .. }))
        .cloned()
        .collect();
    connect_all(&mut out, &interfaces, &certified);

    let triggers: Vec<_> = neg.iter().map(|c| (c.subject.clone(), c.trigger.clone())).collect();
    Ok(SafeArchitecture {
        algorithm: Algorithm::One,
        warnings: hypothesis_warnings(arch, &triggers),
        canonical_partition: Partition::canonical(&out),
        arch: out,
        provenance,
    })
}

fn connect_all(arch: &mut Architecture, interfaces: &[AgentId], types: &[AtomicType]) {
    for x in interfaces {
        for y in interfaces {
            if x != y {
                for t in types {
                    arch.allow(x, y, t.clone());
                }
            }
        }
    }
}

/// Adds an input and an output interface per agent. Output interfaces build
/// certified terms from payloads and proofs; input interfaces unwrap them.
pub fn build_safe_architecture_v2(arch: &Architecture, cs: &[Constraint]) -> Result<SafeArchitecture, SynthesisError> {
    check_source(arch)?;
    let mut neg = Vec::new();
    for c in cs {
        match c {
            Constraint::NegPossess(n) => neg.push(n.clone()),
            Constraint::Positive(_) => {}
            other => return Err(wrong_form(Algorithm::Two, other)),
        }
    }
    let (ts, provenance) = build_safe_type_system_v2(&arch.type_system, &arch.agents, &neg)?;
    let bases: Vec<AtomicType> = arch.type_system.base_types().cloned().collect();
    let mut out = Architecture::new(ts.clone());
    out.holdings = arch.holdings.clone();
    let originals: Vec<AgentId> = arch.agents.iter().cloned().collect();
    let mut interfaces = Vec::new();
    for a in &originals {
        let (i, o) = (AgentId::input_interface(a), AgentId::output_interface(a));
        out.add_agent(a.clone()).add_agent(i.clone()).add_agent(o.clone());
        interfaces.push(i);
        interfaces.push(o);
    }

    let ms: Vec<Name> = originals
        .iter()
        .flat_map(|a| bases.iter().map(move |b| m_name(a, b.inner(), None)))
        .collect();
    for a in &originals {
        let (i, o) = (AgentId::input_interface(a), AgentId::output_interface(a));
        for m in &ms {
            out.grant(&o, m.as_str());
        }
        for b in &bases {
            out.grant(&i, pi_name(a, b.inner()).as_str());
            out.grant(&o, p_name(a, b.inner()).as_str());
            out.allow(&i, a, b.clone()).allow(a, &o, b.clone());
        }
    }
    let wrapped: Vec<AtomicType> = ts.atomic_types.iter().filter(|t| !t.is_base()).cloned().collect();
    connect_all(&mut out, &interfaces, &wrapped);

    let triggers: Vec<_> = neg.iter().map(|c| (c.subject.clone(), c.trigger.clone())).collect();
    Ok(SafeArchitecture {
        algorithm: Algorithm::Two,
        warnings: hypothesis_warnings(arch, &triggers),
        canonical_partition: Partition::canonical(&out),
        arch: out,
        provenance,
    })
}

/// Permission for an input interface to forward a base type straight to its
/// sibling output interface.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Grant {
    pub input: AgentId,
    pub ty: AtomicType,
    pub output: AgentId,
}

impl fmt::Display for Grant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grant {} -> {} : {}", self.input, self.output, self.ty)
    }
}

/// Adds each granted `I:a -> O:a` channel together with the local constraint
/// that the input interface first sends the same term to `a`.
pub fn relax_interface_forwarding(
    sa: &SafeArchitecture,
    grants: &[Grant],
) -> Result<(SafeArchitecture, Vec<LocalSend>), SynthesisError> {
    let mut out = sa.clone();
    let mut locals = Vec::new();
    for g in grants {
        let paired = g.input.kind() == AgentKind::InputInterface
            && g.output.kind() == AgentKind::OutputInterface
            && g.input.base_name() == g.output.base_name()
            && sa.arch.agents.contains(&g.input)
            && sa.arch.agents.contains(&g.output);
        if !paired {
            return Err(SynthesisError::NotAnInterfacePair {
                input: g.input.clone(),
                output: g.output.clone(),
            });
        }
        if !g.ty.is_base() || !sa.arch.type_system.atomic_types.contains(&g.ty) {
            return Err(SynthesisError::GrantType(g.ty.clone()));
        }
        out.arch.allow(&g.input, &g.output, g.ty.clone());
        let local = LocalSend {
            gate_sender: g.input.clone(),
            gate_type: g.ty.clone(),
            gate_receiver: g.output.clone(),
            must_prev_receiver: g.input.owner(),
        };
        if !locals.contains(&local) {
            locals.push(local);
        }
    }
    Ok((out, locals))
}

/// The two forwarding grants that let the children's-privacy example run
/// without changing what the parent and the website may send.
pub fn coppa_grants() -> Vec<Grant> {
    ["Parent", "Website"]
        .into_iter()
        .map(|n| {
            let a = AgentId::original(n);
            Grant {
                input: AgentId::input_interface(&a),
                ty: AtomicType::base("POLICY"),
                output: AgentId::output_interface(&a),
            }
        })
        .collect()
}
