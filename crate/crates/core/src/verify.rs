//! Partition checks for architectures over a safe type system.
//!
//! A passing report means every trace through the architecture satisfies the
//! given negative constraints. The checks never assume the architecture came
//! from [`crate::synthesis`]; hand-edited outputs can be re-verified.
//!
//! Premise identifiers: `T1.*` for `ni A => B` constraints over certified
//! types, `T3.*` for `ni A => b ni B` constraints over certified and proof
//! types, and `P.*` for a malformed partition.

use std::collections::{BTreeMap, BTreeSet};

use crate::architecture::{validate_architecture, AgentId, Architecture};
use crate::calculus::{signature_parts, AtomicType, ConstructorDecl, Name, TypeExpr};
use crate::constraints::{LocalSend, NegCreate, NegPossess};
use crate::report::{VerdictReport, Violation};
use crate::synthesis::{p_decl, p_name, pi_decl, pi_name};

/// Maps every agent to the original agent whose cell it belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    owner: BTreeMap<AgentId, AgentId>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, member: AgentId, owner: AgentId) -> &mut Self {
        self.owner.insert(member, owner);
        self
    }

    /// Each agent in its owner's cell: `{a, I:a}` or `{a, I:a, O:a}`.
    pub fn canonical(arch: &Architecture) -> Self {
        Partition {
            owner: arch.agents.iter().map(|a| (a.clone(), a.owner())).collect(),
        }
    }

    pub fn owner_of(&self, a: &AgentId) -> Option<&AgentId> {
        self.owner.get(a)
    }

    pub fn assignments(&self) -> impl Iterator<Item = (&AgentId, &AgentId)> + '_ {
        self.owner.iter()
    }

    pub fn cells(&self) -> BTreeMap<AgentId, BTreeSet<AgentId>> {
        let mut out: BTreeMap<AgentId, BTreeSet<AgentId>> = BTreeMap::new();
        for (m, o) in &self.owner {
            out.entry(o.clone()).or_default().insert(m.clone());
        }
        out
    }

    pub fn cell(&self, owner: &AgentId) -> BTreeSet<AgentId> {
        self.owner
            .iter()
            .filter(|(_, o)| *o == owner)
            .map(|(m, _)| m.clone())
            .collect()
    }
}

/// Same name and signature as the canonical declaration.
fn is_canonical(c: &ConstructorDecl, expected: ConstructorDecl) -> bool {
    c.name == expected.name && c.signature == expected.signature
}

fn canonical_pi(c: &ConstructorDecl) -> Option<(AgentId, Name)> {
    let (args, _) = signature_parts(c).ok()?;
    match args.as_slice() {
        [AtomicType::Certified { reader, inner }] if is_canonical(c, pi_decl(reader, inner)) => {
            Some((reader.clone(), inner.clone()))
        }
        _ => None,
    }
}

fn canonical_p(c: &ConstructorDecl) -> Option<(AgentId, Name)> {
    match signature_parts(c).ok()?.1 {
        AtomicType::Proof { holder, inner } if is_canonical(c, p_decl(&holder, &inner)) => Some((holder, inner)),
        _ => None,
    }
}

fn structural(arch: &Architecture, p: &Partition) -> Vec<Violation> {
    let mut v = Vec::new();
    for a in &arch.agents {
        match p.owner_of(a) {
            None => v.push(Violation::new(
                "P.total",
                [a.to_string()],
                format!("`{a}` is in no cell"),
            )),
            Some(o) if !o.is_original() || !arch.agents.contains(o) => v.push(Violation::new(
                "P.owner",
                [a.to_string(), o.to_string()],
                format!("`{a}` is assigned to `{o}`, which is not an original agent"),
            )),
            _ => {}
        }
    }
    for (m, _) in p.assignments() {
        if !arch.agents.contains(m) {
            v.push(Violation::new(
                "P.unknown",
                [m.to_string()],
                format!("partition places unknown agent `{m}`"),
            ));
        }
    }
    v
}

fn self_membership(arch: &Architecture, p: &Partition, premise: &str) -> Vec<Violation> {
    arch.originals()
        .filter(|a| p.owner_of(a).is_some_and(|o| o != *a))
        .map(|a| {
            Violation::new(
                premise,
                [a.to_string()],
                format!("`{a}` is not in its own cell"),
            )
        })
        .collect()
}

fn cross_cell(arch: &Architecture, p: &Partition, premise: &str, allow_proof: bool) -> Vec<Violation> {
    let mut v = Vec::new();
    for ((from, to), types) in &arch.channels {
        let (Some(a), Some(b)) = (p.owner_of(from), p.owner_of(to)) else {
            continue;
        };
        if a == b {
            continue;
        }
        for t in types {
            let ok = match t {
                TypeExpr::Atomic(AtomicType::Certified { .. }) => true,
                TypeExpr::Atomic(AtomicType::Proof { .. }) => allow_proof,
                _ => false,
            };
            if !ok {
                let allowed = if allow_proof { "certified or proof" } else { "certified" };
                v.push(Violation::new(
                    premise,
                    [format!("{from} -> {to}"), t.to_string()],
                    format!("channel {from} -> {to} crosses cells with {t}, which is not a {allowed} type"),
                ));
            }
        }
    }
    v
}

fn unwrapper_placement(arch: &Architecture, p: &Partition, premise: &str) -> Vec<Violation> {
    let mut v = Vec::new();
    for (holder, held) in &arch.holdings {
        for c in held.iter().filter_map(|n| arch.type_system.constructor(n)) {
            if let Some((owner, _)) = canonical_pi(c) {
                if p.owner_of(holder).is_some_and(|o| *o != owner) {
                    v.push(Violation::new(
                        premise,
                        [holder.to_string(), c.name.to_string()],
                        format!("`{holder}` holds `{}` outside the cell of `{owner}`", c.name),
                    ));
                }
            }
        }
    }
    v
}

/// Inside `owner`'s cell the only constructor with target `ty` is the
/// matching unwrapper.
fn confinement(arch: &Architecture, p: &Partition, owner: &AgentId, ty: &Name, premise: &str) -> Vec<Violation> {
    let mut v = Vec::new();
    let expected = pi_name(owner, ty);
    let target = AtomicType::base(ty.as_str());
    for member in p.cell(owner) {
        for n in arch.holdings_of(&member) {
            let Some(c) = arch.type_system.constructor(n) else {
                continue;
            };
            let Ok((_, t)) = signature_parts(c) else {
                continue;
            };
            if t == target && !(c.name == expected && canonical_pi(c).is_some()) {
                v.push(Violation::new(
                    premise,
                    [member.to_string(), c.name.to_string()],
                    format!("`{member}` in the cell of `{owner}` holds `{}`, which produces {ty}", c.name),
                ));
            }
        }
    }
    v
}

fn misnamed(c: &ConstructorDecl, premise: &str) -> Option<Violation> {
    let s = c.name.as_str();
    let suspicious = (s.starts_with("pi[") && canonical_pi(c).is_none())
        || (s.starts_with("p[") && canonical_p(c).is_none());
    suspicious.then(|| {
        Violation::new(
            premise,
            [c.name.to_string()],
            format!("`{}` has a reserved name but signature {}", c.name, c.signature),
        )
    })
}

/// Type-system conformance for certified types: building `C[a](A)` needs the
/// payload and, for each `a ni A => B`, a certified `B`.
fn certified_shape(arch: &Architecture, neg: &[NegCreate], premise: &str) -> Vec<Violation> {
    let mut v = Vec::new();
    for c in arch.type_system.constructors.values() {
        v.extend(misnamed(c, premise));
        let Ok((args, target)) = signature_parts(c) else {
            continue;
        };
        let AtomicType::Certified { reader, inner } = &target else {
            continue;
        };
        if !args.contains(&AtomicType::base(inner.as_str())) {
            v.push(Violation::new(
                premise,
                [c.name.to_string()],
                format!("`{}` builds {target} without taking an {inner}", c.name),
            ));
        }
        for n in neg.iter().filter(|n| &n.subject == reader && n.trigger.inner() == inner) {
            let covered = args
                .iter()
                .any(|a| matches!(a, AtomicType::Certified { inner: b, .. } if b == n.required.inner()));
            if !covered {
                v.push(Violation::new(
                    premise,
                    [c.name.to_string()],
                    format!("`{}` builds {target} without certified evidence of {}", c.name, n.required),
                ));
            }
        }
    }
    v
}

/// Type-system conformance for proof types: proofs come only from `p`, and
/// building `C[a](A)` needs a proof for each `a ni A => b ni B`.
fn proof_shape(arch: &Architecture, neg: &[NegPossess], premise: &str) -> Vec<Violation> {
    let mut v = Vec::new();
    for c in arch.type_system.constructors.values() {
        v.extend(misnamed(c, premise));
        let Ok((args, target)) = signature_parts(c) else {
            continue;
        };
        match &target {
            AtomicType::Proof { .. } if canonical_p(c).is_none() => v.push(Violation::new(
                premise,
                [c.name.to_string()],
                format!("`{}` builds {target} but is not its proof constructor", c.name),
            )),
            AtomicType::Certified { reader, inner } => {
                for n in neg.iter().filter(|n| &n.subject == reader && n.trigger.inner() == inner) {
                    let needed = AtomicType::proof(n.holder.clone(), n.required.inner().as_str());
                    if !args.contains(&needed) {
                        v.push(Violation::new(
                            premise,
                            [c.name.to_string()],
                            format!("`{}` builds {target} without a {needed}", c.name),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    v
}

/// Checks the certified-type partition conditions for `ni A => B`
/// constraints.
pub fn verify_theorem1(arch: &Architecture, p: &Partition, neg: &[NegCreate]) -> VerdictReport {
    let mut v = validate_architecture(arch).violations;
    v.extend(structural(arch, p));
    v.extend(certified_shape(arch, neg, "T1.0"));
    v.extend(self_membership(arch, p, "T1.1"));
    v.extend(cross_cell(arch, p, "T1.2", false));
    v.extend(unwrapper_placement(arch, p, "T1.3"));
    let pairs: BTreeSet<(AgentId, Name)> = neg.iter().map(|c| (c.subject.clone(), c.trigger.inner().clone())).collect();
    for (a, t) in &pairs {
        v.extend(confinement(arch, p, a, t, "T1.4"));
    }
    VerdictReport::new(v, Vec::new())
}

/// Checks the proof-type partition conditions for `ni A => b ni B`
/// constraints.
pub fn verify_theorem3(arch: &Architecture, p: &Partition, neg: &[NegPossess]) -> VerdictReport {
    verify_theorem3_gated(arch, p, neg, &[])
}

/// As [`verify_theorem3`], but an extra channel `g -> b` of type `A` into the
/// holder `b` of `p[a](A)` is accepted when a local constraint forces `g` to
/// send the same term to `a` first.
pub fn verify_theorem3_gated(
    arch: &Architecture,
    p: &Partition,
    neg: &[NegPossess],
    locals: &[LocalSend],
) -> VerdictReport {
    let mut v = validate_architecture(arch).violations;
    let mut warnings = Vec::new();
    v.extend(structural(arch, p));
    v.extend(proof_shape(arch, neg, "T3.0"));
    v.extend(self_membership(arch, p, "T3.1"));
    v.extend(cross_cell(arch, p, "T3.2", true));
    v.extend(unwrapper_placement(arch, p, "T3.3"));

    for (holder, held) in &arch.holdings {
        for c in held.iter().filter_map(|n| arch.type_system.constructor(n)) {
            let Some((owner, inner)) = canonical_p(c) else {
                continue;
            };
            let ty = AtomicType::base(inner.as_str());
            if arch.can_compute(holder, &ty).unwrap_or(false) {
                v.push(Violation::new(
                    "T3.4",
                    [holder.to_string(), c.name.to_string()],
                    format!("`{holder}` holds `{}` but can compute {ty} itself", c.name),
                ));
            }
            for ((from, to), types) in &arch.channels {
                if to != holder || *from == owner || !types.contains(&TypeExpr::Atomic(ty.clone())) {
                    continue;
                }
                let gated = locals.iter().any(|l| {
                    &l.gate_sender == from
                        && &l.gate_receiver == holder
                        && l.gate_type == ty
                        && l.must_prev_receiver == owner
                });
                if gated {
                    warnings.push(format!(
                        "{from} -> {holder} : {ty} relies on the local constraint that `{from}` first sends the term to `{owner}`"
                    ));
                } else {
                    v.push(Violation::new(
                        "T3.5",
                        [format!("{from} -> {holder}"), p_name(&owner, &inner).to_string()],
                        format!("`{holder}` holds `{}` and receives {ty} from `{from}`, not only from `{owner}`", c.name),
                    ));
                }
            }
        }
    }

    let pairs: BTreeSet<(AgentId, Name)> = neg.iter().map(|c| (c.subject.clone(), c.trigger.inner().clone())).collect();
    for (a, t) in &pairs {
        v.extend(confinement(arch, p, a, t, "T3.6"));
    }
    VerdictReport::new(v, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Constraint;
    use crate::fixtures::*;
    use crate::synthesis::*;

    fn v1() -> SafeArchitecture {
        build_safe_architecture(&coppa_unsafe(), &coppa_create_constraints(), &SynthesisConfig::new(Algorithm::One)).unwrap()
    }

    fn v2() -> SafeArchitecture {
        build_safe_architecture(&coppa_unsafe(), &coppa_constraints(), &SynthesisConfig::default()).unwrap()
    }

    fn creates() -> Vec<NegCreate> {
        coppa_create_constraints()
            .into_iter()
            .filter_map(|c| match c {
                Constraint::NegCreate(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn synthesized_v1_passes() {
        let sa = v1();
        let r = verify_theorem1(&sa.arch, &sa.canonical_partition, &creates());
        assert!(r.passed, "{r}");
    }

    #[test]
    fn cross_cell_base_channel_breaks_premise_two() {
        let sa = v1();
        let mut arch = sa.arch.clone();
        arch.allow(&AgentId::interface(&child()), &AgentId::interface(&website()), info());
        let r = verify_theorem1(&arch, &sa.canonical_partition, &creates());
        assert_eq!(r.violations.len(), 1, "{r}");
        assert_eq!(r.violations[0].premise, "T1.2");
    }

    #[test]
    fn misplaced_unwrapper_breaks_premise_three() {
        let sa = v1();
        let mut arch = sa.arch.clone();
        arch.grant(&AgentId::interface(&child()), pi_name(&website(), &Name::new("INFO")).as_str());
        let r = verify_theorem1(&arch, &sa.canonical_partition, &creates());
        assert_eq!(r.violations.len(), 1, "{r}");
        assert_eq!(r.violations[0].premise, "T1.3");
    }

    #[test]
    fn synthesized_v2_passes() {
        let sa = v2();
        let r = verify_theorem3(&sa.arch, &sa.canonical_partition, &coppa_negative());
        assert!(r.passed, "{r}");
        assert_eq!(sa.canonical_partition.cells().len(), 3);
        assert!(sa.canonical_partition.cells().values().all(|c| c.len() == 3));
    }

    #[test]
    fn proof_holder_that_computes_breaks_premise_four() {
        let sa = v2();
        let mut arch = sa.arch.clone();
        let ow = AgentId::output_interface(&website());
        arch.grant(&ow, "consent");
        let r = verify_theorem3(&arch, &sa.canonical_partition, &coppa_negative());
        assert_eq!(r.of("T3.4").count(), 1, "{r}");
        // `Website ni CONSENT` is itself constrained, so the cell is no longer confined either.
        assert!(r.violations.iter().all(|x| x.premise == "T3.4" || x.premise == "T3.6"), "{r}");
    }

    #[test]
    fn foreign_feed_into_proof_holder_breaks_premise_five() {
        let sa = v2();
        let mut arch = sa.arch.clone();
        arch.allow(&parent(), &AgentId::output_interface(&website()), consent());
        let r = verify_theorem3(&arch, &sa.canonical_partition, &coppa_negative());
        // The same channel also crosses cells with a base type.
        assert_eq!(r.of("T3.5").count(), 1, "{r}");
        assert!(r.of("T3.5").next().unwrap().witness.contains(&"p[Website](CONSENT)".to_string()));
    }

    #[test]
    fn relaxed_channels_need_the_gate() {
        let sa = v2();
        let (relaxed, locals) = relax_interface_forwarding(&sa, &coppa_grants()).unwrap();
        let plain = verify_theorem3(&relaxed.arch, &relaxed.canonical_partition, &coppa_negative());
        assert_eq!(plain.of("T3.5").count(), 2, "{plain}");
        let gated = verify_theorem3_gated(&relaxed.arch, &relaxed.canonical_partition, &coppa_negative(), &locals);
        assert!(gated.passed, "{gated}");
        assert_eq!(gated.warnings.len(), 2);
    }

    #[test]
    fn own_cell_violation_and_unassigned_agent() {
        let sa = v2();
        let mut p = sa.canonical_partition.clone();
        p.assign(child(), website());
        let r = verify_theorem3(&sa.arch, &p, &coppa_negative());
        assert!(r.of("T3.1").count() == 1, "{r}");

        let mut partial = Partition::new();
        partial.assign(child(), child());
        let r = verify_theorem3(&sa.arch, &partial, &coppa_negative());
        assert_eq!(r.of("P.total").count(), 8);
    }

    #[test]
    fn rogue_certifier_breaks_conformance() {
        let sa = v2();
        let mut arch = sa.arch.clone();
        let rogue = ConstructorDecl::with_parts("shortcut", [info()], AtomicType::certified(website(), "INFO"));
        arch.grant_decl(&AgentId::output_interface(&child()), rogue);
        let r = verify_theorem3(&arch, &sa.canonical_partition, &coppa_negative());
        assert_eq!(r.of("T3.0").count(), 1, "{r}");
    }

    #[test]
    fn extra_producer_in_cell_breaks_confinement() {
        let sa = v1();
        let mut arch = sa.arch.clone();
        arch.grant(&AgentId::interface(&website()), "info");
        let r = verify_theorem1(&arch, &sa.canonical_partition, &creates());
        assert_eq!(r.of("T1.4").count(), 1, "{r}");
    }
}
