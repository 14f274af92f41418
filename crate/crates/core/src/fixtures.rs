//! The children's-privacy running example: a child, a website and a parent,
//! built programmatically. The same architecture ships as `fixtures/coppa.parch`.

use crate::architecture::{AgentId, Architecture};
use crate::calculus::{AtomicType, ConstructorDecl, TypeSystem};
use crate::constraints::{Constraint, NegCreate, NegPossess, Positive};

pub fn child() -> AgentId {
    AgentId::original("Child")
}

pub fn website() -> AgentId {
    AgentId::original("Website")
}

pub fn parent() -> AgentId {
    AgentId::original("Parent")
}

pub fn info() -> AtomicType {
    AtomicType::base("INFO")
}

pub fn consent() -> AtomicType {
    AtomicType::base("CONSENT")
}

pub fn policy() -> AtomicType {
    AtomicType::base("POLICY")
}

pub fn coppa_type_system() -> TypeSystem {
    let mut ts = TypeSystem::new();
    ts.add_type(info()).add_type(consent()).add_type(policy());
    for (c, t) in [("info", info()), ("consent", consent()), ("policy", policy())] {
        ts.add_constructor(ConstructorDecl::with_parts(c, [], t))
            .expect("fresh constructor");
    }
    ts
}

/// The breach-prone architecture: the child may send its info straight to
/// the website.
pub fn coppa_unsafe() -> Architecture {
    let mut arch = Architecture::new(coppa_type_system());
    let (c, w, p) = (child(), website(), parent());
    arch.add_agent(c.clone()).add_agent(w.clone()).add_agent(p.clone());
    arch.grant(&c, "info").grant(&w, "policy").grant(&p, "consent");
    arch.allow(&c, &w, info())
        .allow(&w, &p, policy())
        .allow(&p, &w, consent());
    arch
}

/// `Website ni INFO => Website ni CONSENT` and
/// `Website ni CONSENT => Parent ni POLICY`.
pub fn coppa_negative() -> Vec<NegPossess> {
    vec![
        NegPossess::new(website(), info(), website(), consent()).expect("non-trivial"),
        NegPossess::new(website(), consent(), parent(), policy()).expect("non-trivial"),
    ]
}

pub fn coppa_constraints() -> Vec<Constraint> {
    let mut out: Vec<Constraint> = coppa_negative().into_iter().map(Constraint::NegPossess).collect();
    out.push(Constraint::Positive(Positive::new(website(), info())));
    out
}

/// The same obligations in `ni A => B` form, for the single-interface
/// construction.
pub fn coppa_create_constraints() -> Vec<Constraint> {
    vec![
        Constraint::NegCreate(NegCreate::new(website(), info(), consent())),
        Constraint::NegCreate(NegCreate::new(website(), consent(), policy())),
        Constraint::Positive(Positive::new(website(), info())),
    ]
}
