//! The constructor/application calculus: atomic types, arrow types,
//! constructors, terms and syntax-directed type inference.
//!
//! Types are built from atomic types with right-associated arrows. Terms are
//! constructors applied to terms; there are no binders, so structural equality
//! is the only notion of term identity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::architecture::AgentId;

/// An interned identifier. Cheap to clone, compared by content.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: impl AsRef<str>) -> Self {
        Name(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

/// An atomic type. Certified and proof forms always wrap a base type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomicType {
    Base(Name),
    /// `C[reader](inner)`: a wrapped `inner` that only `reader`'s cell may open.
    Certified { reader: AgentId, inner: Name },
    /// `P[holder](inner)`: evidence that `holder` has held an `inner`.
    Proof { holder: AgentId, inner: Name },
}

impl AtomicType {
    pub fn base(name: impl AsRef<str>) -> Self {
        AtomicType::Base(Name::new(name))
    }

    pub fn certified(reader: AgentId, inner: impl AsRef<str>) -> Self {
        AtomicType::Certified {
            reader,
            inner: Name::new(inner),
        }
    }

    pub fn proof(holder: AgentId, inner: impl AsRef<str>) -> Self {
        AtomicType::Proof {
            holder,
            inner: Name::new(inner),
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, AtomicType::Base(_))
    }

    /// The base type name this atomic type is about.
    pub fn inner(&self) -> &Name {
        match self {
            AtomicType::Base(n) => n,
            AtomicType::Certified { inner, .. } | AtomicType::Proof { inner, .. } => inner,
        }
    }
}

impl fmt::Display for AtomicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicType::Base(n) => write!(f, "{n}"),
            AtomicType::Certified { reader, inner } => write!(f, "C[{reader}]({inner})"),
            AtomicType::Proof { holder, inner } => write!(f, "P[{holder}]({inner})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeExpr {
    Atomic(AtomicType),
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
}

impl TypeExpr {
    pub fn arrow(domain: TypeExpr, codomain: TypeExpr) -> Self {
        TypeExpr::Arrow(Box::new(domain), Box::new(codomain))
    }

    /// Builds `A1 -> ... -> An -> target`.
    pub fn signature(args: impl IntoIterator<Item = AtomicType>, target: AtomicType) -> Self {
        let args: Vec<_> = args.into_iter().collect();
        args.into_iter()
            .rev()
            .fold(TypeExpr::Atomic(target), |acc, a| {
                TypeExpr::arrow(TypeExpr::Atomic(a), acc)
            })
    }

    pub fn as_atomic(&self) -> Option<&AtomicType> {
        match self {
            TypeExpr::Atomic(a) => Some(a),
            TypeExpr::Arrow(..) => None,
        }
    }

    /// Every atomic type occurring in the expression.
    pub fn atoms(&self) -> Vec<&AtomicType> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                TypeExpr::Atomic(a) => out.push(a),
                TypeExpr::Arrow(d, c) => {
                    stack.push(c);
                    stack.push(d);
                }
            }
        }
        out
    }
}

impl From<AtomicType> for TypeExpr {
    fn from(a: AtomicType) -> Self {
        TypeExpr::Atomic(a)
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Atomic(a) => write!(f, "{a}"),
            TypeExpr::Arrow(d, c) => match **d {
                TypeExpr::Arrow(..) => write!(f, "({d}) -> {c}"),
                TypeExpr::Atomic(_) => write!(f, "{d} -> {c}"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstructorDecl {
    pub name: Name,
    pub signature: TypeExpr,
}

impl ConstructorDecl {
    pub fn new(name: impl AsRef<str>, signature: TypeExpr) -> Self {
        ConstructorDecl {
            name: Name::new(name),
            signature,
        }
    }

    /// Shorthand for a constructor `args -> target`.
    pub fn with_parts(
        name: impl AsRef<str>,
        args: impl IntoIterator<Item = AtomicType>,
        target: AtomicType,
    ) -> Self {
        ConstructorDecl::new(name, TypeExpr::signature(args, target))
    }
}

/// Splits a constructor signature `A1 -> ... -> An -> T` into its argument
/// types and its target.
pub fn signature_parts(c: &ConstructorDecl) -> Result<(Vec<AtomicType>, AtomicType), CalculusError> {
    let mut args = Vec::new();
    let mut cur = &c.signature;
    loop {
        match cur {
            TypeExpr::Atomic(t) => return Ok((args, t.clone())),
            TypeExpr::Arrow(d, rest) => {
                match d.as_atomic() {
                    Some(a) => args.push(a.clone()),
                    None => {
                        return Err(CalculusError::MalformedSignature {
                            constructor: c.name.clone(),
                            signature: c.signature.clone(),
                        })
                    }
                }
                cur = rest;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermExpr {
    Con(Name),
    App(Arc<TermExpr>, Arc<TermExpr>),
}

impl TermExpr {
    pub fn con(name: impl AsRef<str>) -> Self {
        TermExpr::Con(Name::new(name))
    }

    pub fn app(fun: TermExpr, arg: TermExpr) -> Self {
        TermExpr::App(Arc::new(fun), Arc::new(arg))
    }

    /// `head(a1, ..., an)` as a left-nested application spine.
    pub fn apply(head: impl AsRef<str>, args: impl IntoIterator<Item = TermExpr>) -> Self {
        args.into_iter()
            .fold(TermExpr::con(head), TermExpr::app)
    }

    /// The constructor at the head of the application spine.
    pub fn head(&self) -> &Name {
        let mut cur = self;
        loop {
            match cur {
                TermExpr::Con(n) => return n,
                TermExpr::App(f, _) => cur = f,
            }
        }
    }

    /// Arguments of the application spine, left to right.
    pub fn spine_args(&self) -> Vec<&TermExpr> {
        let mut args = Vec::new();
        let mut cur = self;
        while let TermExpr::App(f, a) = cur {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        args
    }

    /// Number of constructor occurrences.
    pub fn size(&self) -> usize {
        match self {
            TermExpr::Con(_) => 1,
            TermExpr::App(f, a) => f.size() + a.size(),
        }
    }

    /// Constructor names in prefix order.
    pub fn leaves(&self) -> Vec<&Name> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                TermExpr::Con(n) => out.push(n),
                TermExpr::App(f, a) => {
                    stack.push(a);
                    stack.push(f);
                }
            }
        }
        out
    }

    /// Witness order: smaller terms first, ties broken lexicographically on
    /// the prefix sequence of constructor names.
    pub fn canonical_cmp(&self, other: &TermExpr) -> std::cmp::Ordering {
        let (a, b) = (self.leaves(), other.leaves());
        a.len()
            .cmp(&b.len())
            .then_with(|| a.iter().map(|n| n.as_str()).cmp(b.iter().map(|n| n.as_str())))
    }
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head())?;
        let args = self.spine_args();
        if !args.is_empty() {
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalculusError {
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(Name),
    #[error("type mismatch: expected {expected}, found {actual}")]
    TypeMismatch { expected: TypeExpr, actual: TypeExpr },
    #[error("cannot apply a term of non-function type {0}")]
    NotAFunction(TypeExpr),
    #[error("constructor `{constructor}` has malformed signature {signature}")]
    MalformedSignature { constructor: Name, signature: TypeExpr },
    #[error("constructor `{0}` declared twice with different signatures")]
    ConflictingConstructor(Name),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeSystem {
    pub atomic_types: BTreeSet<AtomicType>,
    pub constructors: BTreeMap<Name, ConstructorDecl>,
}

impl TypeSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_type(&mut self, t: AtomicType) -> &mut Self {
        self.atomic_types.insert(t);
        self
    }

    /// Declares a constructor; redeclaring with the same signature is a no-op.
    pub fn add_constructor(&mut self, c: ConstructorDecl) -> Result<&mut Self, CalculusError> {
        if let Some(existing) = self.constructors.get(&c.name) {
            if existing.signature != c.signature {
                return Err(CalculusError::ConflictingConstructor(c.name));
            }
        }
        self.constructors.insert(c.name.clone(), c);
        Ok(self)
    }

    pub fn constructor(&self, name: &Name) -> Option<&ConstructorDecl> {
        self.constructors.get(name)
    }

    pub fn base_types(&self) -> impl Iterator<Item = &AtomicType> {
        self.atomic_types.iter().filter(|t| t.is_base())
    }

    pub fn infer_type(&self, t: &TermExpr) -> Result<TypeExpr, CalculusError> {
        infer_type(self, t)
    }

    /// Atomic types referenced by constructor signatures but not declared.
    pub fn undeclared_types(&self) -> Vec<(Name, AtomicType)> {
        let mut out = Vec::new();
        for c in self.constructors.values() {
            for a in c.signature.atoms() {
                if !self.atomic_types.contains(a) {
                    out.push((c.name.clone(), a.clone()));
                }
            }
        }
        out
    }
}

/// Infers the unique type of a term by constructor lookup and the
/// application rule.
pub fn infer_type(ts: &TypeSystem, t: &TermExpr) -> Result<TypeExpr, CalculusError> {
    match t {
        TermExpr::Con(n) => ts
            .constructor(n)
            .map(|c| c.signature.clone())
            .ok_or_else(|| CalculusError::UnknownConstructor(n.clone())),
        TermExpr::App(f, a) => {
            let fun_ty = infer_type(ts, f)?;
            let arg_ty = infer_type(ts, a)?;
            match fun_ty {
                TypeExpr::Arrow(dom, cod) => {
                    if *dom == arg_ty {
                        Ok(*cod)
                    } else {
                        Err(CalculusError::TypeMismatch {
                            expected: *dom,
                            actual: arg_ty,
                        })
                    }
                }
                other @ TypeExpr::Atomic(_) => Err(CalculusError::NotAFunction(other)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coppa_ts() -> TypeSystem {
        let mut ts = TypeSystem::new();
        for t in ["INFO", "CONSENT", "POLICY"] {
            ts.add_type(AtomicType::base(t));
        }
        ts.add_constructor(ConstructorDecl::with_parts("info", [], AtomicType::base("INFO")))
            .unwrap();
        ts.add_constructor(ConstructorDecl::with_parts("consent", [], AtomicType::base("CONSENT")))
            .unwrap();
        ts.add_constructor(ConstructorDecl::with_parts("policy", [], AtomicType::base("POLICY")))
            .unwrap();
        ts
    }

    #[test]
    fn nullary_constructor_has_its_declared_type() {
        let ts = coppa_ts();
        assert_eq!(
            ts.infer_type(&TermExpr::con("info")).unwrap(),
            TypeExpr::Atomic(AtomicType::base("INFO"))
        );
    }

    #[test]
    fn endo_application() {
        let mut ts = TypeSystem::new();
        let a = AtomicType::base("A");
        ts.add_type(a.clone());
        ts.add_constructor(ConstructorDecl::with_parts("f", [a.clone()], a.clone())).unwrap();
        ts.add_constructor(ConstructorDecl::with_parts("a", [], a.clone())).unwrap();
        let t = TermExpr::app(TermExpr::con("f"), TermExpr::con("a"));
        assert_eq!(ts.infer_type(&t).unwrap(), TypeExpr::Atomic(a));
    }

    #[test]
    fn certified_mint_application() {
        let web = AgentId::original("Website");
        let parent = AgentId::original("Parent");
        let mut ts = coppa_ts();
        let cc = AtomicType::certified(web.clone(), "CONSENT");
        let pp = AtomicType::proof(parent.clone(), "POLICY");
        ts.add_type(cc.clone()).add_type(pp.clone());
        ts.add_constructor(ConstructorDecl::with_parts(
            "mCONSENT",
            [AtomicType::base("CONSENT"), pp.clone()],
            cc.clone(),
        ))
        .unwrap();
        ts.add_constructor(ConstructorDecl::with_parts(
            "pPOLICY",
            [AtomicType::base("POLICY")],
            pp,
        ))
        .unwrap();
        let proof = TermExpr::apply("pPOLICY", [TermExpr::con("policy")]);
        let t = TermExpr::apply("mCONSENT", [TermExpr::con("consent"), proof]);
        assert_eq!(ts.infer_type(&t).unwrap(), TypeExpr::Atomic(cc));
    }

    #[test]
    fn inference_errors() {
        let ts = coppa_ts();
        assert_eq!(
            ts.infer_type(&TermExpr::con("nope")),
            Err(CalculusError::UnknownConstructor(Name::new("nope")))
        );
        let bad = TermExpr::app(TermExpr::con("info"), TermExpr::con("policy"));
        assert!(matches!(ts.infer_type(&bad), Err(CalculusError::NotAFunction(_))));

        let mut ts = coppa_ts();
        ts.add_constructor(ConstructorDecl::with_parts(
            "g",
            [AtomicType::base("INFO")],
            AtomicType::base("POLICY"),
        ))
        .unwrap();
        let bad = TermExpr::app(TermExpr::con("g"), TermExpr::con("policy"));
        assert_eq!(
            ts.infer_type(&bad),
            Err(CalculusError::TypeMismatch {
                expected: AtomicType::base("INFO").into(),
                actual: AtomicType::base("POLICY").into(),
            })
        );
    }

    #[test]
    fn signature_parts_examples() {
        let info = ConstructorDecl::with_parts("info", [], AtomicType::base("INFO"));
        assert_eq!(signature_parts(&info).unwrap(), (vec![], AtomicType::base("INFO")));

        let web = AgentId::original("Website");
        let c = AtomicType::certified(web.clone(), "INFO");
        let pi = ConstructorDecl::with_parts("pi", [c.clone()], AtomicType::base("INFO"));
        assert_eq!(signature_parts(&pi).unwrap(), (vec![c.clone()], AtomicType::base("INFO")));

        let p = AtomicType::proof(AgentId::original("Parent"), "CONSENT");
        let m = ConstructorDecl::with_parts("m", [AtomicType::base("INFO"), p.clone()], c.clone());
        assert_eq!(signature_parts(&m).unwrap(), (vec![AtomicType::base("INFO"), p], c));

        let higher = ConstructorDecl::new(
            "h",
            TypeExpr::arrow(
                TypeExpr::arrow(AtomicType::base("A").into(), AtomicType::base("B").into()),
                AtomicType::base("B").into(),
            ),
        );
        assert!(matches!(
            signature_parts(&higher),
            Err(CalculusError::MalformedSignature { .. })
        ));
    }

    #[test]
    fn display_forms() {
        let t = TermExpr::apply(
            "m",
            [TermExpr::con("consent"), TermExpr::apply("p", [TermExpr::con("policy")])],
        );
        assert_eq!(t.to_string(), "m(consent, p(policy))");
        assert_eq!(t.size(), 4);
        let sig = TypeExpr::signature(
            [AtomicType::base("A"), AtomicType::base("B")],
            AtomicType::base("C"),
        );
        assert_eq!(sig.to_string(), "A -> B -> C");
        assert_eq!(
            AtomicType::certified(AgentId::original("W"), "INFO").to_string(),
            "C[W](INFO)"
        );
    }

    #[test]
    fn canonical_order_prefers_small_then_lexicographic() {
        let small = TermExpr::con("z");
        let big = TermExpr::apply("a", [TermExpr::con("a")]);
        assert!(small.canonical_cmp(&big).is_lt());
        let x = TermExpr::apply("f", [TermExpr::con("a")]);
        let y = TermExpr::apply("f", [TermExpr::con("b")]);
        assert!(x.canonical_cmp(&y).is_lt());
        assert!(x.canonical_cmp(&x.clone()).is_eq());
    }

    #[test]
    fn conflicting_redeclaration_is_rejected() {
        let mut ts = coppa_ts();
        let again = ConstructorDecl::with_parts("info", [], AtomicType::base("INFO"));
        assert!(ts.add_constructor(again).is_ok());
        let clash = ConstructorDecl::with_parts("info", [], AtomicType::base("POLICY"));
        assert!(ts.add_constructor(clash).is_err());
    }
}
