use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, Pos, Spanned, Tok};
use super::{DocOptions, FrontendError, SpecDocument};
use crate::architecture::{AgentId, AgentKind, Architecture};
use crate::calculus::{AtomicType, ConstructorDecl, Name, TermExpr, TypeExpr, TypeSystem};
use crate::constraints::{Constraint, LocalSend, NegCreate, NegPossess, Positive};
use crate::synthesis::{Algorithm, Grant};
use crate::trace::{Event, Trace};
use crate::verify::Partition;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RawAgent {
    prefix: Option<char>,
    name: String,
}

#[derive(Debug, Clone)]
enum RawType {
    Base(String),
    Wrapped { proof: bool, agent: RawAgent, inner: String },
}

#[derive(Debug, Clone)]
enum RawExpr {
    Atom(RawType, Pos),
    Arrow(Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug, Clone)]
enum RawConstraint {
    Create(RawAgent, RawType, RawType),
    Possess(RawAgent, RawType, RawAgent, RawType),
    Pos(RawAgent, RawType),
    Local(RawAgent, RawAgent, RawType, RawAgent),
}

#[derive(Debug, Clone)]
enum Stmt {
    Types(Vec<(RawType, Pos)>),
    Agent(RawAgent, Vec<(String, Option<RawExpr>, Pos)>),
    Ctor(Vec<(String, RawExpr, Pos)>),
    Channel(RawAgent, RawAgent, Vec<RawExpr>),
    Constraint(RawConstraint),
    Opt(String, u64),
}

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
}

fn lex_err((pos, c): (Pos, char)) -> FrontendError {
    FrontendError::Parse {
        line: pos.line,
        col: pos.col,
        expected: vec!["a token".into()],
        found: format!("`{c}`"),
    }
}

impl Parser {
    fn new(text: &str) -> Result<Parser, FrontendError> {
        Ok(Parser {
            toks: lex(text).map_err(lex_err)?,
            i: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, FrontendError> {
        let p = self.pos();
        Err(FrontendError::Parse {
            line: p.line,
            col: p.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), FrontendError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(&[&t.to_string()])
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(&[what]),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn agent(&mut self) -> Result<RawAgent, FrontendError> {
        let first = self.ident("agent name")?;
        if (first == "I" || first == "O") && self.peek() == &Tok::Colon && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let name = self.ident("agent name")?;
            return Ok(RawAgent {
                prefix: first.chars().next(),
                name,
            });
        }
        Ok(RawAgent {
            prefix: None,
            name: first,
        })
    }

    fn atomic(&mut self) -> Result<RawType, FrontendError> {
        let head = self.ident("type name")?;
        if (head == "C" || head == "P") && self.peek() == &Tok::LBracket {
            self.bump();
            let agent = self.agent()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::LParen)?;
            let inner = self.ident("base type name")?;
            self.expect(Tok::RParen)?;
            return Ok(RawType::Wrapped {
                proof: head == "P",
                agent,
                inner,
            });
        }
        Ok(RawType::Base(head))
    }

    fn type_expr(&mut self) -> Result<RawExpr, FrontendError> {
        let pos = self.pos();
        let left = if self.eat(&Tok::LParen) {
            let inner = self.type_expr()?;
            self.expect(Tok::RParen)?;
            inner
        } else {
            RawExpr::Atom(self.atomic()?, pos)
        };
        if self.eat(&Tok::Arrow) {
            Ok(RawExpr::Arrow(Box::new(left), Box::new(self.type_expr()?)))
        } else {
            Ok(left)
        }
    }

    /// A constructor name: an identifier, or a synthesized form such as
    /// `m[Website](INFO){Child}`, `pi[Website](INFO)` or `p[Parent](POLICY)`.
    fn ctor_name(&mut self) -> Result<String, FrontendError> {
        let head = self.ident("constructor name")?;
        if !matches!(head.as_str(), "m" | "pi" | "p") || self.peek() != &Tok::LBracket {
            return Ok(head);
        }
        self.bump();
        let agent = self.agent()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::LParen)?;
        let ty = self.ident("base type name")?;
        self.expect(Tok::RParen)?;
        let mut name = format!("{head}[{}]({ty})", render(&agent));
        if head == "m" && self.eat(&Tok::LBrace) {
            let mut bs = vec![render(&self.agent()?)];
            while self.eat(&Tok::Comma) {
                bs.push(render(&self.agent()?));
            }
            self.expect(Tok::RBrace)?;
            name.push_str(&format!("{{{}}}", bs.join(",")));
        }
        Ok(name)
    }

    fn term(&mut self) -> Result<TermExpr, FrontendError> {
        let head = self.ctor_name()?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            args.push(self.term()?);
            while self.eat(&Tok::Comma) {
                args.push(self.term()?);
            }
            self.expect(Tok::RParen)?;
        }
        Ok(TermExpr::apply(head, args))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, FrontendError>) -> Result<Vec<T>, FrontendError> {
        let mut out = vec![item(self)?];
        while self.eat(&Tok::Comma) {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn constraint(&mut self) -> Result<RawConstraint, FrontendError> {
        if self.keyword("pos") && self.peek_at(1) == &Tok::LParen {
            self.bump();
            self.bump();
            let a = self.agent()?;
            self.expect(Tok::Comma)?;
            let t = self.atomic()?;
            self.expect(Tok::RParen)?;
            return Ok(RawConstraint::Pos(a, t));
        }
        if self.keyword("local") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let s = self.agent()?;
            self.expect(Tok::Arrow)?;
            let r = self.agent()?;
            self.expect(Tok::Colon)?;
            let t = self.atomic()?;
            if !self.keyword("after") {
                return self.fail(&["`after`"]);
            }
            self.bump();
            let m = self.agent()?;
            return Ok(RawConstraint::Local(s, r, t, m));
        }
        let subject = self.agent()?;
        if !self.keyword("ni") {
            return self.fail(&["`ni`"]);
        }
        self.bump();
        let trigger = self.atomic()?;
        self.expect(Tok::Implies)?;
        // `X ni B` or a bare type `B`.
        let save = self.i;
        if matches!(self.peek(), Tok::Ident(_)) {
            let who = self.agent()?;
            if self.keyword("ni") {
                self.bump();
                let required = self.atomic()?;
                return Ok(RawConstraint::Possess(subject, trigger, who, required));
            }
            self.i = save;
        }
        Ok(RawConstraint::Create(subject, trigger, self.atomic()?))
    }

    fn statement(&mut self) -> Result<Stmt, FrontendError> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.fail(&["`types`", "`agent`", "`ctor`", "`channel`", "`constraint`", "`option`"]),
        };
        let stmt = match kw.as_str() {
            "types" => {
                self.bump();
                Stmt::Types(self.list(|p| {
                    let pos = p.pos();
                    Ok((p.atomic()?, pos))
                })?)
            }
            "agent" => {
                self.bump();
                let a = self.agent()?;
                let mut held = Vec::new();
                if self.keyword("holds") {
                    self.bump();
                    held = self.list(|p| {
                        let pos = p.pos();
                        let name = p.ctor_name()?;
                        let sig = if p.eat(&Tok::Colon) { Some(p.type_expr()?) } else { None };
                        Ok((name, sig, pos))
                    })?;
                }
                Stmt::Agent(a, held)
            }
            "ctor" => {
                self.bump();
                Stmt::Ctor(self.list(|p| {
                    let pos = p.pos();
                    let name = p.ctor_name()?;
                    p.expect(Tok::Colon)?;
                    Ok((name, p.type_expr()?, pos))
                })?)
            }
            "channel" => {
                self.bump();
                let from = self.agent()?;
                self.expect(Tok::Arrow)?;
                let to = self.agent()?;
                self.expect(Tok::Colon)?;
                Stmt::Channel(from, to, self.list(|p| p.type_expr())?)
            }
            "constraint" => {
                self.bump();
                Stmt::Constraint(self.constraint()?)
            }
            "option" => {
                self.bump();
                let key = self.ident("option name")?;
                let value = match self.peek() {
                    Tok::Number(n) => *n,
                    _ => return self.fail(&["number"]),
                };
                self.bump();
                Stmt::Opt(key, value)
            }
            _ => return self.fail(&["`types`", "`agent`", "`ctor`", "`channel`", "`constraint`", "`option`"]),
        };
        self.expect(Tok::Semi)?;
        Ok(stmt)
    }
}

fn render(a: &RawAgent) -> String {
    match a.prefix {
        Some(p) => format!("{p}:{}", a.name),
        None => a.name.clone(),
    }
}

fn resolve_err(pos: Pos, message: impl Into<String>) -> FrontendError {
    FrontendError::Resolve {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

/// Maps raw agent references to agents. `I:X` names an input interface when
/// `O:X` exists, and the single interface otherwise.
struct Agents<'a> {
    has_output: &'a dyn Fn(&str) -> bool,
}

impl Agents<'_> {
    fn id(&self, a: &RawAgent) -> AgentId {
        match a.prefix {
            None => AgentId::original(&a.name),
            Some('O') => AgentId::with_kind(AgentKind::OutputInterface, &a.name),
            Some(_) if (self.has_output)(&a.name) => AgentId::with_kind(AgentKind::InputInterface, &a.name),
            Some(_) => AgentId::with_kind(AgentKind::Interface, &a.name),
        }
    }

    fn ty(&self, t: &RawType) -> AtomicType {
        match t {
            RawType::Base(n) => AtomicType::base(n),
            RawType::Wrapped { proof: false, agent, inner } => AtomicType::certified(self.id(agent), inner),
            RawType::Wrapped { proof: true, agent, inner } => AtomicType::proof(self.id(agent), inner),
        }
    }

    fn expr(&self, e: &RawExpr) -> TypeExpr {
        match e {
            RawExpr::Atom(t, _) => TypeExpr::Atomic(self.ty(t)),
            RawExpr::Arrow(d, c) => TypeExpr::arrow(self.expr(d), self.expr(c)),
        }
    }
}

fn statements(text: &str) -> Result<Vec<(Stmt, Pos)>, FrontendError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while p.peek() != &Tok::Eof {
        let pos = p.pos();
        out.push((p.statement()?, pos));
    }
    if out.is_empty() {
        return p.fail(&["a statement"]);
    }
    Ok(out)
}

/// Parses and resolves an architecture document.
pub fn parse_spec(text: &str) -> Result<SpecDocument, FrontendError> {
    let stmts = statements(text)?;

    let outputs: BTreeSet<String> = stmts
        .iter()
        .filter_map(|(s, _)| match s {
            Stmt::Agent(a, _) if a.prefix == Some('O') => Some(a.name.clone()),
            _ => None,
        })
        .collect();
    let has_output = |n: &str| outputs.contains(n);
    let res = Agents { has_output: &has_output };

    let mut agents = BTreeSet::new();
    for (s, pos) in &stmts {
        if let Stmt::Agent(a, _) = s {
            if a.prefix.is_none() && (a.name == "I" || a.name == "O") {
                return Err(resolve_err(*pos, format!("`{}` is reserved for interface prefixes", a.name)));
            }
            if !agents.insert(res.id(a)) {
                return Err(resolve_err(*pos, format!("agent `{}` declared twice", render(a))));
            }
        }
    }
    let agent = |a: &RawAgent, pos: Pos| -> Result<AgentId, FrontendError> {
        let id = res.id(a);
        if agents.contains(&id) {
            Ok(id)
        } else {
            Err(resolve_err(pos, format!("undeclared agent `{}`", render(a))))
        }
    };

    let bases: BTreeSet<&str> = stmts
        .iter()
        .flat_map(|(s, _)| match s {
            Stmt::Types(ts) => ts.iter().collect::<Vec<_>>(),
            _ => Vec::new(),
        })
        .filter_map(|(t, _)| match t {
            RawType::Base(n) => Some(n.as_str()),
            _ => None,
        })
        .collect();
    let mut ts = TypeSystem::new();
    for (s, _) in &stmts {
        if let Stmt::Types(list) = s {
            for (t, pos) in list {
                if let RawType::Wrapped { agent: a, inner, .. } = t {
                    agent(a, *pos)?;
                    if !bases.contains(inner.as_str()) {
                        return Err(resolve_err(*pos, format!("`{inner}` is not a declared base type")));
                    }
                }
                ts.add_type(res.ty(t));
            }
        }
    }
    let declared = ts.atomic_types.clone();
    let ty = |t: &RawType, pos: Pos| -> Result<AtomicType, FrontendError> {
        let at = res.ty(t);
        if declared.contains(&at) {
            Ok(at)
        } else {
            Err(resolve_err(pos, format!("undeclared type {at}")))
        }
    };
    fn check_expr(
        e: &RawExpr,
        ty: &dyn Fn(&RawType, Pos) -> Result<AtomicType, FrontendError>,
    ) -> Result<(), FrontendError> {
        match e {
            RawExpr::Atom(t, p) => ty(t, *p).map(|_| ()),
            RawExpr::Arrow(d, c) => {
                check_expr(d, ty)?;
                check_expr(c, ty)
            }
        }
    }

    let declare = |ts: &mut TypeSystem, name: &str, sig: &RawExpr, pos: Pos| -> Result<(), FrontendError> {
        check_expr(sig, &ty)?;
        ts.add_constructor(ConstructorDecl::new(name, res.expr(sig)))
            .map(|_| ())
            .map_err(|_| resolve_err(pos, format!("constructor `{name}` declared with two signatures")))
    };
    for (s, _) in &stmts {
        match s {
            Stmt::Ctor(list) => {
                for (name, sig, pos) in list {
                    declare(&mut ts, name, sig, *pos)?;
                }
            }
            Stmt::Agent(_, held) => {
                for (name, sig, pos) in held {
                    if let Some(sig) = sig {
                        declare(&mut ts, name, sig, *pos)?;
                    }
                }
            }
            _ => {}
        }
    }

    let mut arch = Architecture::new(ts);
    arch.agents = agents.clone();
    let mut constraints = Vec::new();
    let mut options = DocOptions::default();
    for (s, pos) in &stmts {
        match s {
            Stmt::Agent(a, held) => {
                let id = res.id(a);
                for (name, _, p) in held {
                    if arch.type_system.constructor(&Name::new(name)).is_none() {
                        return Err(resolve_err(*p, format!("undeclared constructor `{name}`")));
                    }
                    arch.grant(&id, name);
                }
            }
            Stmt::Channel(from, to, types) => {
                let (f, t) = (agent(from, *pos)?, agent(to, *pos)?);
                for e in types {
                    check_expr(e, &ty)?;
                    arch.allow_type(&f, &t, res.expr(e));
                }
            }
            Stmt::Constraint(c) => constraints.push(match c {
                RawConstraint::Create(a, t, b) => {
                    Constraint::NegCreate(NegCreate::new(agent(a, *pos)?, ty(t, *pos)?, ty(b, *pos)?))
                }
                RawConstraint::Possess(a, t, h, b) => Constraint::NegPossess(
                    NegPossess::new(agent(a, *pos)?, ty(t, *pos)?, agent(h, *pos)?, ty(b, *pos)?)
                        .map_err(|e| resolve_err(*pos, e.to_string()))?,
                ),
                RawConstraint::Pos(a, t) => Constraint::Positive(Positive::new(agent(a, *pos)?, ty(t, *pos)?)),
                RawConstraint::Local(s, r, t, m) => Constraint::LocalSend(LocalSend {
                    gate_sender: agent(s, *pos)?,
                    gate_type: ty(t, *pos)?,
                    gate_receiver: agent(r, *pos)?,
                    must_prev_receiver: agent(m, *pos)?,
                }),
            }),
            Stmt::Opt(key, value) => match key.as_str() {
                "algorithm" => {
                    options.algorithm = Some(
                        Algorithm::from_number(*value)
                            .ok_or_else(|| resolve_err(*pos, format!("unknown algorithm {value}")))?,
                    )
                }
                "cap" if *value > 0 => options.cap = Some(*value as usize),
                _ => return Err(resolve_err(*pos, format!("unknown option `{key} {value}`"))),
            },
            Stmt::Types(_) | Stmt::Ctor(_) => {}
        }
    }
    Ok(SpecDocument {
        architecture: arch,
        constraints,
        options,
    })
}

fn arch_agents(arch: &Architecture) -> impl Fn(&str) -> bool + '_ {
    move |n: &str| arch.agents.contains(&AgentId::with_kind(AgentKind::OutputInterface, n))
}

fn items<T>(
    text: &str,
    mut item: impl FnMut(&mut Parser) -> Result<T, FrontendError>,
) -> Result<Vec<T>, FrontendError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while p.peek() != &Tok::Eof {
        out.push(item(&mut p)?);
        p.expect(Tok::Semi)?;
    }
    Ok(out)
}

/// Parses `Sender -> Receiver : term : Type;` lines. Only syntax is checked
/// here; [`crate::trace::check_trace_valid`] judges the events.
pub fn parse_trace(text: &str, arch: &Architecture) -> Result<Trace, FrontendError> {
    let has_output = arch_agents(arch);
    let res = Agents { has_output: &has_output };
    let events = items(text, |p| {
        let s = p.agent()?;
        p.expect(Tok::Arrow)?;
        let r = p.agent()?;
        p.expect(Tok::Colon)?;
        let term = p.term()?;
        p.expect(Tok::Colon)?;
        let t = p.atomic()?;
        Ok(Event {
            sender: res.id(&s),
            term,
            msg_type: res.ty(&t),
            receiver: res.id(&r),
        })
    })?;
    Ok(Trace::new(events))
}

/// Parses a term in prefix application form, e.g. `m[Website](INFO)(info, x)`.
pub fn parse_term(text: &str) -> Result<TermExpr, FrontendError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    if p.peek() != &Tok::Eof {
        return p.fail(&["end of input"]);
    }
    Ok(t)
}

/// Parses a type expression such as `INFO -> C[Website](INFO)`.
pub fn parse_type(text: &str) -> Result<TypeExpr, FrontendError> {
    let mut p = Parser::new(text)?;
    let e = p.type_expr()?;
    if p.peek() != &Tok::Eof {
        return p.fail(&["end of input"]);
    }
    let no_outputs = |_: &str| false;
    Ok(Agents { has_output: &no_outputs }.expr(&e))
}

/// Parses `cell Owner: a, b;` lines, or the single word `canonical`. An
/// owner not listed as anybody's member is placed in its own cell.
pub fn parse_partition(text: &str, arch: &Architecture) -> Result<Partition, FrontendError> {
    let mut probe = Parser::new(text)?;
    if probe.keyword("canonical") && matches!(probe.peek_at(1), Tok::Eof | Tok::Semi) {
        probe.bump();
        probe.eat(&Tok::Semi);
        if probe.peek() != &Tok::Eof {
            return probe.fail(&["end of input"]);
        }
        return Ok(Partition::canonical(arch));
    }
    let has_output = arch_agents(arch);
    let res = Agents { has_output: &has_output };
    let cells = items(text, |p| {
        if !p.keyword("cell") {
            return p.fail(&["`cell`", "`canonical`"]);
        }
        p.bump();
        let owner = p.agent()?;
        p.expect(Tok::Colon)?;
        let members = if matches!(p.peek(), Tok::Ident(_)) { p.list(|p| p.agent())? } else { Vec::new() };
        Ok((res.id(&owner), members.iter().map(|m| res.id(m)).collect::<Vec<_>>()))
    })?;
    let mut out = Partition::new();
    let mut placed = BTreeMap::new();
    for (owner, members) in &cells {
        for m in members {
            placed.insert(m.clone(), owner.clone());
        }
    }
    for (owner, _) in &cells {
        placed.entry(owner.clone()).or_insert_with(|| owner.clone());
    }
    for (m, o) in placed {
        out.assign(m, o);
    }
    Ok(out)
}

/// Parses `grant I:Name -> O:Name : Type;` lines.
pub fn parse_grants(text: &str) -> Result<Vec<Grant>, FrontendError> {
    items(text, |p| {
        if !p.keyword("grant") {
            return p.fail(&["`grant`"]);
        }
        p.bump();
        let pos = p.pos();
        let input = p.agent()?;
        p.expect(Tok::Arrow)?;
        let output = p.agent()?;
        p.expect(Tok::Colon)?;
        let t = p.atomic()?;
        if input.prefix != Some('I') || output.prefix != Some('O') {
            return Err(resolve_err(pos, "grants run from an `I:` agent to an `O:` agent"));
        }
        let always = |_: &str| true;
        let res = Agents { has_output: &always };
        Ok(Grant {
            input: res.id(&input),
            ty: res.ty(&t),
            output: res.id(&output),
        })
    })
}
