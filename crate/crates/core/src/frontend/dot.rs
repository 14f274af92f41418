use std::collections::BTreeSet;
use std::fmt::Write;

use crate::architecture::{AgentId, AgentKind, Architecture};
use crate::verify::Partition;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn node_attrs(a: &AgentId) -> &'static str {
    match a.kind() {
        AgentKind::Original => "shape=box",
        AgentKind::Interface => "shape=ellipse, style=dashed",
        AgentKind::InputInterface => "shape=ellipse, style=dashed, color=blue",
        AgentKind::OutputInterface => "shape=ellipse, style=bold, color=darkgreen",
    }
}

/// Renders `arch` as a DOT digraph: a node per agent, an edge per channel
/// type, and a cluster per partition cell when `partition` is given.
pub fn export_dot(arch: &Architecture, partition: Option<&Partition>) -> String {
    let mut out = String::from("digraph architecture {\n  rankdir=LR;\n");
    let mut placed = BTreeSet::new();
    if let Some(p) = partition {
        for (i, (owner, members)) in p.cells().into_iter().enumerate() {
            let members: Vec<_> = members.into_iter().filter(|m| arch.agents.contains(m)).collect();
            if members.is_empty() {
                continue;
            }
            let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label={};", quote(&owner.to_string()));
            for m in members {
                let _ = writeln!(out, "    {} [{}];", quote(&m.to_string()), node_attrs(&m));
                placed.insert(m);
            }
            out.push_str("  }\n");
        }
    }
    for a in arch.agents.iter().filter(|a| !placed.contains(*a)) {
        let _ = writeln!(out, "  {} [{}];", quote(&a.to_string()), node_attrs(a));
    }
    for ((from, to), types) in &arch.channels {
        for t in types {
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                quote(&from.to_string()),
                quote(&to.to_string()),
                quote(&t.to_string())
            );
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DotStats {
    pub nodes: usize,
    pub edges: usize,
    pub clusters: usize,
    /// Distinct nodes named inside each cluster, in order of appearance.
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum DTok {
    Id(String),
    Sym(char),
    Arrow,
}

fn dot_lex(text: &str) -> Result<Vec<DTok>, String> {
    let mut out = Vec::new();
    let mut it = text.chars().peekable();
    while let Some(&c) = it.peek() {
        if c.is_whitespace() {
            it.next();
        } else if c == '"' {
            it.next();
            let mut s = String::new();
            loop {
                match it.next() {
                    Some('\\') => s.push(it.next().ok_or("unterminated string")?),
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                    None => return Err("unterminated string".into()),
                }
            }
            out.push(DTok::Id(s));
        } else if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
            let mut s = String::new();
            while let Some(&ch) = it.peek() {
                if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
                    s.push(ch);
                    it.next();
                } else {
                    break;
                }
            }
            out.push(DTok::Id(s));
        } else if c == '-' {
            it.next();
            if it.next() != Some('>') {
                return Err("expected `->`".into());
            }
            out.push(DTok::Arrow);
        } else if "{}[];,=".contains(c) {
            it.next();
            out.push(DTok::Sym(c));
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct DotCheck {
    toks: Vec<DTok>,
    i: usize,
    nodes: BTreeSet<String>,
    open: Vec<BTreeSet<String>>,
    stats: DotStats,
}

impl DotCheck {
    fn peek(&self) -> Option<&DTok> {
        self.toks.get(self.i)
    }

    fn note(&mut self, node: &str) {
        self.nodes.insert(node.to_string());
        if let Some(top) = self.open.last_mut() {
            top.insert(node.to_string());
        }
    }

    fn sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&DTok::Sym(c)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.peek().cloned() {
            Some(DTok::Id(s)) => {
                self.i += 1;
                Ok(s)
            }
            other => Err(format!("expected identifier, found {other:?}")),
        }
    }

    fn attrs(&mut self) -> Result<(), String> {
        while self.sym('[') {
            while !self.sym(']') {
                self.id()?;
                if !self.sym('=') {
                    return Err("expected `=` in attribute list".into());
                }
                self.id()?;
                if !self.sym(',') {
                    self.sym(';');
                }
            }
        }
        Ok(())
    }

    fn block(&mut self) -> Result<(), String> {
        if !self.sym('{') {
            return Err("expected `{`".into());
        }
        loop {
            if self.sym('}') {
                return Ok(());
            }
            if self.sym(';') {
                continue;
            }
            match self.peek() {
                Some(DTok::Id(s)) if s == "subgraph" => {
                    self.i += 1;
                    let mut cluster = false;
                    if let Some(DTok::Id(name)) = self.peek().cloned() {
                        self.i += 1;
                        cluster = name.starts_with("cluster");
                    }
                    if cluster {
                        self.open.push(BTreeSet::new());
                        self.block()?;
                        let seen = self.open.pop().unwrap_or_default();
                        self.stats.clusters += 1;
                        self.stats.cluster_sizes.push(seen.len());
                    } else {
                        self.block()?;
                    }
                }
                Some(DTok::Sym('{')) => self.block()?,
                Some(DTok::Id(s)) if matches!(s.as_str(), "graph" | "node" | "edge") => {
                    self.i += 1;
                    self.attrs()?;
                }
                Some(DTok::Id(_)) => {
                    let first = self.id()?;
                    if self.sym('=') {
                        self.id()?;
                        continue;
                    }
                    self.note(&first);
                    while self.peek() == Some(&DTok::Arrow) {
                        self.i += 1;
                        let next = self.id()?;
                        self.note(&next);
                        self.stats.edges += 1;
                    }
                    self.attrs()?;
                }
                None => return Err("unexpected end of input".into()),
                Some(t) => return Err(format!("unexpected {t:?}")),
            }
        }
    }
}

/// A small well-formedness check for the DOT subset emitted by
/// [`export_dot`]: one `digraph` with node, edge, attribute and subgraph
/// statements. Returns the counts it saw.
pub fn check_dot(text: &str) -> Result<DotStats, String> {
    let mut c = DotCheck {
        toks: dot_lex(text)?,
        i: 0,
        nodes: BTreeSet::new(),
        open: Vec::new(),
        stats: DotStats::default(),
    };
    if c.id().ok().as_deref() != Some("digraph") {
        return Err("expected `digraph`".into());
    }
    if matches!(c.peek(), Some(DTok::Id(_))) {
        c.i += 1;
    }
    c.block()?;
    if c.i != c.toks.len() {
        return Err("trailing input after graph".into());
    }
    c.stats.nodes = c.nodes.len();
    Ok(c.stats)
}
