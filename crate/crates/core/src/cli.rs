//! The `privarch` command line. Exit codes: 0 on success, 1 when a check
//! finds violations or counterexamples, 2 on usage, input or parse errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::architecture::AgentKind;
use crate::constraints::{check_compliance, check_positive, Constraint};
use crate::explorer::{explore, ExploreConfig, DEFAULT_BUDGET, DEFAULT_DEPTH};
use crate::frontend::{
    check_dot, export_dot, parse_grants, parse_partition, parse_spec, parse_trace, print_spec, print_trace,
    SpecDocument,
};
use crate::synthesis::{build_safe_architecture, relax_interface_forwarding, Algorithm, SynthesisConfig};
use crate::trace::{check_trace_valid, possession_closure, Trace, Validity};
use crate::verify::{verify_theorem1, verify_theorem3_gated, Partition};

pub const BUDGET_VAR: &str = "PRIVARCH_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "privarch", version, about = "Check, synthesize and explore privacy-safe architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a trace file for validity and constraint compliance.
    Check {
        spec: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build the certified-interface extension of an architecture.
    Synthesize {
        spec: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=2))]
        algorithm: Option<u64>,
        /// Grants file allowing input interfaces to forward to output interfaces.
        #[arg(long, visible_alias = "relax-52", value_name = "GRANTS")]
        relax: Option<PathBuf>,
        /// Largest certification family to materialize.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check the partition conditions; PARTITION is a file or `canonical`.
    Verify {
        spec: PathBuf,
        #[arg(long)]
        partition: String,
        #[arg(long)]
        json: bool,
    },
    /// Search bounded traces for counterexamples and witnesses.
    Explore {
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// State budget; overrides PRIVARCH_BUDGET.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Export the architecture as a DOT digraph.
    Dot {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        partition: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

/// A failure that maps to exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<SpecDocument, Fatal> {
    parse_spec(&read(path)?).map_err(|e| Fatal(format!("{}:{e}", path.display())))
}

fn load_partition(arg: &str, doc: &SpecDocument) -> Result<Partition, Fatal> {
    if arg == "canonical" {
        return Ok(Partition::canonical(&doc.architecture));
    }
    let path = Path::new(arg);
    parse_partition(&read(path)?, &doc.architecture).map_err(|e| Fatal(format!("{}:{e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> Result<(), Fatal> {
    fs::write(path, text).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn events_json(tr: &Trace) -> Value {
    Value::Array(
        tr.events
            .iter()
            .map(|e| {
                json!({
                    "sender": e.sender.to_string(),
                    "receiver": e.receiver.to_string(),
                    "term": e.term.to_string(),
                    "type": e.msg_type.to_string(),
                })
            })
            .collect(),
    )
}

/// Resolves the state budget: flag, then environment, then default.
pub fn resolve_budget(flag: Option<usize>, env: Option<&str>) -> Result<usize, String> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match env {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| format!("{BUDGET_VAR} must be a non-negative integer, got `{s}`")),
        None => Ok(DEFAULT_BUDGET),
    }
}

struct Output<'a> {
    out: &'a mut dyn Write,
    json: bool,
}

impl Output<'_> {
    fn emit(&mut self, text: &str, value: Value) {
        if self.json {
            let _ = writeln!(self.out, "{}", serde_json::to_string_pretty(&value).unwrap_or_default());
        } else {
            let _ = write!(self.out, "{text}");
        }
    }
}

fn check(spec: &Path, trace: &Path, o: &mut Output) -> Result<i32, Fatal> {
    let doc = load_spec(spec)?;
    let arch = &doc.architecture;
    let tr = parse_trace(&read(trace)?, arch).map_err(|e| Fatal(format!("{}:{e}", trace.display())))?;
    if let Validity::Invalid { index, reason } = check_trace_valid(arch, &tr) {
        o.emit(
            &format!("INVALID: event {index}: {reason}\n"),
            json!({
                "command": "check",
                "valid": false,
                "invalid": {"index": index, "reason": reason.to_string()},
                "compliant": null,
                "violations": [],
                "positives": [],
            }),
        );
        return Ok(1);
    }
    let states = possession_closure(arch, &tr)?;
    let verdict = check_compliance(&states, &tr, &doc.constraints);
    let positives: Vec<_> = doc
        .positives()
        .into_iter()
        .map(|p| (Constraint::Positive(p.clone()).to_string(), check_positive(&states, &p)))
        .collect();
    let mut text = format!("valid trace of {} event(s)\n", tr.len());
    if verdict.compliant {
        text.push_str("COMPLIANT\n");
    } else {
        text.push_str(&format!("NOT COMPLIANT ({} violation(s))\n", verdict.violations.len()));
        for v in &verdict.violations {
            text.push_str(&format!("  {} after {} event(s): {}\n", v.constraint, v.prefix_length, v.detail));
        }
    }
    for (c, ok) in &positives {
        text.push_str(&format!("  {c}: {}\n", if *ok { "reached" } else { "not reached" }));
    }
    o.emit(
        &text,
        json!({
            "command": "check",
            "valid": true,
            "invalid": null,
            "compliant": verdict.compliant,
            "violations": verdict.violations,
            "positives": positives
                .iter()
                .map(|(c, ok)| json!({"constraint": c, "satisfied": ok}))
                .collect::<Vec<_>>(),
        }),
    );
    Ok(if verdict.compliant { 0 } else { 1 })
}

fn synthesize(
    spec: &Path,
    algorithm: Option<u64>,
    relax: Option<&Path>,
    cap: Option<usize>,
    output: Option<&Path>,
    o: &mut Output,
) -> Result<i32, Fatal> {
    let doc = load_spec(spec)?;
    let mut cfg = doc.options.apply(SynthesisConfig::default());
    if let Some(a) = algorithm.and_then(Algorithm::from_number) {
        cfg.algorithm = a;
    }
    if let Some(c) = cap {
        cfg.m_family_cap = c;
    }
    let cs: Vec<Constraint> = doc.constraints.iter().filter(|c| !matches!(c, Constraint::LocalSend(_))).cloned().collect();
    let mut sa = build_safe_architecture(&doc.architecture, &cs, &cfg)?;
    let mut locals = Vec::new();
    if let Some(path) = relax {
        let grants = parse_grants(&read(path)?).map_err(|e| Fatal(format!("{}:{e}", path.display())))?;
        (sa, locals) = relax_interface_forwarding(&sa, &grants)?;
    }
    let mut out_doc = SpecDocument::new(sa.arch.clone());
    out_doc.constraints = cs;
    out_doc.constraints.extend(locals.iter().cloned().map(Constraint::LocalSend));
    out_doc.options.algorithm = Some(sa.algorithm);
    let text = print_spec(&out_doc);
    if let Some(path) = output {
        write_out(path, &text)?;
    }
    let arch = &sa.arch;
    let edges: usize = arch.channels.values().map(|t| t.len()).sum();
    let mut summary = format!(
        "algorithm {}: {} agents, {} types, {} constructors, {} channel types, {} local constraint(s)\n",
        sa.algorithm.number(),
        arch.agents.len(),
        arch.type_system.atomic_types.len(),
        arch.type_system.constructors.len(),
        edges,
        locals.len()
    );
    for w in &sa.warnings {
        summary.push_str(&format!("warning: {w}\n"));
    }
    let human = match output {
        Some(path) => format!("{summary}wrote {}\n", path.display()),
        None => text.clone(),
    };
    o.emit(
        &human,
        json!({
            "command": "synthesize",
            "algorithm": sa.algorithm.number(),
            "agents": arch.agents.len(),
            "types": arch.type_system.atomic_types.len(),
            "constructors": arch.type_system.constructors.len(),
            "channel_types": edges,
            "local_constraints": locals.iter().map(|l| Constraint::LocalSend(l.clone()).to_string()).collect::<Vec<_>>(),
            "warnings": sa.warnings,
            "provenance": sa.provenance,
            "output": output.map(|p| p.display().to_string()),
            "document": if output.is_none() { Value::String(text) } else { Value::Null },
        }),
    );
    Ok(0)
}

/// Which family of partition conditions applies to a document.
fn uses_proof_conditions(doc: &SpecDocument) -> bool {
    match doc.options.algorithm {
        Some(a) => a == Algorithm::Two,
        None if !doc.neg_possess().is_empty() => true,
        None if !doc.neg_create().is_empty() => false,
        None => doc
            .architecture
            .agents
            .iter()
            .any(|a| matches!(a.kind(), AgentKind::InputInterface | AgentKind::OutputInterface)),
    }
}

fn verify(spec: &Path, partition: &str, o: &mut Output) -> Result<i32, Fatal> {
    let doc = load_spec(spec)?;
    let p = load_partition(partition, &doc)?;
    let proof = uses_proof_conditions(&doc);
    let report = if proof {
        verify_theorem3_gated(&doc.architecture, &p, &doc.neg_possess(), &doc.locals())
    } else {
        verify_theorem1(&doc.architecture, &p, &doc.neg_create())
    };
    let mode = if proof { "split-interface" } else { "single-interface" };
    let mut text = format!("{mode} conditions: {report}");
    if !text.ends_with('\n') {
        text.push('\n');
    }
    o.emit(
        &text,
        json!({"command": "verify", "conditions": mode, "report": report}),
    );
    Ok(if report.passed { 0 } else { 1 })
}

fn explore_cmd(spec: &Path, depth: usize, budget: Option<usize>, o: &mut Output) -> Result<i32, Fatal> {
    let doc = load_spec(spec)?;
    let env = std::env::var(BUDGET_VAR).ok();
    let budget = resolve_budget(budget, env.as_deref()).map_err(Fatal)?;
    let out = explore(&doc.architecture, &doc.constraints, &[], ExploreConfig { depth, budget })?;
    let mut text = String::new();
    for (c, tr) in &out.counterexamples {
        text.push_str(&format!("COUNTEREXAMPLE to `{c}` ({} event(s)):\n", tr.len()));
        for line in print_trace(tr).lines() {
            text.push_str(&format!("  {line}\n"));
        }
    }
    for (p, tr) in &out.witnesses {
        text.push_str(&format!(
            "WITNESS for `{}` ({} event(s)):\n",
            Constraint::Positive(p.clone()),
            tr.len()
        ));
        for line in print_trace(tr).lines() {
            text.push_str(&format!("  {line}\n"));
        }
    }
    for c in &out.unsettled {
        text.push_str(&format!("UNSETTLED `{c}` within depth {depth}\n"));
    }
    text.push_str(&format!(
        "{} state(s) visited; {}\n",
        out.states_visited,
        if out.exhausted { "exhaustive" } else { "bounded result" }
    ));
    o.emit(
        &text,
        json!({
            "command": "explore",
            "depth": depth,
            "budget": budget,
            "counterexamples": out.counterexamples.iter().map(|(c, tr)| json!({"constraint": c.to_string(), "events": events_json(tr)})).collect::<Vec<_>>(),
            "witnesses": out.witnesses.iter().map(|(p, tr)| json!({"constraint": Constraint::Positive(p.clone()).to_string(), "events": events_json(tr)})).collect::<Vec<_>>(),
            "unsettled": out.unsettled.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "exhausted": out.exhausted,
            "states_visited": out.states_visited,
        }),
    );
    Ok(if out.counterexamples.is_empty() { 0 } else { 1 })
}

fn dot(spec: &Path, output: Option<&Path>, partition: Option<&str>, o: &mut Output) -> Result<i32, Fatal> {
    let doc = load_spec(spec)?;
    let p = partition.map(|arg| load_partition(arg, &doc)).transpose()?;
    let text = export_dot(&doc.architecture, p.as_ref());
    let stats = check_dot(&text).map_err(Fatal)?;
    if let Some(path) = output {
        write_out(path, &text)?;
    }
    let human = match output {
        Some(path) => format!(
            "wrote {} ({} nodes, {} edges, {} clusters)\n",
            path.display(),
            stats.nodes,
            stats.edges,
            stats.clusters
        ),
        None => text.clone(),
    };
    o.emit(
        &human,
        json!({
            "command": "dot",
            "nodes": stats.nodes,
            "edges": stats.edges,
            "clusters": stats.clusters,
            "output": output.map(|p| p.display().to_string()),
            "dot": if output.is_none() { Value::String(text) } else { Value::Null },
        }),
    );
    Ok(0)
}

/// Runs the command line with explicit output streams and returns the exit
/// code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Check { spec, trace, json } => check(spec, trace, &mut Output { out, json: *json }),
        Command::Synthesize {
            spec,
            algorithm,
            relax,
            cap,
            output,
            json,
        } => synthesize(
            spec,
            *algorithm,
            relax.as_deref(),
            *cap,
            output.as_deref(),
            &mut Output { out, json: *json },
        ),
        Command::Verify { spec, partition, json } => verify(spec, partition, &mut Output { out, json: *json }),
        Command::Explore {
            spec,
            depth,
            budget,
            json,
        } => explore_cmd(spec, *depth, *budget, &mut Output { out, json: *json }),
        Command::Dot {
            spec,
            output,
            partition,
            json,
        } => dot(spec, output.as_deref(), partition.as_deref(), &mut Output { out, json: *json }),
    };
    match result {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
