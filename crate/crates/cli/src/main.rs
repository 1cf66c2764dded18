//! `memfair`: litmus checking, termination, simulation and robustness for
//! SC, TSO, RA and StrongCOH.

use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use memfair_core::consistency::{is_consistent, ModelId, Verdict};
use memfair_core::corpus;
use memfair_core::correspondence::trace_to_graph;
use memfair_core::enumerate::{check_outcome, enumerate_consistent_graphs, Completion, ExplorationBounds};
use memfair_core::graph::{graph_to_dot, graph_to_json, ExecutionGraph};
use memfair_core::ir::{parse_program, Assertion, ConcurrentProgram};
use memfair_core::operational::{fair_run, FairSchedulerConfig};
use memfair_core::robustness::{check_finite_robustness, RobustnessVerdict};
use memfair_core::termination::{analyze_termination, check_lock_progress, TerminationVerdict, DEFAULT_TERMINATION_EVENTS};

const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "memfair", version, about = "Weak memory checker for SC, TSO, RA and StrongCOH")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Program file, or the name of a bundled program (e.g. `sb`).
    file: String,
    #[arg(long, short, default_value = "sc")]
    model: ModelId,
    /// Print machine-readable JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Is a final-register outcome allowed? Exit 10 if allowed, 11 if forbidden.
    Check {
        #[command(flatten)]
        common: Common,
        /// e.g. `a=0 && b=0`; without it, all final outcomes are listed.
        #[arg(long = "assert")]
        assertion: Option<String>,
        #[arg(long, default_value_t = 16)]
        max_events: usize,
    },
    /// Do all spinloops terminate under fair scheduling?
    /// Exit 10 if so, 11 if some run may diverge, 12 if unsupported.
    Terminate {
        #[command(flatten)]
        common: Common,
        /// Unroll the program's outer loops this many times first.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TERMINATION_EVENTS)]
        max_events: usize,
    },
    /// Run the operational machine under a randomized fair scheduler.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long)]
        delay_bound: Option<usize>,
        /// Also print the execution graph of the trace.
        #[arg(long)]
        emit_graph: bool,
    },
    /// Is every bounded execution SC? Exit 10 if robust, 11 if not.
    Robust {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        max_events: usize,
    },
    /// List every consistent graph within the bounds.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        max_events: usize,
        /// Stop threads at the event bound instead of failing.
        #[arg(long)]
        truncate: bool,
        /// Print graphs in DOT instead of a summary.
        #[arg(long)]
        dot: bool,
    },
}

/// Why the command could not answer.
struct Failure {
    code: &'static str,
    msg: String,
}

impl From<memfair_core::Error> for Failure {
    fn from(e: memfair_core::Error) -> Self {
        Failure { code: e.code(), msg: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

/// `println!` that exits quietly once the reader has gone away.
macro_rules! out {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

fn emit(args: std::fmt::Arguments) {
    use std::io::Write;
    if let Err(e) = writeln!(std::io::stdout().lock(), "{args}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing to stdout: {e}");
    }
}

fn load(file: &str) -> Result<ConcurrentProgram, Failure> {
    let src = if Path::new(file).exists() {
        std::fs::read_to_string(file).map_err(|e| Failure { code: "E_IO", msg: format!("{file}: {e}") })?
    } else if let Some(src) = corpus::source(file.trim_end_matches(".lit")) {
        src.to_string()
    } else {
        return Err(Failure { code: "E_IO", msg: format!("{file}: no such file or bundled program") });
    };
    Ok(parse_program(&src)?)
}

fn print_json(v: &serde_json::Value) {
    out!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn cycle_text(v: &Verdict, names: &[String]) -> Option<String> {
    match v {
        Verdict::Consistent => None,
        Verdict::Inconsistent { axiom, cycle } => Some(format!(
            "{} cycle: {}",
            axiom.name(),
            cycle.iter().map(|e| e.display(names).to_string()).collect::<Vec<_>>().join(" -> ")
        )),
    }
}

fn registers_text(p: &ConcurrentProgram, regs: &[Vec<i64>]) -> String {
    let mut parts = Vec::new();
    for (t, vals) in p.threads.iter().zip(regs) {
        for (name, v) in t.registers.iter().zip(vals) {
            parts.push(format!("{}:{name}={v}", t.tid));
        }
    }
    parts.join(" ")
}

fn registers_json(p: &ConcurrentProgram, regs: &[Vec<i64>]) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (t, vals) in p.threads.iter().zip(regs) {
        for (name, v) in t.registers.iter().zip(vals) {
            m.insert(format!("{}:{name}", t.tid), json!(v));
        }
    }
    serde_json::Value::Object(m)
}

fn cmd_check(c: &Common, assertion: Option<&str>, max_events: usize) -> Outcome {
    let p = load(&c.file)?;
    let b = ExplorationBounds::with_max_events(max_events);
    let Some(src) = assertion else {
        let res = enumerate_consistent_graphs(&p, c.model, &b)?;
        let mut outcomes: Vec<Vec<Vec<i64>>> = res.complete().map(|g| g.final_registers.clone()).collect();
        outcomes.sort();
        outcomes.dedup();
        if c.json {
            let list: Vec<_> = outcomes.iter().map(|r| registers_json(&p, r)).collect();
            print_json(&json!({ "model": c.model, "outcomes": list }));
        } else {
            for r in &outcomes {
                out!("{}", registers_text(&p, r));
            }
        }
        return Ok(0);
    };
    let a = Assertion::parse(src, &p)?;
    let v = check_outcome(&p, c.model, &a, &b)?;
    let verdict = if v.allowed { "allowed" } else { "forbidden" };
    if c.json {
        print_json(&json!({
            "model": c.model,
            "assertion": src,
            "verdict": verdict,
            "completeGraphs": v.complete_graphs,
            "witness": v.witness.as_ref().map(|g| graph_to_json(&g.graph, &p.locations)),
        }));
    } else {
        out!("{verdict} under {} ({} complete graphs)", c.model, v.complete_graphs);
        if let Some(w) = &v.witness {
            out!("{}", graph_to_dot(&w.graph, &p.locations).trim_end());
        }
    }
    Ok(if v.allowed { 10 } else { 11 })
}

fn cmd_terminate(c: &Common, rounds: Option<usize>, max_events: usize) -> Outcome {
    let p = load(&c.file)?;
    let v = match rounds {
        Some(r) => check_lock_progress(&p, c.model, r)?,
        None => analyze_termination(&p, c.model, &ExplorationBounds::with_max_events(max_events))?,
    };
    if c.json {
        let mut j = v.to_json(&p.locations);
        if let TerminationVerdict::MayDiverge { witness, .. } = &v {
            j["witnessDot"] = json!(graph_to_dot(witness, &p.locations));
        }
        j["model"] = json!(c.model);
        print_json(&j);
    } else {
        match &v {
            TerminationVerdict::AllSpinloopsTerminate { graphs_checked } => {
                out!("all spinloops terminate under {} ({graphs_checked} graphs checked)", c.model)
            }
            TerminationVerdict::MayDiverge { witness, stuck_threads, extended_model, .. } => {
                let ts: Vec<String> = stuck_threads.iter().map(|t| t.to_string()).collect();
                out!("may diverge under {}: thread(s) {} can spin forever", c.model, ts.join(", "));
                if *extended_model {
                    out!("note: the witness is a finite graph; extension to an infinite fair run is not established for this model");
                }
                out!("{}", graph_to_dot(witness, &p.locations).trim_end());
            }
            TerminationVerdict::Unsupported { reason } => out!("unsupported: {reason}"),
        }
    }
    Ok(match v {
        TerminationVerdict::AllSpinloopsTerminate { .. } => 10,
        TerminationVerdict::MayDiverge { .. } => 11,
        TerminationVerdict::Unsupported { .. } => 12,
    })
}

fn graph_of_run(trace: &memfair_core::operational::AnnotatedTrace, m: ModelId) -> Result<ExecutionGraph, Failure> {
    let g = trace_to_graph(trace)?;
    if let Some(why) = cycle_text(&is_consistent(&g, m), &[]) {
        return Err(Failure { code: "E_INCONSISTENT_INPUT", msg: format!("graph of the run is not {m}-consistent: {why}") });
    }
    Ok(g)
}

fn cmd_simulate(c: &Common, seed: u64, max_steps: usize, delay_bound: Option<usize>, emit_graph: bool) -> Outcome {
    let p = load(&c.file)?;
    let cfg = FairSchedulerConfig { seed, max_steps, delay_bound, ..Default::default() };
    let run = fair_run(&p, c.model, &cfg)?;
    let graph = if emit_graph { Some(graph_of_run(&run.trace, c.model)?) } else { None };
    if c.json {
        let mut j = json!({
            "model": c.model,
            "seed": seed,
            "terminated": run.terminated,
            "trace": run.trace.to_json(&p.locations),
        });
        if let Some(g) = &graph {
            j["graph"] = json!(graph_to_json(g, &p.locations));
        }
        print_json(&j);
    } else {
        let state = if run.terminated { "terminated" } else { "stopped" };
        out!("{state} after {} steps under {} (seed {seed})", run.trace.len(), c.model);
        for (i, _, label) in run.trace.events() {
            let tid = run.trace.steps[i].label.tid();
            out!("{i:>5}  T{tid}  {}", label.display(&p.locations));
        }
        if let Some(g) = &graph {
            out!("{}", graph_to_dot(g, &p.locations).trim_end());
        }
    }
    Ok(0)
}

fn cmd_robust(c: &Common, max_events: usize) -> Outcome {
    let p = load(&c.file)?;
    let v = check_finite_robustness(&p, c.model, &ExplorationBounds::with_max_events(max_events))?;
    if c.json {
        let mut j = v.to_json(&p.locations);
        j["model"] = json!(c.model);
        print_json(&j);
    } else {
        match &v {
            RobustnessVerdict::Robust { graphs_checked } => {
                out!("robust under {} ({graphs_checked} graphs checked)", c.model)
            }
            RobustnessVerdict::NonRobust { witness, sc_violation } => {
                out!("not robust under {}", c.model);
                if let Some(why) = cycle_text(sc_violation, &p.locations) {
                    out!("{why}");
                }
                out!("{}", graph_to_dot(witness, &p.locations).trim_end());
            }
        }
    }
    Ok(if v.is_robust() { 10 } else { 11 })
}

fn cmd_enumerate(c: &Common, max_events: usize, truncate: bool, dot: bool) -> Outcome {
    let p = load(&c.file)?;
    let b = ExplorationBounds { truncate, ..ExplorationBounds::with_max_events(max_events) };
    let res = enumerate_consistent_graphs(&p, c.model, &b)?;
    let completion = |k: Completion| match k {
        Completion::Complete => "complete",
        Completion::Stuck => "stuck",
        Completion::Truncated => "truncated",
    };
    if c.json {
        let graphs: Vec<_> = res
            .graphs
            .iter()
            .map(|g| {
                json!({
                    "completion": completion(g.completion),
                    "registers": registers_json(&p, &g.final_registers),
                    "graph": graph_to_json(&g.graph, &p.locations),
                })
            })
            .collect();
        print_json(&json!({ "model": c.model, "explored": res.explored, "graphs": graphs }));
    } else if dot {
        for g in &res.graphs {
            out!("{}", graph_to_dot(&g.graph, &p.locations).trim_end());
        }
    } else {
        out!("{} graphs under {} ({} states explored)", res.graphs.len(), c.model, res.explored);
        for g in &res.graphs {
            out!("{:<9}  {}", completion(g.completion), registers_text(&p, &g.final_registers));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("MEMFAIR_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    let (json, out) = match &cli.cmd {
        Command::Check { common, assertion, max_events } => (common.json, cmd_check(common, assertion.as_deref(), *max_events)),
        Command::Terminate { common, rounds, max_events } => (common.json, cmd_terminate(common, *rounds, *max_events)),
        Command::Simulate { common, seed, max_steps, delay_bound, emit_graph } => {
            (common.json, cmd_simulate(common, *seed, *max_steps, *delay_bound, *emit_graph))
        }
        Command::Robust { common, max_events } => (common.json, cmd_robust(common, *max_events)),
        Command::Enumerate { common, max_events, truncate, dot } => (common.json, cmd_enumerate(common, *max_events, *truncate, *dot)),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if json {
                print_json(&json!({ "error": f.code, "message": f.msg }));
            }
            eprintln!("error [{}]: {}", f.code, f.msg);
            ExitCode::from(EXIT_ERROR)
        }
    }
}
