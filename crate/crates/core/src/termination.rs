//! Spinloop termination under fair scheduling.
//!
//! A program whose only loops are spinloops diverges under a fair
//! scheduler iff some consistent graph leaves a thread at the end of a
//! spinloop iteration in which every read reads a mo-maximal write: such an
//! iteration can be repeated forever. Graphs with one iteration per loop
//! visit suffice to find one.

use serde_json::json;

use crate::consistency::ModelId;
use crate::enumerate::{enumerate_consistent_graphs, Completion, ExplorationBounds};
use crate::error::{Error, Result};
use crate::graph::{graph_to_json, EventId, ExecutionGraph, ThreadId, Value};
use crate::ir::{detect_spinloops, unroll_loops, ConcurrentProgram, SpinloopInfo};

/// The last spinloop iteration of one non-terminated thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessCheck {
    pub tid: ThreadId,
    pub head_pc: usize,
    /// Sequence numbers of the first and last event of the iteration.
    pub first_sn: u32,
    pub last_sn: u32,
    /// No event of the iteration has an fr-successor.
    pub fr_free: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessReport {
    pub is_witness: bool,
    pub nonterminated: Vec<ThreadId>,
    pub checks: Vec<WitnessCheck>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationVerdict {
    AllSpinloopsTerminate {
        graphs_checked: usize,
    },
    MayDiverge {
        witness: ExecutionGraph,
        stuck_threads: Vec<ThreadId>,
        checks: Vec<WitnessCheck>,
        /// The model is outside those for which a witness is known to
        /// extend to an infinite fair execution.
        extended_model: bool,
    },
    Unsupported {
        reason: String,
    },
}

impl TerminationVerdict {
    pub fn outcome(&self) -> &'static str {
        match self {
            TerminationVerdict::AllSpinloopsTerminate { .. } => "AllSpinloopsTerminate",
            TerminationVerdict::MayDiverge { .. } => "MayDiverge",
            TerminationVerdict::Unsupported { .. } => "Unsupported",
        }
    }

    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        match self {
            TerminationVerdict::AllSpinloopsTerminate { graphs_checked } => {
                json!({ "outcome": self.outcome(), "graphsChecked": graphs_checked })
            }
            TerminationVerdict::MayDiverge { witness, stuck_threads, checks, extended_model } => json!({
                "outcome": self.outcome(),
                "witness": graph_to_json(witness, names),
                "stuckThreads": stuck_threads.iter().map(|t| t.0).collect::<Vec<_>>(),
                "iterations": checks.iter().map(|c| json!({
                    "tid": c.tid.0, "headPc": c.head_pc, "first": c.first_sn, "last": c.last_sn, "frFree": c.fr_free,
                })).collect::<Vec<_>>(),
                "extendedModel": extended_model,
            }),
            TerminationVerdict::Unsupported { reason } => json!({ "outcome": self.outcome(), "reason": reason }),
        }
    }
}

struct Visit {
    pc: usize,
    live: Vec<Value>,
    events: usize,
}

/// Replay `tid` against its events in `g` and locate the iteration it
/// ends in. `Ok(None)` means the thread terminated.
fn last_iteration(
    g: &ExecutionGraph,
    p: &ConcurrentProgram,
    info: &SpinloopInfo,
    tid: ThreadId,
) -> Result<Option<WitnessCheck>> {
    let t = p.thread(tid);
    let loops = info.thread(tid);
    let events = g.thread(tid);
    let mut visits: Vec<Visit> = Vec::new();
    let mut done = 0;
    let record = |pc: usize, regs: &[Value], done: usize, visits: &mut Vec<Visit>| {
        if loops.is_spin_head(pc) {
            visits.push(Visit { pc, live: loops.live_projection(pc, regs), events: done });
        }
    };
    let mut state = t.initial_state_traced(&mut |pc, regs| record(pc, regs, 0, &mut visits))?;
    for ev in events {
        done += 1;
        state = t.step_traced(&state, &ev.label, &mut |pc, regs| record(pc, regs, done, &mut visits))?;
    }
    if t.is_terminated(&state) {
        return Ok(None);
    }
    let n = events.len();
    let not_spinning = || Error::UnsupportedLoop(format!("thread {tid} does not end in a spinloop iteration"));
    let closing = visits.iter().filter(|v| v.events == n);
    for v in closing {
        let Some(prev) = visits.iter().rev().find(|u| u.pc == v.pc && u.events < n) else { continue };
        if prev.live != v.live || events[prev.events..].iter().any(|e| e.label.is_write()) {
            continue;
        }
        let fr_free = (prev.events..n).all(|sn| {
            let id = EventId::Thread { tid, sn: sn as u32 };
            let w = g.rf_of(id).expect("reads have an rf source");
            g.mo_maximal(g.label(id).loc()) == w
        });
        return Ok(Some(WitnessCheck {
            tid,
            head_pc: v.pc,
            first_sn: prev.events as u32,
            last_sn: (n - 1) as u32,
            fr_free,
        }));
    }
    Err(not_spinning())
}

/// Whether `g` shows a thread that can spin forever: some thread has not
/// terminated, and every such thread has just completed a spinloop
/// iteration whose reads all read mo-maximal writes.
pub fn is_nontermination_witness(g: &ExecutionGraph, p: &ConcurrentProgram) -> Result<WitnessReport> {
    check_with(g, p, &detect_spinloops(p))
}

fn check_with(g: &ExecutionGraph, p: &ConcurrentProgram, info: &SpinloopInfo) -> Result<WitnessReport> {
    let mut nonterminated = Vec::new();
    let mut checks = Vec::new();
    for tid in p.thread_ids() {
        if let Some(c) = last_iteration(g, p, info, tid)? {
            nonterminated.push(tid);
            checks.push(c);
        }
    }
    let is_witness = !nonterminated.is_empty() && checks.iter().all(|c| c.fr_free);
    Ok(WitnessReport { is_witness, nonterminated, checks })
}

/// Default per-thread event bound for termination queries.
pub const DEFAULT_TERMINATION_EVENTS: usize = 64;

/// Decide whether every spinloop of `p` terminates under `m` in all fair
/// executions. Only programs whose loops are all spinloops are supported.
/// A divergence is reported with a witness of the fewest events.
pub fn analyze_termination(p: &ConcurrentProgram, m: ModelId, b: &ExplorationBounds) -> Result<TerminationVerdict> {
    let info = detect_spinloops(p);
    if info.irreducible() {
        return Ok(TerminationVerdict::Unsupported { reason: "irreducible control flow".into() });
    }
    if let Some(tid) = p.thread_ids().find(|&t| !info.thread(t).acyclic_outside_spinloops) {
        return Ok(TerminationVerdict::Unsupported {
            reason: format!("thread {tid} has a loop that writes to memory"),
        });
    }
    let bounds = ExplorationBounds { spinloop_iteration_cap: Some(1), truncate: false, ..b.clone() };
    let res = enumerate_consistent_graphs(p, m, &bounds)?;
    if let Some(g) = res.graphs.iter().find(|g| g.completion == Completion::Truncated) {
        let tid = g.thread_status.iter().position(|s| *s == crate::enumerate::ThreadStatus::Truncated).unwrap_or(0);
        return Err(Error::BoundExceeded { tid: tid as u32 + 1, limit: bounds.max_events_per_thread });
    }
    // Report the smallest witness, preferring low thread ids among equals;
    // graphs are already in canonical order.
    let mut best: Option<(&ExecutionGraph, WitnessReport)> = None;
    for g in res.graphs.iter().filter(|g| g.completion == Completion::Stuck) {
        let report = check_with(&g.graph, p, &info)?;
        if !report.is_witness {
            continue;
        }
        let key = |g: &ExecutionGraph, r: &WitnessReport| (g.non_init_count(), r.nonterminated.clone());
        if best.as_ref().is_none_or(|(b, r)| key(&g.graph, &report) < key(b, r)) {
            best = Some((&g.graph, report));
        }
    }
    Ok(match best {
        Some((g, report)) => TerminationVerdict::MayDiverge {
            witness: g.clone(),
            stuck_threads: report.nonterminated,
            checks: report.checks,
            extended_model: m == ModelId::StrongCoh,
        },
        None => TerminationVerdict::AllSpinloopsTerminate { graphs_checked: res.graphs.len() },
    })
}

/// Termination of a lock client whose outer loop runs `rounds` times.
pub fn check_lock_progress(p: &ConcurrentProgram, m: ModelId, rounds: usize) -> Result<TerminationVerdict> {
    let unrolled = unroll_loops(p, rounds)?;
    analyze_termination(&unrolled, m, &ExplorationBounds::with_max_events(DEFAULT_TERMINATION_EVENTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EventLabel, Loc};
    use crate::ir::parse_program;

    const RLOOP: &str = "locations x; thread 1 { store(x,1); } thread 2 { L: a = load(x); if (a == 0) goto L; }";

    fn rloop_graph(reads_init_last: bool) -> ExecutionGraph {
        let x = Loc(0);
        let mut g = ExecutionGraph::init_only(1, 2);
        let w = g.push_event(ThreadId(1), EventLabel::Write { loc: x, val: 1 }, None, Some(1));
        g.push_event(ThreadId(2), EventLabel::Read { loc: x, val: 0 }, Some(EventId::Init(x)), None);
        if reads_init_last {
            g.push_event(ThreadId(2), EventLabel::Read { loc: x, val: 0 }, Some(EventId::Init(x)), None);
        } else {
            g.push_event(ThreadId(2), EventLabel::Read { loc: x, val: 1 }, Some(w), None);
        }
        g
    }

    #[test]
    fn exiting_read_is_not_a_witness() {
        let p = parse_program(RLOOP).unwrap();
        let r = is_nontermination_witness(&rloop_graph(false), &p).unwrap();
        assert!(!r.is_witness);
        assert!(r.nonterminated.is_empty());
    }

    #[test]
    fn stale_read_is_not_a_witness() {
        let p = parse_program(RLOOP).unwrap();
        let r = is_nontermination_witness(&rloop_graph(true), &p).unwrap();
        assert!(!r.is_witness);
        assert_eq!(r.checks.len(), 1);
        assert!(!r.checks[0].fr_free);
        assert_eq!((r.checks[0].first_sn, r.checks[0].last_sn), (1, 1));
    }

    #[test]
    fn rloop_terminates() {
        let p = parse_program(RLOOP).unwrap();
        for m in ModelId::ALL {
            let v = analyze_termination(&p, m, &ExplorationBounds::default()).unwrap();
            assert_eq!(v.outcome(), "AllSpinloopsTerminate", "{m}");
        }
    }

    #[test]
    fn lone_spinner_diverges() {
        let p = parse_program("locations x; thread 1 { L: a = load(x); if (a == 0) goto L; }").unwrap();
        let v = analyze_termination(&p, ModelId::Sc, &ExplorationBounds::default()).unwrap();
        let TerminationVerdict::MayDiverge { stuck_threads, .. } = v else { panic!("{v:?}") };
        assert_eq!(stuck_threads, vec![ThreadId(1)]);
    }

    #[test]
    fn writing_loop_unsupported() {
        let p = parse_program("locations x; thread 1 { L: store(x,1); goto L; }").unwrap();
        let v = analyze_termination(&p, ModelId::Tso, &ExplorationBounds::default()).unwrap();
        assert_eq!(v.outcome(), "Unsupported");
    }
}
