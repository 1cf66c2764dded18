//! Exhaustive enumeration of consistent execution graphs.
//!
//! The search adds one event at a time in some thread's program order. A
//! read picks any existing write to its location as rf source; a plain
//! write picks any position in the modification order; an RMW sits right
//! after the write it reads from, which every model here requires.
//! Inconsistent prefixes are cut, since consistency of all four models is
//! closed under po∪rf-prefixes. Graphs reached along different
//! interleavings are explored once.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::consistency::{consistent, ModelId};
use crate::error::{Error, Result};
use crate::graph::{EventId, EventLabel, ExecutionGraph, ThreadId, Value};
use crate::ir::{detect_spinloops, Assertion, ConcurrentProgram, Instruction, SpinloopInfo, ThreadLoops, ThreadState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationBounds {
    pub max_events_per_thread: usize,
    /// Full spinloop iterations allowed per loop visit; `None` leaves
    /// spinloops limited by `max_events_per_thread` only.
    pub spinloop_iteration_cap: Option<usize>,
    /// When set, writing any other value is an error.
    pub value_domain: Option<BTreeSet<Value>>,
    /// Stop threads at the event bound instead of reporting
    /// `E_BOUND_EXCEEDED`.
    pub truncate: bool,
}

impl Default for ExplorationBounds {
    fn default() -> Self {
        ExplorationBounds { max_events_per_thread: 16, spinloop_iteration_cap: None, value_domain: None, truncate: false }
    }
}

impl ExplorationBounds {
    pub fn with_max_events(max_events_per_thread: usize) -> Self {
        ExplorationBounds { max_events_per_thread, ..Default::default() }
    }

    pub fn truncating(max_events_per_thread: usize) -> Self {
        ExplorationBounds { max_events_per_thread, truncate: true, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ThreadStatus {
    Running,
    Terminated,
    /// Back at a spinloop head after the allowed number of iterations.
    Stuck,
    /// Stopped by the event bound.
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Completion {
    /// Every thread terminated.
    Complete,
    /// Every thread terminated or stuck at the iteration cap.
    Stuck,
    /// Some thread was stopped by the event bound.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploredGraph {
    pub graph: ExecutionGraph,
    pub completion: Completion,
    pub thread_status: Vec<ThreadStatus>,
    pub final_registers: Vec<Vec<Value>>,
}

#[derive(Clone, Debug, Default)]
pub struct EnumerationResult {
    /// Final graphs in canonical order.
    pub graphs: Vec<ExploredGraph>,
    pub explored: usize,
    pub pruned: usize,
    /// Every consistent graph visited, when requested.
    pub prefixes: Option<Vec<ExecutionGraph>>,
}

impl EnumerationResult {
    pub fn complete(&self) -> impl Iterator<Item = &ExploredGraph> {
        self.graphs.iter().filter(|g| g.completion == Completion::Complete)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EnumerationOptions {
    pub collect_prefixes: bool,
}

/// Spinloop iteration bookkeeping for one thread. Iterations are counted
/// per loop head: an iteration ends when the thread comes back to a head
/// with the same live registers, having performed only plain reads since
/// the previous visit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SpinTracker {
    anchors: BTreeMap<usize, (Vec<Value>, usize)>,
    /// Most iterations completed at the head visited last, if the thread
    /// has not emitted an event since.
    at_head: Option<usize>,
    /// Some spinloop iteration has completed, so the event budget was
    /// partly spent spinning.
    spun: bool,
}

impl SpinTracker {
    pub fn on_event(&mut self, label: &EventLabel) {
        self.at_head = None;
        if label.is_write() {
            self.anchors.clear();
        }
    }

    pub fn on_visit(&mut self, loops: &ThreadLoops, pc: usize, regs: &[Value]) {
        if !loops.is_spin_head(pc) {
            return;
        }
        let proj = loops.live_projection(pc, regs);
        let count = match self.anchors.get_mut(&pc) {
            Some((s, c)) if *s == proj => {
                *c += 1;
                *c
            }
            _ => {
                self.anchors.insert(pc, (proj, 0));
                0
            }
        };
        self.spun |= count > 0;
        self.at_head = Some(self.at_head.map_or(count, |c| c.max(count)));
    }

    /// Iterations completed at the loop head the thread currently sits at.
    pub fn iterations_at_head(&self) -> Option<usize> {
        self.at_head
    }

    /// Whether a spinloop has been entered since the last write.
    pub fn spinning(&self) -> bool {
        !self.anchors.is_empty()
    }

    pub fn has_spun(&self) -> bool {
        self.spun
    }
}

#[derive(Clone, Debug)]
struct Cursor {
    state: ThreadState,
    tracker: SpinTracker,
    status: ThreadStatus,
}

#[derive(Clone, Debug)]
struct Node {
    graph: ExecutionGraph,
    cursors: Vec<Cursor>,
}

struct Search<'a> {
    p: &'a ConcurrentProgram,
    m: ModelId,
    b: &'a ExplorationBounds,
    info: SpinloopInfo,
}

impl Search<'_> {
    fn status(&self, tid: ThreadId, c: &Cursor, events: usize) -> Result<ThreadStatus> {
        let t = self.p.thread(tid);
        if t.is_terminated(&c.state) {
            return Ok(ThreadStatus::Terminated);
        }
        if let (Some(cap), Some(done)) = (self.b.spinloop_iteration_cap, c.tracker.iterations_at_head()) {
            if done >= cap {
                if events >= self.b.max_events_per_thread {
                    return Ok(ThreadStatus::Truncated);
                }
                return Ok(ThreadStatus::Stuck);
            }
        }
        if events >= self.b.max_events_per_thread {
            let loops = self.info.thread(tid);
            let spinning = c.tracker.spinning() && loops.in_spinloop(c.state.pc);
            if self.b.truncate || spinning || c.tracker.has_spun() {
                return Ok(ThreadStatus::Truncated);
            }
            return Err(Error::BoundExceeded { tid: tid.0, limit: self.b.max_events_per_thread });
        }
        Ok(ThreadStatus::Running)
    }

    fn initial(&self) -> Result<Node> {
        let mut cursors = Vec::new();
        for tid in self.p.thread_ids() {
            let loops = self.info.thread(tid);
            let mut tracker = SpinTracker::default();
            let state = self
                .p
                .thread(tid)
                .initial_state_traced(&mut |pc, regs| tracker.on_visit(loops, pc, regs))?;
            let mut c = Cursor { state, tracker, status: ThreadStatus::Running };
            c.status = self.status(tid, &c, 0)?;
            cursors.push(c);
        }
        Ok(Node { graph: ExecutionGraph::init_only(self.p.num_locs(), self.p.num_threads()), cursors })
    }

    /// Candidate (label, rf source, mo position) triples for the next event
    /// of `tid`.
    fn options(&self, g: &ExecutionGraph, tid: ThreadId, s: &ThreadState) -> Vec<(EventLabel, Option<EventId>, Option<usize>)> {
        let t = self.p.thread(tid);
        let Some(instr) = t.pending(s) else { return vec![] };
        let loc = instr.loc().expect("pending instructions access memory");
        let order = g.mo(loc);
        let mut out = Vec::new();
        if let Instruction::Store { val, .. } = instr {
            let label = EventLabel::Write { loc, val: val.eval(&s.regs) };
            for pos in 0..=order.len() {
                out.push((label, None, Some(pos)));
            }
            return out;
        }
        for (k, &w) in order.iter().enumerate() {
            let v = g.label(w).val_w().expect("mo holds writes");
            let label = t.label_for_read(s, v).expect("reading instruction");
            let pos = label.is_rmw().then_some(k + 1);
            out.push((label, Some(w), pos));
        }
        out
    }

    fn run(&self, opts: &EnumerationOptions) -> Result<EnumerationResult> {
        let root = self.initial()?;
        let mut visited: HashSet<ExecutionGraph> = HashSet::new();
        visited.insert(root.graph.clone());
        let mut stack = vec![root];
        let mut finals: Vec<ExploredGraph> = Vec::new();
        let mut prefixes = opts.collect_prefixes.then(Vec::new);
        let (mut explored, mut pruned) = (0, 0);
        while let Some(node) = stack.pop() {
            explored += 1;
            if let Some(p) = prefixes.as_mut() {
                p.push(node.graph.clone());
            }
            if node.cursors.iter().all(|c| c.status != ThreadStatus::Running) {
                let completion = if node.cursors.iter().all(|c| c.status == ThreadStatus::Terminated) {
                    Completion::Complete
                } else if node.cursors.iter().any(|c| c.status == ThreadStatus::Truncated) {
                    Completion::Truncated
                } else {
                    Completion::Stuck
                };
                finals.push(ExploredGraph {
                    graph: node.graph.clone(),
                    completion,
                    thread_status: node.cursors.iter().map(|c| c.status).collect(),
                    final_registers: node.cursors.iter().map(|c| c.state.regs.clone()).collect(),
                });
            }
            for tid in self.p.thread_ids().rev() {
                let cur = &node.cursors[tid.index()];
                if !matches!(cur.status, ThreadStatus::Running | ThreadStatus::Stuck) {
                    continue;
                }
                let loops = self.info.thread(tid);
                for (label, rf, pos) in self.options(&node.graph, tid, &cur.state) {
                    if let (Some(dom), Some(v)) = (&self.b.value_domain, label.val_w()) {
                        if !dom.contains(&v) {
                            return Err(Error::ValueOutOfDomain { value: v });
                        }
                    }
                    let mut graph = node.graph.clone();
                    graph.push_event(tid, label, rf, pos);
                    if visited.contains(&graph) {
                        continue;
                    }
                    if !consistent(&graph, self.m) {
                        pruned += 1;
                        continue;
                    }
                    let mut tracker = cur.tracker.clone();
                    tracker.on_event(&label);
                    let state = self
                        .p
                        .thread(tid)
                        .step_traced(&cur.state, &label, &mut |pc, regs| tracker.on_visit(loops, pc, regs))?;
                    if let (Some(cap), Some(done)) = (self.b.spinloop_iteration_cap, tracker.iterations_at_head()) {
                        if done > cap {
                            pruned += 1;
                            continue;
                        }
                    }
                    let mut c = Cursor { state, tracker, status: ThreadStatus::Running };
                    c.status = self.status(tid, &c, graph.thread(tid).len())?;
                    let mut cursors = node.cursors.clone();
                    cursors[tid.index()] = c;
                    visited.insert(graph.clone());
                    stack.push(Node { graph, cursors });
                }
            }
        }
        finals.sort_by(|a, b| a.graph.cmp(&b.graph));
        if let Some(p) = prefixes.as_mut() {
            p.sort();
        }
        Ok(EnumerationResult { graphs: finals, explored, pruned, prefixes })
    }
}

/// All consistent final graphs of `p` under `m` within `b`.
pub fn enumerate_consistent_graphs(p: &ConcurrentProgram, m: ModelId, b: &ExplorationBounds) -> Result<EnumerationResult> {
    enumerate_with(p, m, b, &EnumerationOptions::default())
}

pub fn enumerate_with(
    p: &ConcurrentProgram,
    m: ModelId,
    b: &ExplorationBounds,
    opts: &EnumerationOptions,
) -> Result<EnumerationResult> {
    Search { p, m, b, info: detect_spinloops(p) }.run(opts)
}

#[derive(Clone, Debug)]
pub struct OutcomeVerdict {
    pub allowed: bool,
    pub witness: Option<ExploredGraph>,
    pub complete_graphs: usize,
}

/// Whether some complete graph ends with registers satisfying `assertion`.
pub fn check_outcome(
    p: &ConcurrentProgram,
    m: ModelId,
    assertion: &Assertion,
    b: &ExplorationBounds,
) -> Result<OutcomeVerdict> {
    let res = enumerate_consistent_graphs(p, m, b)?;
    let complete: Vec<&ExploredGraph> = res.complete().collect();
    let witness = complete.iter().find(|g| assertion.holds(&g.final_registers)).map(|g| (*g).clone());
    Ok(OutcomeVerdict { allowed: witness.is_some(), witness, complete_graphs: complete.len() })
}
