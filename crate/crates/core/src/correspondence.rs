//! Conversions between machine traces and execution graphs.
//!
//! Forward: a trace of a machine determines rf and mo for the events it
//! emits. Backward: a consistent graph is scheduled into a trace of the
//! machine that emits exactly its events, propagating every write to every
//! thread before the trace ends. Only finite graphs and traces are handled.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::consistency::{axiom_base, consistent, Axiom, ModelId};
use crate::error::{Error, Result};
use crate::graph::{EventId, EventLabel, EventSet, ExecutionGraph, GraphIndex, Loc, Relation, ThreadEvent, ThreadId};
use crate::operational::{AnnotatedTrace, Memory, Step, StepChoice, TransitionLabel};

/// Topological order of `events` extending `r`, smallest event first among
/// the available ones. `r` is indexed by the canonical order of `events`.
pub fn enumerate_respecting(events: &EventSet, r: &Relation) -> Result<Vec<EventId>> {
    let ids: Vec<EventId> = events.ids().collect();
    if r.size() != ids.len() {
        return Err(Error::MalformedGraph(format!(
            "relation over {} elements given for {} events",
            r.size(),
            ids.len()
        )));
    }
    let all = vec![true; ids.len()];
    Ok(topo_order(r, &all)?.into_iter().map(|i| ids[i]).collect())
}

/// Kahn's algorithm on the elements selected by `keep`, breaking ties by
/// index.
fn topo_order(r: &Relation, keep: &[bool]) -> Result<Vec<usize>> {
    let n = r.size();
    let mut indeg = vec![0usize; n];
    for (a, b) in r.pairs() {
        if keep[a] && keep[b] && a != b {
            indeg[b] += 1;
        }
        if a == b && keep[a] {
            return Err(Error::Cyclic);
        }
    }
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| keep[i] && indeg[i] == 0).map(Reverse).collect();
    let mut out = Vec::new();
    while let Some(Reverse(a)) = heap.pop() {
        out.push(a);
        for b in r.successors(a) {
            if keep[b] && b != a {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    heap.push(Reverse(b));
                }
            }
        }
    }
    if out.len() != keep.iter().filter(|&&k| k).count() {
        return Err(Error::Cyclic);
    }
    Ok(out)
}

fn shape(t: &AnnotatedTrace) -> (usize, usize) {
    let n = t.initial.num_threads();
    let locs = match &t.initial.memory {
        Memory::Sc { memory } => memory.len(),
        Memory::Tso(s) => s.memory.len(),
        Memory::Ra(s) => s.messages.len(),
    };
    (locs, n)
}

/// Assemble a graph from events in trace order, rf choices and per-location
/// mo sequences (without the init writes).
fn assemble(
    num_locs: usize,
    num_threads: usize,
    events: &[(usize, EventId, EventLabel)],
    rf: &BTreeMap<EventId, EventId>,
    mo: Vec<Vec<EventId>>,
) -> Result<ExecutionGraph> {
    let mut threads: Vec<Vec<ThreadEvent>> = vec![Vec::new(); num_threads];
    for &(_, id, label) in events {
        let rf = if label.is_read() {
            Some(*rf.get(&id).ok_or_else(|| Error::MalformedTrace(format!("no write for read {id}")))?)
        } else {
            None
        };
        threads[id.tid().expect("trace events").index()].push(ThreadEvent { label, rf });
    }
    let mo = mo
        .into_iter()
        .enumerate()
        .map(|(l, ws)| std::iter::once(EventId::Init(Loc(l as u16))).chain(ws).collect())
        .collect();
    let g = ExecutionGraph::from_parts(num_locs, threads, mo);
    g.check_wellformed().map_err(Error::MalformedTrace)?;
    Ok(g)
}

/// SC: each read reads the latest earlier write to its location; mo is
/// trace order.
pub fn sc_trace_to_graph(t: &AnnotatedTrace) -> Result<ExecutionGraph> {
    let (locs, threads) = shape(t);
    let events = t.events();
    let mut last: Vec<EventId> = (0..locs).map(|l| EventId::Init(Loc(l as u16))).collect();
    let mut rf = BTreeMap::new();
    let mut mo = vec![Vec::new(); locs];
    for &(_, id, label) in &events {
        let l = label.loc().index();
        if label.is_read() {
            rf.insert(id, last[l]);
        }
        if label.is_write() {
            last[l] = id;
            mo[l].push(id);
        }
    }
    assemble(locs, threads, &events, &rf, mo)
}

/// TSO: mo is the order in which writes reach memory. A read takes its
/// value from the thread's own latest buffered write if there is one, and
/// from the latest write in memory otherwise.
pub fn tso_trace_to_graph(t: &AnnotatedTrace) -> Result<ExecutionGraph> {
    let (locs, threads) = shape(t);
    let events = t.events();
    let mut in_memory: Vec<EventId> = (0..locs).map(|l| EventId::Init(Loc(l as u16))).collect();
    let mut rf = BTreeMap::new();
    let mut mo = vec![Vec::new(); locs];
    let mut ev = events.iter();
    for (i, step) in t.steps.iter().enumerate() {
        let before = t.state_before(i).tso().ok_or_else(|| Error::MalformedTrace("not a TSO trace".into()))?;
        match step.label {
            TransitionLabel::Observable { tid, label } => {
                let &(_, id, _) = ev.next().expect("one event per observable step");
                let l = label.loc();
                if label.is_read() {
                    let own = before.buffers[tid.index()].iter().rev().find(|w| w.loc == l).map(|w| w.origin);
                    rf.insert(id, own.unwrap_or(in_memory[l.index()]));
                }
                if label.is_rmw() {
                    in_memory[l.index()] = id;
                    mo[l.index()].push(id);
                }
            }
            TransitionLabel::PropTso { tid } => {
                let w = before.buffers[tid.index()]
                    .front()
                    .ok_or_else(|| Error::MalformedTrace(format!("step {i} flushes an empty buffer")))?;
                in_memory[w.loc.index()] = w.origin;
                mo[w.loc.index()].push(w.origin);
            }
            TransitionLabel::PropRa { .. } => return Err(Error::MalformedTrace("not a TSO trace".into())),
        }
    }
    if let Some(tso) = t.last_state().tso() {
        if let Some(w) = tso.buffers.iter().flatten().next() {
            return Err(Error::UnpropagatedWrite(format!("{} never reaches memory", w.origin)));
        }
    }
    assemble(locs, threads, &events, &rf, mo)
}

/// RA and StrongCOH: rf is the message read and mo the final timestamp
/// order.
pub fn ra_trace_to_graph(t: &AnnotatedTrace) -> Result<ExecutionGraph> {
    let (locs, threads) = shape(t);
    let events = t.events();
    let mut rf = BTreeMap::new();
    for &(i, id, label) in &events {
        if label.is_read() {
            let src = t.steps[i].choice.reads.ok_or_else(|| Error::MalformedTrace(format!("step {i} names no message")))?;
            rf.insert(id, src);
        }
    }
    let ra = t.last_state().ra().ok_or_else(|| Error::MalformedTrace("not an RA trace".into()))?;
    let mo = ra.messages.iter().map(|ms| ms.iter().skip(1).map(|m| m.origin).collect()).collect();
    assemble(locs, threads, &events, &rf, mo)
}

/// Forward conversion for the trace's own model.
pub fn trace_to_graph(t: &AnnotatedTrace) -> Result<ExecutionGraph> {
    match t.model() {
        ModelId::Sc => sc_trace_to_graph(t),
        ModelId::Tso => tso_trace_to_graph(t),
        ModelId::Ra | ModelId::StrongCoh => ra_trace_to_graph(t),
    }
}

/// A finite fair trace of `m`'s machine whose behavior is that of `g`.
pub fn graph_to_fair_trace(g: &ExecutionGraph, m: ModelId) -> Result<AnnotatedTrace> {
    g.check_wellformed().map_err(Error::MalformedGraph)?;
    if !consistent(g, m) {
        return Err(Error::InconsistentInput(format!("graph is not {m}-consistent")));
    }
    let ix = GraphIndex::new(g);
    let steps = match m {
        ModelId::Sc => sc_schedule(g, &ix)?,
        ModelId::Tso => tso_schedule(g, &ix)?,
        ModelId::Ra | ModelId::StrongCoh => return ra_schedule(g, &ix, m),
    };
    AnnotatedTrace::replay(m, g.num_locs(), g.num_threads(), &steps)
}

fn observable(ix: &GraphIndex, i: usize) -> Step {
    Step::observable(ix.ids[i].tid().expect("non-init"), ix.labels[i])
}

fn sc_schedule(_g: &ExecutionGraph, ix: &GraphIndex) -> Result<Vec<Step>> {
    let order = topo_order(&axiom_base(ix, Axiom::HbSc), &ix.non_init())?;
    Ok(order.into_iter().map(|i| observable(ix, i)).collect())
}

/// Events are visited in an order respecting TSO's happens-before; a
/// write's position there is where it reaches memory. A write is issued
/// into the buffer when it is visited or, earlier, when a later read of the
/// same thread is visited.
fn tso_schedule(g: &ExecutionGraph, ix: &GraphIndex) -> Result<Vec<Step>> {
    let order = topo_order(&axiom_base(ix, Axiom::HbTso), &ix.non_init())?;
    let mut issued: Vec<u32> = vec![0; g.num_threads()];
    let mut steps = Vec::new();
    let issue_upto = |tid: ThreadId, sn: u32, issued: &mut Vec<u32>, steps: &mut Vec<Step>| {
        let evs = g.thread(tid);
        while issued[tid.index()] < sn {
            let k = issued[tid.index()] as usize;
            steps.push(Step::observable(tid, evs[k].label));
            issued[tid.index()] += 1;
        }
    };
    for i in order {
        let EventId::Thread { tid, sn } = ix.ids[i] else { unreachable!() };
        issue_upto(tid, sn + 1, &mut issued, &mut steps);
        if let EventLabel::Write { .. } = ix.labels[i] {
            steps.push(Step { label: TransitionLabel::PropTso { tid }, choice: StepChoice::default() });
        }
    }
    Ok(steps)
}

/// Events are visited in an order respecting po ∪ rf. Each write is placed
/// right after its mo-predecessor among the writes placed so far. A write
/// is shown to another thread at the first point after which nothing that
/// thread does, or passes on through its messages, needs an older message
/// of that location.
fn ra_schedule(g: &ExecutionGraph, ix: &GraphIndex, m: ModelId) -> Result<AnnotatedTrace> {
    let order = topo_order(&axiom_base(ix, Axiom::HbRa), &ix.non_init())?;
    let mut slot = vec![usize::MAX; ix.len()];
    for (k, &i) in order.iter().enumerate() {
        slot[i] = k;
    }
    let mo_pos = |w: EventId| g.mo_position(w).expect("writes are in mo");
    // Events whose views are raised along with a thread's view.
    let carries = if m == ModelId::Ra {
        ix.po.union(&ix.rf).reflexive_transitive_closure()
    } else {
        ix.rf.reflexive_closure().compose(&ix.po.reflexive_closure())
    };
    let mut deliveries: BTreeMap<usize, BTreeMap<(ThreadId, Loc), EventId>> = BTreeMap::new();
    for (k, &wi) in order.iter().enumerate() {
        if !ix.labels[wi].is_write() {
            continue;
        }
        let w = ix.ids[wi];
        let loc = ix.labels[wi].loc();
        let older = |e: usize| {
            let id = ix.ids[e];
            ix.labels[e].loc() == loc
                && (g.rf_of(id).is_some_and(|src| mo_pos(src) < mo_pos(w))
                    || (ix.labels[e].is_write() && mo_pos(id) < mo_pos(w)))
        };
        for tid in (0..g.num_threads()).map(ThreadId::from_index) {
            if w.tid() == Some(tid) {
                continue;
            }
            let blocking = (0..ix.len())
                .filter(|&e| ix.ids[e].tid() == Some(tid))
                .filter(|&e| carries.successors(e).any(|d| !ix.ids[d].is_init() && older(d)))
                .map(|e| slot[e]);
            let at = blocking.max().map_or(k, |b| b.max(k));
            let entry = deliveries.entry(at).or_default().entry((tid, loc)).or_insert(w);
            if mo_pos(w) > mo_pos(*entry) {
                *entry = w;
            }
        }
    }
    let mut placed: Vec<Vec<EventId>> = (0..g.num_locs()).map(|l| vec![EventId::Init(Loc(l as u16))]).collect();
    let mut trace = AnnotatedTrace::empty(m, g.num_locs(), g.num_threads());
    for (k, &i) in order.iter().enumerate() {
        let id = ix.ids[i];
        let label = ix.labels[i];
        let loc = label.loc().index();
        let choice = match label {
            EventLabel::Read { .. } | EventLabel::Rmw { .. } => StepChoice { reads: g.rf_of(id), after: None },
            EventLabel::Write { .. } => {
                let pred = placed[loc].iter().copied().filter(|&w| mo_pos(w) < mo_pos(id)).max_by_key(|&w| mo_pos(w));
                StepChoice { reads: None, after: pred }
            }
        };
        if label.is_write() {
            placed[loc].push(id);
        }
        trace.push(&observable(ix, i).with_choice(choice))?;
        for (&(tid, loc), &w) in deliveries.get(&k).into_iter().flatten() {
            let ra = trace.last_state().ra().expect("view-based machine");
            let (_, ts) = ra.find(w).expect("delivered writes are placed");
            if (ra.views[tid.index()][loc.index()] as usize) < ts {
                trace.push(&Step { label: TransitionLabel::PropRa { tid, msg: w }, choice: StepChoice::default() })?;
            }
        }
    }
    Ok(trace)
}
