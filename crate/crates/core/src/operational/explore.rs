//! Exhaustive bounded exploration of program and machine together.

use std::collections::{BTreeSet, HashSet};

use super::{enabled_with, system_step, MachineState, TransitionLabel};
use crate::consistency::ModelId;
use crate::error::Result;
use crate::graph::{Behavior, Loc, ThreadId};
use crate::ir::{ConcurrentProgram, ProgramState};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OperationalBehaviors {
    /// Behaviors of runs in which every thread terminated.
    pub terminated: BTreeSet<Behavior>,
    /// Behaviors of every reachable state.
    pub all: BTreeSet<Behavior>,
    /// Some thread was stopped by the event bound.
    pub truncated: bool,
    pub states: usize,
}

/// Every behavior reachable with at most `max_events_per_thread`
/// observable steps per thread, over all interleavings and all placements
/// of silent steps.
///
/// A view propagation to thread τ changes only τ's view, so it commutes
/// with the steps of every other thread. Such propagations are therefore
/// only tried right before an observable step of τ: after one, the next
/// step must belong to τ. A run of propagations to τ matters only through
/// the view it leaves, and each raises one location's timestamp, so they
/// are taken in increasing location order, one per location.
/// Propagations to threads that cannot step again are skipped. TSO
/// flushes are observable by every thread and stay unrestricted.
pub fn explore_behaviors(p: &ConcurrentProgram, m: ModelId, max_events_per_thread: usize) -> Result<OperationalBehaviors> {
    let ps0 = p.initial_state()?;
    let ms0 = MachineState::initial(m, p.num_locs(), p.num_threads());
    type Node = (Behavior, ProgramState, MachineState, Option<(ThreadId, Loc)>);
    let mut seen: HashSet<Node> = HashSet::new();
    let mut out = OperationalBehaviors::default();
    let mut stack: Vec<Node> = vec![(Behavior::default(), ps0, ms0, None)];
    seen.insert(stack[0].clone());
    while let Some((b, ps, ms, focus)) = stack.pop() {
        out.states += 1;
        if p.is_terminated(&ps) {
            out.terminated.insert(b.clone());
        }
        out.all.insert(b.clone());
        let at_bound = |tid| b.thread(tid).len() >= max_events_per_thread;
        let done = |tid: ThreadId| at_bound(tid) || p.thread(tid).is_terminated(&ps.threads[tid.index()]);
        let mut blocked = false;
        for tid in p.thread_ids() {
            if at_bound(tid) && !p.thread(tid).is_terminated(&ps.threads[tid.index()]) {
                blocked = true;
            }
        }
        out.truncated |= blocked;
        for step in enabled_with(p, &ps, &ms, &at_bound) {
            let next_focus = match step.label {
                TransitionLabel::PropRa { tid, .. } if done(tid) => continue,
                TransitionLabel::PropRa { tid, msg } => {
                    let (loc, _) = ms.ra().and_then(|ra| ra.find(msg)).expect("propagated message exists");
                    if focus.is_some_and(|(_, last)| loc <= last) {
                        continue;
                    }
                    Some((tid, loc))
                }
                _ => None,
            };
            let focused_elsewhere = |(f, _): (ThreadId, Loc)| {
                f != step.label.tid() || matches!(step.label, TransitionLabel::PropTso { .. })
            };
            if focus.is_some_and(focused_elsewhere) {
                continue;
            }
            let (ps2, ms2, _) = system_step(p, &ps, &ms, &step)?;
            let mut b2 = b.clone();
            if let TransitionLabel::Observable { tid, label } = step.label {
                b2.push(tid, label);
            }
            let node = (b2, ps2, ms2, next_focus);
            if seen.insert(node.clone()) {
                stack.push(node);
            }
        }
    }
    Ok(out)
}
