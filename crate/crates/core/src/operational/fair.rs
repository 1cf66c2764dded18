//! Randomized runs under bounded-delay fairness.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{enabled_transitions, system_step, AnnotatedTrace, Step, TransitionLabel};
use crate::consistency::ModelId;
use crate::error::Result;
use crate::graph::{EventId, ThreadId};
use crate::ir::ConcurrentProgram;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerPolicy {
    Fair,
    /// Never take a silent step; used to exhibit unfair runs.
    NeverPropagate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairSchedulerConfig {
    pub max_steps: usize,
    /// Longest a step class may stay enabled without being taken.
    /// Defaults to four steps per thread.
    pub delay_bound: Option<usize>,
    pub seed: u64,
    pub policy: SchedulerPolicy,
}

impl Default for FairSchedulerConfig {
    fn default() -> Self {
        FairSchedulerConfig { max_steps: 10_000, delay_bound: None, seed: 0, policy: SchedulerPolicy::Fair }
    }
}

#[derive(Clone, Debug)]
pub struct FairRun {
    pub trace: AnnotatedTrace,
    /// The program terminated and no write is left in a buffer.
    pub terminated: bool,
}

/// Steps of one class are interchangeable for fairness purposes: a thread's
/// instruction, a thread's buffer flush, or one message reaching a thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Thread(ThreadId),
    Flush(ThreadId),
    Deliver(ThreadId, EventId),
}

fn class(s: &Step) -> Class {
    match s.label {
        TransitionLabel::Observable { tid, .. } => Class::Thread(tid),
        TransitionLabel::PropTso { tid } => Class::Flush(tid),
        TransitionLabel::PropRa { tid, msg } => Class::Deliver(tid, msg),
    }
}

/// Run `p` under `m`, picking steps at random but never letting a class of
/// steps stay enabled for more than the delay bound without taking it.
/// Stops when the program has terminated and all buffers are flushed, when
/// nothing is enabled, or after `max_steps`.
pub fn fair_run(p: &ConcurrentProgram, m: ModelId, cfg: &FairSchedulerConfig) -> Result<FairRun> {
    let bound = cfg.delay_bound.unwrap_or(4 * p.num_threads()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ps = p.initial_state()?;
    let mut trace = AnnotatedTrace::empty(m, p.num_locs(), p.num_threads());
    let mut waiting: BTreeMap<Class, usize> = BTreeMap::new();
    for _ in 0..cfg.max_steps {
        let ms = trace.last_state();
        if p.is_terminated(&ps) && ms.is_quiescent() {
            break;
        }
        let mut enabled = enabled_transitions(p, &ps, ms);
        if cfg.policy == SchedulerPolicy::NeverPropagate {
            enabled.retain(|s| !s.label.is_silent());
        } else if p.is_terminated(&ps) {
            // Only buffer flushes matter once the program is done.
            enabled.retain(|s| matches!(s.label, TransitionLabel::PropTso { .. }));
        }
        if enabled.is_empty() {
            break;
        }
        let mut classes: Vec<Class> = enabled.iter().map(class).collect();
        classes.sort();
        classes.dedup();
        let overdue: Vec<Class> = classes.iter().copied().filter(|c| waiting.get(c).is_some_and(|&w| w >= bound)).collect();
        let chosen = if overdue.is_empty() {
            classes[rng.gen_range(0..classes.len())]
        } else {
            let oldest = overdue.iter().map(|c| waiting[c]).max().unwrap_or(0);
            *overdue.iter().find(|c| waiting[*c] == oldest).expect("nonempty")
        };
        let candidates: Vec<&Step> = enabled.iter().filter(|s| class(s) == chosen).collect();
        let step = **candidates.choose(&mut rng).expect("class is enabled");
        let (ps2, ms2, resolved) = system_step(p, &ps, ms, &step)?;
        ps = ps2;
        trace.steps.push(resolved);
        trace.snapshots.push(ms2);
        waiting = classes
            .into_iter()
            .filter(|c| *c != chosen)
            .map(|c| (c, waiting.get(&c).copied().unwrap_or(0) + 1))
            .collect();
    }
    let terminated = p.is_terminated(&ps) && trace.last_state().is_quiescent();
    Ok(FairRun { trace, terminated })
}
