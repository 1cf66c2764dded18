//! Operational semantics: memory machines run in lockstep with a program.

mod explore;
mod fair;
mod machine;

pub use explore::{explore_behaviors, OperationalBehaviors};
pub use fair::{fair_run, FairRun, FairSchedulerConfig, SchedulerPolicy};
pub use machine::{
    machine_step, BufferedWrite, MachineState, Memory, Message, RaState, Step, StepChoice, TransitionLabel, TsoState,
};

use serde_json::json;

use crate::consistency::ModelId;
use crate::error::{Error, Result};
use crate::graph::{Behavior, EventId, EventLabel, Loc, ThreadId};
use crate::ir::{ConcurrentProgram, Instruction, ProgramState};

/// A run of a machine: its steps, each with the state it leads to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedTrace {
    pub initial: MachineState,
    pub steps: Vec<Step>,
    pub snapshots: Vec<MachineState>,
}

impl AnnotatedTrace {
    pub fn empty(model: ModelId, num_locs: usize, num_threads: usize) -> Self {
        AnnotatedTrace { initial: MachineState::initial(model, num_locs, num_threads), steps: vec![], snapshots: vec![] }
    }

    /// Run `steps` on the machine alone, resolving open choices.
    pub fn replay(model: ModelId, num_locs: usize, num_threads: usize, steps: &[Step]) -> Result<Self> {
        let mut t = AnnotatedTrace::empty(model, num_locs, num_threads);
        for s in steps {
            t.push(s)?;
        }
        Ok(t)
    }

    pub fn model(&self) -> ModelId {
        self.initial.model
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> &MachineState {
        self.snapshots.last().unwrap_or(&self.initial)
    }

    /// The machine state before step `i`.
    pub fn state_before(&self, i: usize) -> &MachineState {
        if i == 0 {
            &self.initial
        } else {
            &self.snapshots[i - 1]
        }
    }

    pub fn push(&mut self, step: &Step) -> Result<()> {
        let (next, resolved) = self.last_state().step(step)?;
        self.steps.push(resolved);
        self.snapshots.push(next);
        Ok(())
    }

    /// Observable steps with the events they create.
    pub fn events(&self) -> Vec<(usize, EventId, EventLabel)> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s.label {
                TransitionLabel::Observable { tid, label } => Some((i, self.state_before(i).next_event(tid), label)),
                _ => None,
            })
            .collect()
    }

    pub fn behavior(&self) -> Behavior {
        behavior_of_trace(&self.steps)
    }

    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        trace_to_json(&self.steps, names)
    }
}

/// Per-thread sequences of observable labels.
pub fn behavior_of_trace(steps: &[Step]) -> Behavior {
    let mut b = Behavior::default();
    for s in steps {
        if let TransitionLabel::Observable { tid, label } = s.label {
            b.push(tid, label);
        }
    }
    b
}

fn id_json(id: EventId, names: &[String]) -> serde_json::Value {
    match id {
        EventId::Init(l) => json!({ "init": names[l.index()] }),
        EventId::Thread { tid, sn } => json!({ "tid": tid.0, "sn": sn }),
    }
}

pub fn trace_to_json(steps: &[Step], names: &[String]) -> serde_json::Value {
    let loc = |l: Loc| names[l.index()].clone();
    let items: Vec<serde_json::Value> = steps
        .iter()
        .map(|s| match s.label {
            TransitionLabel::Observable { tid, label } => {
                let mut o = json!({
                    "kind": "obs",
                    "tid": tid.0,
                    "label": {
                        "kind": label.kind().as_str(),
                        "loc": loc(label.loc()),
                        "valR": label.val_r(),
                        "valW": label.val_w(),
                    },
                });
                if let Some(r) = s.choice.reads {
                    o["reads"] = id_json(r, names);
                }
                if let Some(a) = s.choice.after {
                    o["after"] = id_json(a, names);
                }
                o
            }
            TransitionLabel::PropTso { tid } => json!({ "kind": "prop", "tid": tid.0 }),
            TransitionLabel::PropRa { tid, msg } => json!({ "kind": "prop", "tid": tid.0, "msg": id_json(msg, names) }),
        })
        .collect();
    serde_json::Value::Array(items)
}

/// All steps the program and machine can take together at `(ps, ms)`.
/// Threads in `blocked` take no observable step.
pub fn enabled_transitions(p: &ConcurrentProgram, ps: &ProgramState, ms: &MachineState) -> Vec<Step> {
    enabled_with(p, ps, ms, &|_| false)
}

pub(crate) fn enabled_with(
    p: &ConcurrentProgram,
    ps: &ProgramState,
    ms: &MachineState,
    blocked: &dyn Fn(ThreadId) -> bool,
) -> Vec<Step> {
    let mut out = Vec::new();
    for tid in p.thread_ids() {
        if blocked(tid) {
            continue;
        }
        let t = p.thread(tid);
        let s = &ps.threads[tid.index()];
        let Some(instr) = t.pending(s) else { continue };
        let loc = instr.loc().expect("pending instructions access memory");
        let store = match instr {
            Instruction::Store { loc, val } => Some(EventLabel::Write { loc: *loc, val: val.eval(&s.regs) }),
            _ => None,
        };
        let label_for = |v| t.label_for_read(s, v).expect("reading instruction");
        out.extend(ms.observable_steps(tid, loc, store, &label_for));
    }
    out.extend(ms.silent_steps());
    out
}

/// Take `step` in program and machine together.
pub fn system_step(
    p: &ConcurrentProgram,
    ps: &ProgramState,
    ms: &MachineState,
    step: &Step,
) -> Result<(ProgramState, MachineState, Step)> {
    let ps2 = match step.label {
        TransitionLabel::Observable { tid, label } => {
            if tid.index() >= p.num_threads() {
                return Err(Error::NotEnabled(format!("no thread {tid}")));
            }
            p.step(ps, tid, &label)?
        }
        _ => ps.clone(),
    };
    let (ms2, resolved) = ms.step(step)?;
    Ok((ps2, ms2, resolved))
}

/// Run `steps` from the initial state of `p` under `m`.
pub fn run_program(p: &ConcurrentProgram, m: ModelId, steps: &[Step]) -> Result<(AnnotatedTrace, ProgramState)> {
    let mut ps = p.initial_state()?;
    let mut trace = AnnotatedTrace::empty(m, p.num_locs(), p.num_threads());
    for s in steps {
        let (ps2, ms2, resolved) = system_step(p, &ps, trace.last_state(), s)?;
        ps = ps2;
        trace.steps.push(resolved);
        trace.snapshots.push(ms2);
    }
    Ok((trace, ps))
}
