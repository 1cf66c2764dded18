//! Memory machines and their transitions.

use std::collections::VecDeque;

use crate::consistency::ModelId;
use crate::error::{Error, Result};
use crate::graph::{EventId, EventLabel, Loc, ThreadId, Value};

/// A transition label of a memory machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionLabel {
    Observable { tid: ThreadId, label: EventLabel },
    /// Flush the oldest buffered write of `tid`.
    PropTso { tid: ThreadId },
    /// Advance the view of `tid` to the message written by `msg`.
    PropRa { tid: ThreadId, msg: EventId },
}

impl TransitionLabel {
    pub fn tid(&self) -> ThreadId {
        match *self {
            TransitionLabel::Observable { tid, .. }
            | TransitionLabel::PropTso { tid }
            | TransitionLabel::PropRa { tid, .. } => tid,
        }
    }

    pub fn is_silent(&self) -> bool {
        !matches!(self, TransitionLabel::Observable { .. })
    }
}

/// Nondeterministic choices of the message-based machines that the label
/// leaves open. Messages are named by the event that wrote them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepChoice {
    /// Message read by a read or RMW.
    pub reads: Option<EventId>,
    /// Message the new message of a plain write is placed right after.
    pub after: Option<EventId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub label: TransitionLabel,
    pub choice: StepChoice,
}

impl Step {
    pub fn observable(tid: ThreadId, label: EventLabel) -> Self {
        Step { label: TransitionLabel::Observable { tid, label }, choice: StepChoice::default() }
    }

    pub fn with_choice(mut self, choice: StepChoice) -> Self {
        self.choice = choice;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferedWrite {
    pub loc: Loc,
    pub val: Value,
    pub origin: EventId,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TsoState {
    pub memory: Vec<Value>,
    pub buffers: Vec<VecDeque<BufferedWrite>>,
}

impl TsoState {
    /// The value `tid` reads at `loc`: its own latest buffered write, or
    /// memory.
    pub fn visible(&self, tid: ThreadId, loc: Loc) -> Value {
        self.buffers[tid.index()]
            .iter()
            .rev()
            .find(|w| w.loc == loc)
            .map_or(self.memory[loc.index()], |w| w.val)
    }
}

/// A message of the view-based machines. Timestamps are positions in the
/// per-location message list, so only their order is represented.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    pub val: Value,
    pub view: Vec<u32>,
    /// Written by an RMW that read the preceding message; nothing may be
    /// placed between the two.
    pub adjacent: bool,
    pub origin: EventId,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RaState {
    /// Reads only advance the per-location timestamp.
    pub strong: bool,
    pub messages: Vec<Vec<Message>>,
    pub views: Vec<Vec<u32>>,
}

impl RaState {
    pub fn find(&self, origin: EventId) -> Option<(Loc, usize)> {
        if let EventId::Init(l) = origin {
            return Some((l, 0));
        }
        self.messages.iter().enumerate().find_map(|(l, ms)| {
            ms.iter().position(|m| m.origin == origin).map(|i| (Loc(l as u16), i))
        })
    }

    pub fn message(&self, loc: Loc, ts: usize) -> &Message {
        &self.messages[loc.index()][ts]
    }

    /// Timestamps `tid` may read at `loc`.
    pub fn readable(&self, tid: ThreadId, loc: Loc) -> std::ops::Range<usize> {
        self.views[tid.index()][loc.index()] as usize..self.messages[loc.index()].len()
    }

    /// Whether a new message may be placed at position `at` of `loc`.
    pub fn free_slot(&self, loc: Loc, at: usize) -> bool {
        self.messages[loc.index()].get(at).is_none_or(|m| !m.adjacent)
    }

    /// Positions a plain write of `tid` to `loc` may take.
    pub fn write_slots(&self, tid: ThreadId, loc: Loc) -> Vec<usize> {
        let lo = self.views[tid.index()][loc.index()] as usize + 1;
        (lo..=self.messages[loc.index()].len()).filter(|&j| self.free_slot(loc, j)).collect()
    }

    fn insert(&mut self, loc: Loc, at: usize, msg: Message) {
        let l = loc.index();
        let bump = |v: &mut Vec<u32>| {
            if v[l] as usize >= at {
                v[l] += 1;
            }
        };
        self.views.iter_mut().for_each(bump);
        for ms in &mut self.messages {
            for m in ms.iter_mut() {
                bump(&mut m.view);
            }
        }
        self.messages[l].insert(at, msg);
    }

    fn read(&mut self, tid: ThreadId, loc: Loc, ts: usize) {
        let t = tid.index();
        if self.strong {
            self.views[t][loc.index()] = ts as u32;
        } else {
            let mview = self.messages[loc.index()][ts].view.clone();
            for (a, b) in self.views[t].iter_mut().zip(mview) {
                *a = (*a).max(b);
            }
        }
    }

    fn write(&mut self, tid: ThreadId, loc: Loc, val: Value, at: usize, adjacent: bool, origin: EventId) {
        self.insert(loc, at, Message { val, view: vec![], adjacent, origin });
        let t = tid.index();
        self.views[t][loc.index()] = at as u32;
        self.messages[loc.index()][at].view = self.views[t].clone();
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Memory {
    Sc { memory: Vec<Value> },
    Tso(TsoState),
    Ra(RaState),
}

/// Memory state plus the number of events each thread has emitted, which
/// names the events written into buffers and messages.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineState {
    pub model: ModelId,
    pub emitted: Vec<u32>,
    pub memory: Memory,
}

impl MachineState {
    pub fn initial(model: ModelId, num_locs: usize, num_threads: usize) -> Self {
        let memory = match model {
            ModelId::Sc => Memory::Sc { memory: vec![0; num_locs] },
            ModelId::Tso => {
                Memory::Tso(TsoState { memory: vec![0; num_locs], buffers: vec![VecDeque::new(); num_threads] })
            }
            ModelId::Ra | ModelId::StrongCoh => Memory::Ra(RaState {
                strong: model == ModelId::StrongCoh,
                messages: (0..num_locs)
                    .map(|l| {
                        vec![Message {
                            val: 0,
                            view: vec![0; num_locs],
                            adjacent: false,
                            origin: EventId::Init(Loc(l as u16)),
                        }]
                    })
                    .collect(),
                views: vec![vec![0; num_locs]; num_threads],
            }),
        };
        MachineState { model, emitted: vec![0; num_threads], memory }
    }

    pub fn num_threads(&self) -> usize {
        self.emitted.len()
    }

    /// The id the next event of `tid` will get.
    pub fn next_event(&self, tid: ThreadId) -> EventId {
        EventId::Thread { tid, sn: self.emitted[tid.index()] }
    }

    pub fn tso(&self) -> Option<&TsoState> {
        match &self.memory {
            Memory::Tso(s) => Some(s),
            _ => None,
        }
    }

    pub fn ra(&self) -> Option<&RaState> {
        match &self.memory {
            Memory::Ra(s) => Some(s),
            _ => None,
        }
    }

    /// Whether no write is waiting to reach memory.
    pub fn is_quiescent(&self) -> bool {
        self.tso().is_none_or(|s| s.buffers.iter().all(|b| b.is_empty()))
    }

    /// Every fully resolved step the memory allows for a thread that is
    /// about to perform an instruction. `label_for` maps a read value to
    /// the label the instruction emits (`None` for a store, whose label is
    /// given by `store`).
    pub fn observable_steps(
        &self,
        tid: ThreadId,
        loc: Loc,
        store: Option<EventLabel>,
        label_for: &dyn Fn(Value) -> EventLabel,
    ) -> Vec<Step> {
        let obs = |label| Step::observable(tid, label);
        match (&self.memory, store) {
            (Memory::Sc { .. } | Memory::Tso(_), Some(w)) => vec![obs(w)],
            (Memory::Sc { memory }, None) => vec![obs(label_for(memory[loc.index()]))],
            (Memory::Tso(s), None) => {
                let label = label_for(s.visible(tid, loc));
                if label.is_rmw() && !s.buffers[tid.index()].is_empty() {
                    return vec![];
                }
                vec![obs(label)]
            }
            (Memory::Ra(s), Some(w)) => s
                .write_slots(tid, loc)
                .into_iter()
                .map(|j| {
                    let after = s.message(loc, j - 1).origin;
                    obs(w).with_choice(StepChoice { reads: None, after: Some(after) })
                })
                .collect(),
            (Memory::Ra(s), None) => s
                .readable(tid, loc)
                .filter_map(|ts| {
                    let m = s.message(loc, ts);
                    let label = label_for(m.val);
                    if label.is_rmw() && !s.free_slot(loc, ts + 1) {
                        return None;
                    }
                    Some(obs(label).with_choice(StepChoice { reads: Some(m.origin), after: None }))
                })
                .collect(),
        }
    }

    /// Enabled silent steps.
    pub fn silent_steps(&self) -> Vec<Step> {
        let silent = |label| Step { label, choice: StepChoice::default() };
        match &self.memory {
            Memory::Sc { .. } => vec![],
            Memory::Tso(s) => (0..self.num_threads())
                .filter(|&t| !s.buffers[t].is_empty())
                .map(|t| silent(TransitionLabel::PropTso { tid: ThreadId::from_index(t) }))
                .collect(),
            Memory::Ra(s) => {
                let mut out = Vec::new();
                for t in 0..self.num_threads() {
                    for (l, ms) in s.messages.iter().enumerate() {
                        for m in &ms[s.views[t][l] as usize + 1..] {
                            let tid = ThreadId::from_index(t);
                            out.push(silent(TransitionLabel::PropRa { tid, msg: m.origin }));
                        }
                    }
                }
                out
            }
        }
    }

    /// Take `step`, filling in any choice left open: reads default to the
    /// oldest readable message with the right value and writes go last.
    /// Returns the successor and the fully resolved step.
    pub fn step(&self, step: &Step) -> Result<(MachineState, Step)> {
        let not_enabled = |why: &str| Error::NotEnabled(format!("{step:?}: {why}"));
        let mut next = self.clone();
        let mut resolved = *step;
        match step.label {
            TransitionLabel::Observable { tid, label } => {
                if tid.index() >= self.num_threads() {
                    return Err(not_enabled("no such thread"));
                }
                let origin = self.next_event(tid);
                let loc = label.loc();
                if loc.index() >= self.loc_count() {
                    return Err(not_enabled("no such location"));
                }
                match &mut next.memory {
                    Memory::Sc { memory } => {
                        if let Some(v) = label.val_r() {
                            if memory[loc.index()] != v {
                                return Err(not_enabled("memory holds a different value"));
                            }
                        }
                        if let Some(v) = label.val_w() {
                            memory[loc.index()] = v;
                        }
                    }
                    Memory::Tso(s) => match label {
                        EventLabel::Read { val, .. } => {
                            if s.visible(tid, loc) != val {
                                return Err(not_enabled("value not visible to the thread"));
                            }
                        }
                        EventLabel::Write { val, .. } => {
                            s.buffers[tid.index()].push_back(BufferedWrite { loc, val, origin });
                        }
                        EventLabel::Rmw { read, write, .. } => {
                            if !s.buffers[tid.index()].is_empty() {
                                return Err(not_enabled("store buffer not empty"));
                            }
                            if s.memory[loc.index()] != read {
                                return Err(not_enabled("memory holds a different value"));
                            }
                            s.memory[loc.index()] = write;
                        }
                    },
                    Memory::Ra(s) => {
                        let view = s.views[tid.index()][loc.index()] as usize;
                        let pick = |s: &RaState, val: Value, need_slot: bool| -> Result<usize> {
                            match step.choice.reads {
                                Some(o) => match s.find(o) {
                                    Some((l, ts)) if l == loc => Ok(ts),
                                    _ => Err(not_enabled("no such message at this location")),
                                },
                                None => s
                                    .readable(tid, loc)
                                    .find(|&ts| s.message(loc, ts).val == val && (!need_slot || s.free_slot(loc, ts + 1)))
                                    .ok_or_else(|| not_enabled("no readable message with this value")),
                            }
                        };
                        match label {
                            EventLabel::Read { val, .. } => {
                                let ts = pick(s, val, false)?;
                                if ts < view || s.message(loc, ts).val != val {
                                    return Err(not_enabled("message not readable"));
                                }
                                s.read(tid, loc, ts);
                                resolved.choice = StepChoice { reads: Some(s.message(loc, ts).origin), after: None };
                            }
                            EventLabel::Write { val, .. } => {
                                let at = match step.choice.after {
                                    Some(o) => match s.find(o) {
                                        Some((l, ts)) if l == loc => ts + 1,
                                        _ => return Err(not_enabled("no such message at this location")),
                                    },
                                    None => s.messages[loc.index()].len(),
                                };
                                if at <= view || !s.free_slot(loc, at) {
                                    return Err(not_enabled("timestamp not available"));
                                }
                                resolved.choice = StepChoice { reads: None, after: Some(s.message(loc, at - 1).origin) };
                                s.write(tid, loc, val, at, false, origin);
                            }
                            EventLabel::Rmw { read, write, .. } => {
                                let ts = pick(s, read, true)?;
                                if ts < view || s.message(loc, ts).val != read || !s.free_slot(loc, ts + 1) {
                                    return Err(not_enabled("message not available for an RMW"));
                                }
                                resolved.choice = StepChoice { reads: Some(s.message(loc, ts).origin), after: None };
                                s.read(tid, loc, ts);
                                s.write(tid, loc, write, ts + 1, true, origin);
                            }
                        }
                    }
                }
                next.emitted[tid.index()] += 1;
            }
            TransitionLabel::PropTso { tid } => {
                let Memory::Tso(s) = &mut next.memory else { return Err(not_enabled("not a TSO state")) };
                let w = s
                    .buffers
                    .get_mut(tid.index())
                    .and_then(|b| b.pop_front())
                    .ok_or_else(|| not_enabled("store buffer empty"))?;
                s.memory[w.loc.index()] = w.val;
            }
            TransitionLabel::PropRa { tid, msg } => {
                let Memory::Ra(s) = &mut next.memory else { return Err(not_enabled("not a view-based state")) };
                let (loc, ts) = s.find(msg).ok_or_else(|| not_enabled("no such message"))?;
                let v = s.views.get_mut(tid.index()).ok_or_else(|| not_enabled("no such thread"))?;
                if v[loc.index()] as usize >= ts {
                    return Err(not_enabled("message already observed"));
                }
                v[loc.index()] = ts as u32;
            }
        }
        Ok((next, resolved))
    }

    fn loc_count(&self) -> usize {
        match &self.memory {
            Memory::Sc { memory } => memory.len(),
            Memory::Tso(s) => s.memory.len(),
            Memory::Ra(s) => s.messages.len(),
        }
    }
}

/// Apply one transition of `m`'s machine.
pub fn machine_step(s: &MachineState, step: &Step) -> Result<MachineState> {
    s.step(step).map(|(n, _)| n)
}
