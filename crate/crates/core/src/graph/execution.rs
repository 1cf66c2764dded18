use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::event::{EventId, EventLabel, Loc, ThreadId};
use super::relation::Relation;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadEvent {
    pub label: EventLabel,
    /// Write this event reads from; `None` for plain writes.
    pub rf: Option<EventId>,
}

/// A finite execution graph. Events of each thread are stored by serial
/// number, so the representation is canonical: two graphs are equal exactly
/// when they have the same events, rf and mo.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExecutionGraph {
    num_locs: usize,
    threads: Vec<Vec<ThreadEvent>>,
    /// Per location, the writes in modification order (init included).
    mo: Vec<Vec<EventId>>,
}

impl ExecutionGraph {
    /// The graph holding only the initialisation writes.
    pub fn init_only(num_locs: usize, num_threads: usize) -> Self {
        ExecutionGraph {
            num_locs,
            threads: vec![Vec::new(); num_threads],
            mo: (0..num_locs).map(|l| vec![EventId::Init(Loc(l as u16))]).collect(),
        }
    }

    /// Assemble a graph from raw parts. The result may be ill-formed; use
    /// [`check_wellformed`](Self::check_wellformed) before trusting it.
    pub fn from_parts(num_locs: usize, threads: Vec<Vec<ThreadEvent>>, mo: Vec<Vec<EventId>>) -> Self {
        ExecutionGraph { num_locs, threads, mo }
    }

    pub fn num_locs(&self) -> usize {
        self.num_locs
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn thread(&self, tid: ThreadId) -> &[ThreadEvent] {
        self.threads.get(tid.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn threads(&self) -> impl Iterator<Item = (ThreadId, &[ThreadEvent])> {
        self.threads.iter().enumerate().map(|(i, t)| (ThreadId::from_index(i), t.as_slice()))
    }

    pub fn mo(&self, loc: Loc) -> &[EventId] {
        &self.mo[loc.index()]
    }

    pub fn mo_all(&self) -> &[Vec<EventId>] {
        &self.mo
    }

    /// Number of events, init included.
    pub fn len(&self) -> usize {
        self.num_locs + self.threads.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn non_init_count(&self) -> usize {
        self.len() - self.num_locs
    }

    pub fn contains(&self, id: EventId) -> bool {
        match id {
            EventId::Init(l) => l.index() < self.num_locs,
            EventId::Thread { tid, sn } => (sn as usize) < self.thread(tid).len(),
        }
    }

    pub fn label(&self, id: EventId) -> EventLabel {
        match id {
            EventId::Init(loc) => EventLabel::Write { loc, val: 0 },
            EventId::Thread { tid, sn } => self.threads[tid.index()][sn as usize].label,
        }
    }

    pub fn rf_of(&self, id: EventId) -> Option<EventId> {
        match id {
            EventId::Init(_) => None,
            EventId::Thread { tid, sn } => self.threads[tid.index()][sn as usize].rf,
        }
    }

    /// All event identities in canonical order.
    pub fn ids(&self) -> Vec<EventId> {
        let mut out: Vec<EventId> = (0..self.num_locs).map(|l| EventId::Init(Loc(l as u16))).collect();
        for (tid, evs) in self.threads() {
            out.extend((0..evs.len()).map(|sn| EventId::thread(tid, sn as u32)));
        }
        out
    }

    /// Append an event to `tid`. `mo_pos` is the position in the location's
    /// modification order for writes; it is ignored for plain reads.
    pub fn push_event(&mut self, tid: ThreadId, label: EventLabel, rf: Option<EventId>, mo_pos: Option<usize>) -> EventId {
        let t = tid.index();
        if t >= self.threads.len() {
            self.threads.resize(t + 1, Vec::new());
        }
        let id = EventId::thread(tid, self.threads[t].len() as u32);
        self.threads[t].push(ThreadEvent { label, rf });
        if label.is_write() {
            let order = &mut self.mo[label.loc().index()];
            let pos = mo_pos.unwrap_or(order.len()).min(order.len());
            order.insert(pos, id);
        }
        id
    }

    /// Remove the last event of `tid`, which must not be read by any other
    /// event.
    pub fn pop_event(&mut self, tid: ThreadId) -> Option<ThreadEvent> {
        let t = tid.index();
        let ev = self.threads.get_mut(t)?.pop()?;
        let id = EventId::thread(tid, self.threads[t].len() as u32);
        if ev.label.is_write() {
            self.mo[ev.label.loc().index()].retain(|&w| w != id);
        }
        Some(ev)
    }

    /// Position of `w` in the modification order of its location.
    pub fn mo_position(&self, w: EventId) -> Option<usize> {
        let loc = self.label(w).loc();
        self.mo[loc.index()].iter().position(|&x| x == w)
    }

    /// The mo-greatest write to `loc`.
    pub fn mo_maximal(&self, loc: Loc) -> EventId {
        *self.mo[loc.index()].last().expect("every location has an init write")
    }

    pub fn behavior(&self) -> Behavior {
        Behavior::from_threads(
            self.threads()
                .map(|(tid, evs)| (tid, evs.iter().map(|e| e.label).collect())),
        )
    }

    pub fn index(&self) -> GraphIndex {
        GraphIndex::new(self)
    }

    /// Check every well-formedness condition, reporting the first violation.
    pub fn check_wellformed(&self) -> std::result::Result<(), String> {
        if self.mo.len() != self.num_locs {
            return Err("mo must have one order per location".into());
        }
        for (tid, evs) in self.threads() {
            for (sn, ev) in evs.iter().enumerate() {
                let id = EventId::thread(tid, sn as u32);
                if ev.label.loc().index() >= self.num_locs {
                    return Err(format!("event {id} uses an undeclared location"));
                }
                match (ev.label.is_read(), ev.rf) {
                    (true, None) => {
                        return Err(format!("read {id} has no rf source: E ∩ R ⊆ codom(rf) violated"))
                    }
                    (false, Some(_)) => return Err(format!("write {id} cannot be the target of rf")),
                    (false, None) => {}
                    (true, Some(w)) => {
                        if !self.contains(w) {
                            return Err(format!("rf source of {id} is not an event of the graph"));
                        }
                        let wl = self.label(w);
                        if !wl.is_write() {
                            return Err(format!("rf source {w} of {id} is not a write"));
                        }
                        if wl.loc() != ev.label.loc() {
                            return Err(format!("rf edge {w} -> {id} relates different locations"));
                        }
                        if wl.val_w() != ev.label.val_r() {
                            return Err(format!("rf edge {w} -> {id} has mismatching values"));
                        }
                    }
                }
            }
        }
        for (l, order) in self.mo.iter().enumerate() {
            let loc = Loc(l as u16);
            let mut seen = BTreeSet::new();
            for &w in order {
                if !self.contains(w) {
                    return Err(format!("mo mentions unknown event {w}"));
                }
                let lab = self.label(w);
                if !lab.is_write() || lab.loc() != loc {
                    return Err(format!("mo order of location #{l} contains {w}, which is not a write to it"));
                }
                if !seen.insert(w) {
                    return Err(format!("mo order of location #{l} repeats {w}"));
                }
            }
            let expected: BTreeSet<EventId> = self
                .ids()
                .into_iter()
                .filter(|&e| {
                    let lab = self.label(e);
                    lab.is_write() && lab.loc() == loc
                })
                .collect();
            if expected != seen {
                return Err(format!("mo order of location #{l} does not cover all its writes"));
            }
        }
        Ok(())
    }

    /// The po∪rf-prefix of `self` on `keep`. Fails unless `keep` holds
    /// every init event and is downward closed under po and rf.
    pub fn restrict_to_prefix(&self, keep: &BTreeSet<EventId>) -> Result<ExecutionGraph> {
        for l in 0..self.num_locs {
            if !keep.contains(&EventId::Init(Loc(l as u16))) {
                return Err(Error::NotPrefixClosed(format!("missing init event of location #{l}")));
            }
        }
        let mut threads = Vec::with_capacity(self.threads.len());
        for (tid, evs) in self.threads() {
            let mut kept = Vec::new();
            let mut gap = false;
            for (sn, ev) in evs.iter().enumerate() {
                let id = EventId::thread(tid, sn as u32);
                if keep.contains(&id) {
                    if gap {
                        return Err(Error::NotPrefixClosed(format!("{id} kept but a po-predecessor was dropped")));
                    }
                    if let Some(w) = ev.rf {
                        if !keep.contains(&w) {
                            return Err(Error::NotPrefixClosed(format!("{id} kept but its rf source {w} was dropped")));
                        }
                    }
                    kept.push(ev.clone());
                } else {
                    gap = true;
                }
            }
            threads.push(kept);
        }
        for id in keep {
            if !self.contains(*id) {
                return Err(Error::NotPrefixClosed(format!("{id} is not an event of the graph")));
            }
        }
        let mo = self
            .mo
            .iter()
            .map(|order| order.iter().copied().filter(|w| keep.contains(w)).collect())
            .collect();
        Ok(ExecutionGraph { num_locs: self.num_locs, threads, mo })
    }
}

/// Per-thread label sequences. Threads with no events are not stored, so
/// equality ignores them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Behavior(BTreeMap<ThreadId, Vec<EventLabel>>);

impl Behavior {
    pub fn from_threads(threads: impl IntoIterator<Item = (ThreadId, Vec<EventLabel>)>) -> Self {
        Behavior(threads.into_iter().filter(|(_, v)| !v.is_empty()).collect())
    }

    pub fn thread(&self, tid: ThreadId) -> &[EventLabel] {
        self.0.get(&tid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn threads(&self) -> impl Iterator<Item = (ThreadId, &[EventLabel])> {
        self.0.iter().map(|(t, v)| (*t, v.as_slice()))
    }

    pub fn push(&mut self, tid: ThreadId, label: EventLabel) {
        self.0.entry(tid).or_default().push(label);
    }

    pub fn total_events(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    /// The event set extracted from the behavior over `num_locs` locations.
    pub fn events(&self, num_locs: usize) -> EventSet {
        let mut events = BTreeMap::new();
        for l in 0..num_locs {
            let loc = Loc(l as u16);
            events.insert(EventId::Init(loc), EventLabel::Write { loc, val: 0 });
        }
        for (tid, labels) in self.threads() {
            for (sn, &lab) in labels.iter().enumerate() {
                events.insert(EventId::thread(tid, sn as u32), lab);
            }
        }
        EventSet(events)
    }
}

/// A finite set of labelled events.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EventSet(pub BTreeMap<EventId, EventLabel>);

impl EventSet {
    /// Contains init writes of value 0, unique identities and serial numbers
    /// without gaps.
    pub fn check_wellformed(&self, num_locs: usize) -> std::result::Result<(), String> {
        for l in 0..num_locs {
            let loc = Loc(l as u16);
            match self.0.get(&EventId::Init(loc)) {
                Some(EventLabel::Write { loc: l2, val: 0 }) if *l2 == loc => {}
                Some(_) => return Err(format!("init event of location #{l} is not W(_,0)")),
                None => return Err(format!("init event of location #{l} missing")),
            }
        }
        for id in self.0.keys() {
            if let EventId::Thread { tid, sn } = *id {
                if sn > 0 && !self.0.contains_key(&EventId::thread(tid, sn - 1)) {
                    return Err(format!("{id} present but its predecessor in thread {tid} is missing"));
                }
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.0.keys().copied()
    }
}

/// Dense indexing of a graph's events plus the base relations.
#[derive(Clone, Debug)]
pub struct GraphIndex {
    pub ids: Vec<EventId>,
    pub labels: Vec<EventLabel>,
    pos: HashMap<EventId, usize>,
    pub po: Relation,
    pub rf: Relation,
    pub mo: Relation,
    pub fr: Relation,
    pub same_loc: Relation,
}

impl GraphIndex {
    pub fn new(g: &ExecutionGraph) -> Self {
        let ids = g.ids();
        let n = ids.len();
        let labels: Vec<EventLabel> = ids.iter().map(|&e| g.label(e)).collect();
        let pos: HashMap<EventId, usize> = ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let po = Relation::from_fn(n, |a, b| ids[a].po_before(&ids[b]));
        let mut rf = Relation::empty(n);
        for (i, &e) in ids.iter().enumerate() {
            if let Some(w) = g.rf_of(e) {
                if let Some(&j) = pos.get(&w) {
                    rf.insert(j, i);
                }
            }
        }
        let mut mo = Relation::empty(n);
        for order in g.mo_all() {
            for (k, a) in order.iter().enumerate() {
                for b in &order[k + 1..] {
                    if let (Some(&i), Some(&j)) = (pos.get(a), pos.get(b)) {
                        mo.insert(i, j);
                    }
                }
            }
        }
        let fr = rf.inverse().compose(&mo).difference(&Relation::identity(n));
        let same_loc = Relation::from_fn(n, |a, b| labels[a].loc() == labels[b].loc());
        GraphIndex { ids, labels, pos, po, rf, mo, fr, same_loc }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn pos(&self, id: EventId) -> Option<usize> {
        self.pos.get(&id).copied()
    }

    pub fn mask(&self, f: impl Fn(EventId, &EventLabel) -> bool) -> Vec<bool> {
        self.ids.iter().zip(&self.labels).map(|(&e, l)| f(e, l)).collect()
    }

    pub fn non_init(&self) -> Vec<bool> {
        self.mask(|e, _| !e.is_init())
    }
}

/// `fr = (rf⁻¹ ; mo) \ id` for `g`.
pub fn from_read(g: &ExecutionGraph) -> Relation {
    g.index().fr
}
