//! JSON and DOT renderings of execution graphs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::event::{EventId, EventLabel, Kind, Loc, ThreadId, Value};
use super::execution::{ExecutionGraph, ThreadEvent};
use super::relation::Relation;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonEvent {
    pub tid: Option<u32>,
    pub sn: Option<u32>,
    pub kind: Kind,
    pub loc: String,
    #[serde(rename = "valR")]
    pub val_r: Option<Value>,
    #[serde(rename = "valW")]
    pub val_w: Option<Value>,
}

/// Wire form of a graph. Edges refer to positions in `events`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub events: Vec<JsonEvent>,
    pub rf: Vec<[usize; 2]>,
    pub mo: Vec<[usize; 2]>,
}

fn loc_name(names: &[String], l: Loc) -> String {
    names.get(l.index()).cloned().unwrap_or_else(|| format!("#{}", l.0))
}

pub fn graph_to_json(g: &ExecutionGraph, names: &[String]) -> GraphJson {
    let ids = g.ids();
    let pos: BTreeMap<EventId, usize> = ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let events = ids
        .iter()
        .map(|&e| {
            let lab = g.label(e);
            JsonEvent {
                tid: e.tid().map(|t| t.0),
                sn: e.sn(),
                kind: lab.kind(),
                loc: loc_name(names, lab.loc()),
                val_r: lab.val_r(),
                val_w: lab.val_w(),
            }
        })
        .collect();
    let rf = ids
        .iter()
        .filter_map(|&e| g.rf_of(e).map(|w| [pos[&w], pos[&e]]))
        .collect();
    let mut mo = Vec::new();
    for order in g.mo_all() {
        for (k, a) in order.iter().enumerate() {
            for b in &order[k + 1..] {
                mo.push([pos[a], pos[b]]);
            }
        }
    }
    GraphJson { events, rf, mo }
}

/// Parse the wire form. Locations are named by the init events, in the
/// order they appear. Returns the graph and the location names.
pub fn graph_from_json(j: &GraphJson) -> Result<(ExecutionGraph, Vec<String>)> {
    let bad = |m: String| Error::MalformedGraph(m);
    let mut names: Vec<String> = Vec::new();
    for e in &j.events {
        if e.tid.is_none() {
            if e.sn.is_some() {
                return Err(bad("init events must have null sn".into()));
            }
            if names.contains(&e.loc) {
                return Err(bad(format!("two init events for location {}", e.loc)));
            }
            names.push(e.loc.clone());
        }
    }
    let loc_of = |name: &str| -> Result<Loc> {
        names
            .iter()
            .position(|n| n == name)
            .map(|i| Loc(i as u16))
            .ok_or_else(|| bad(format!("location {name} has no init event")))
    };
    let mut ids = Vec::with_capacity(j.events.len());
    let mut by_thread: BTreeMap<ThreadId, BTreeMap<u32, EventLabel>> = BTreeMap::new();
    for e in &j.events {
        let loc = loc_of(&e.loc)?;
        let label = match (e.kind, e.val_r, e.val_w) {
            (Kind::R, Some(val), None) => EventLabel::Read { loc, val },
            (Kind::W, None, Some(val)) => EventLabel::Write { loc, val },
            (Kind::Rmw, Some(read), Some(write)) => EventLabel::Rmw { loc, read, write },
            _ => return Err(bad(format!("event values do not match kind {}", e.kind.as_str()))),
        };
        match (e.tid, e.sn) {
            (None, _) => {
                if label != (EventLabel::Write { loc, val: 0 }) {
                    return Err(bad(format!("init event of {} must be W({},0)", e.loc, e.loc)));
                }
                ids.push(EventId::Init(loc));
            }
            (Some(t), Some(sn)) if t >= 1 => {
                let tid = ThreadId(t);
                if by_thread.entry(tid).or_default().insert(sn, label).is_some() {
                    return Err(bad(format!("duplicate event {t}.{sn}")));
                }
                ids.push(EventId::thread(tid, sn));
            }
            _ => return Err(bad("thread events need tid >= 1 and a serial number".into())),
        }
    }
    let num_threads = by_thread.keys().last().map(|t| t.0 as usize).unwrap_or(0);
    let mut threads: Vec<Vec<ThreadEvent>> = vec![Vec::new(); num_threads];
    for (tid, evs) in &by_thread {
        for (k, (sn, lab)) in evs.iter().enumerate() {
            if *sn as usize != k {
                return Err(bad(format!("thread {tid} serial numbers have a gap before {sn}")));
            }
            threads[tid.index()].push(ThreadEvent { label: *lab, rf: None });
        }
    }
    let id_at = |i: usize| ids.get(i).copied().ok_or_else(|| bad(format!("edge index {i} out of range")));
    for &[w, r] in &j.rf {
        let (w, r) = (id_at(w)?, id_at(r)?);
        let EventId::Thread { tid, sn } = r else {
            return Err(bad("init events cannot read".into()));
        };
        let slot = &mut threads[tid.index()][sn as usize].rf;
        if slot.is_some() {
            return Err(bad(format!("{r} has two rf sources")));
        }
        *slot = Some(w);
    }
    let n = ids.len();
    let mut mo_rel = Relation::empty(n);
    for &[a, b] in &j.mo {
        id_at(a)?;
        id_at(b)?;
        mo_rel.insert(a, b);
    }
    let mo_rel = mo_rel.transitive_closure();
    if !mo_rel.is_irreflexive() {
        return Err(bad("mo is cyclic".into()));
    }
    let mut mo = vec![Vec::new(); names.len()];
    for (l, order) in mo.iter_mut().enumerate() {
        let loc = Loc(l as u16);
        let mut writes: Vec<usize> = (0..n)
            .filter(|&i| {
                let lab = match ids[i] {
                    EventId::Init(x) => EventLabel::Write { loc: x, val: 0 },
                    EventId::Thread { tid, sn } => by_thread[&tid][&sn],
                };
                lab.is_write() && lab.loc() == loc
            })
            .collect();
        for (k, &a) in writes.iter().enumerate() {
            for &b in &writes[k + 1..] {
                if !mo_rel.contains(a, b) && !mo_rel.contains(b, a) {
                    return Err(bad(format!("mo does not order {} and {}", ids[a], ids[b])));
                }
            }
        }
        let members = writes.clone();
        writes.sort_by_key(|&w| mo_rel.predecessors(w).filter(|p| members.contains(p)).count());
        *order = writes.into_iter().map(|i| ids[i]).collect();
    }
    for (a, b) in mo_rel.pairs() {
        if !mo.iter().any(|o| o.contains(&ids[a]) && o.contains(&ids[b])) {
            return Err(bad(format!("mo relates {} and {}, which are not writes to one location", ids[a], ids[b])));
        }
    }
    let g = ExecutionGraph::from_parts(names.len(), threads, mo);
    g.check_wellformed().map_err(bad)?;
    Ok((g, names))
}

/// DOT rendering: po solid, rf/mo/fr as labelled coloured edges. Only
/// immediate mo edges and fr edges to the immediate mo-successor of the
/// source are drawn; the rest follow by transitivity.
pub fn graph_to_dot(g: &ExecutionGraph, names: &[String]) -> String {
    let mut out = String::from("digraph execution {\n  rankdir=LR;\n  node [shape=plaintext];\n");
    let node = |e: EventId| match e {
        EventId::Init(l) => format!("init_{}", l.0),
        EventId::Thread { tid, sn } => format!("e{}_{}", tid.0, sn),
    };
    out.push_str("  subgraph cluster_init { label=\"init\"; style=dotted;\n");
    for l in 0..g.num_locs() {
        let e = EventId::Init(Loc(l as u16));
        let _ = writeln!(out, "    {} [label=\"{}\"];", node(e), g.label(e).display(names));
    }
    out.push_str("  }\n");
    for (tid, evs) in g.threads() {
        if evs.is_empty() {
            continue;
        }
        let _ = writeln!(out, "  subgraph cluster_t{} {{ label=\"thread {}\"; style=dotted;", tid.0, tid.0);
        for (sn, ev) in evs.iter().enumerate() {
            let e = EventId::thread(tid, sn as u32);
            let _ = writeln!(out, "    {} [label=\"{}\"];", node(e), ev.label.display(names));
        }
        for sn in 1..evs.len() {
            let (a, b) = (EventId::thread(tid, sn as u32 - 1), EventId::thread(tid, sn as u32));
            let _ = writeln!(out, "    {} -> {};", node(a), node(b));
        }
        out.push_str("  }\n");
    }
    for e in g.ids() {
        if let Some(w) = g.rf_of(e) {
            let _ = writeln!(out, "  {} -> {} [label=\"rf\", color=darkgreen, fontcolor=darkgreen, constraint=false];", node(w), node(e));
            let order = g.mo(g.label(w).loc());
            if let Some(p) = order.iter().position(|&x| x == w) {
                if let Some(&next) = order.get(p + 1) {
                    if next != e {
                        let _ = writeln!(out, "  {} -> {} [label=\"fr\", color=purple, fontcolor=purple, style=dashed, constraint=false];", node(e), node(next));
                    }
                }
            }
        }
    }
    for order in g.mo_all() {
        for pair in order.windows(2) {
            let _ = writeln!(out, "  {} -> {} [label=\"mo\", color=orange, fontcolor=orange, constraint=false];", node(pair[0]), node(pair[1]));
        }
    }
    out.push_str("}\n");
    out
}
