//! Declarative consistency for SC, TSO, RA and StrongCOH.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{EventId, ExecutionGraph, GraphIndex, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "TSO")]
    Tso,
    #[serde(rename = "RA")]
    Ra,
    #[serde(rename = "StrongCOH")]
    StrongCoh,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Sc, ModelId::Tso, ModelId::Ra, ModelId::StrongCoh];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Sc => "SC",
            ModelId::Tso => "TSO",
            ModelId::Ra => "RA",
            ModelId::StrongCoh => "StrongCOH",
        }
    }

    /// The acyclicity conditions defining the model, checked in this order.
    pub fn axioms(self) -> &'static [Axiom] {
        match self {
            ModelId::Sc => &[Axiom::HbSc],
            ModelId::Tso => &[Axiom::HbTso, Axiom::ScLoc],
            ModelId::Ra => &[Axiom::RaLoc],
            ModelId::StrongCoh => &[Axiom::HbRa, Axiom::ScLoc],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(ModelId::Sc),
            "tso" => Ok(ModelId::Tso),
            "ra" => Ok(ModelId::Ra),
            "strongcoh" | "scoh" => Ok(ModelId::StrongCoh),
            _ => Err(format!("unknown model `{s}` (expected sc, tso, ra or strongcoh)")),
        }
    }
}

/// A relation that must be acyclic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    /// `po ∪ rf ∪ mo ∪ fr`
    HbSc,
    /// `ppo ∪ rfe ∪ mo ∪ fr`
    HbTso,
    /// `po|loc ∪ rf ∪ mo ∪ fr`
    ScLoc,
    /// `po ∪ rf`
    HbRa,
    /// `hb_ra|loc ∪ rf ∪ mo ∪ fr`
    RaLoc,
}

impl Axiom {
    pub fn name(self) -> &'static str {
        match self {
            Axiom::HbSc => "hb_sc",
            Axiom::HbTso => "hb_tso",
            Axiom::ScLoc => "sc_loc",
            Axiom::HbRa => "hb_ra",
            Axiom::RaLoc => "ra_loc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent { axiom: Axiom, cycle: Vec<EventId> },
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent)
    }
}

/// The derived relations, each already transitively closed.
#[derive(Clone, Debug)]
pub struct DerivedRelations {
    pub hb_sc: Relation,
    pub rfe: Relation,
    pub ppo: Relation,
    pub hb_tso: Relation,
    pub sc_loc: Relation,
    pub hb_ra: Relation,
    pub ra_loc: Relation,
}

/// `rf \ po`
pub fn rfe(idx: &GraphIndex) -> Relation {
    idx.rf.difference(&idx.po)
}

/// `po \ ((W\RMW) × (R\RMW))`
pub fn ppo(idx: &GraphIndex) -> Relation {
    let plain_w = idx.mask(|_, l| l.is_write() && !l.is_rmw());
    let plain_r = idx.mask(|_, l| l.is_read() && !l.is_rmw());
    idx.po.difference(&Relation::from_fn(idx.len(), |a, b| plain_w[a] && plain_r[b]))
}

fn com(idx: &GraphIndex) -> Relation {
    idx.rf.union(&idx.mo).union(&idx.fr)
}

/// The step relation whose transitive closure is `axiom`.
pub fn axiom_base(idx: &GraphIndex, axiom: Axiom) -> Relation {
    match axiom {
        Axiom::HbSc => idx.po.union(&com(idx)),
        Axiom::HbTso => ppo(idx).union(&rfe(idx)).union(&idx.mo).union(&idx.fr),
        Axiom::ScLoc => idx.po.intersection(&idx.same_loc).union(&com(idx)),
        Axiom::HbRa => idx.po.union(&idx.rf),
        Axiom::RaLoc => {
            let hb = idx.po.union(&idx.rf).transitive_closure();
            hb.intersection(&idx.same_loc).union(&com(idx))
        }
    }
}

pub fn derived(g: &ExecutionGraph) -> DerivedRelations {
    let idx = g.index();
    DerivedRelations {
        hb_sc: axiom_base(&idx, Axiom::HbSc).transitive_closure(),
        rfe: rfe(&idx),
        ppo: ppo(&idx),
        hb_tso: axiom_base(&idx, Axiom::HbTso).transitive_closure(),
        sc_loc: axiom_base(&idx, Axiom::ScLoc).transitive_closure(),
        hb_ra: axiom_base(&idx, Axiom::HbRa).transitive_closure(),
        ra_loc: axiom_base(&idx, Axiom::RaLoc).transitive_closure(),
    }
}

/// Consistency of `g` under `m`, with the lexicographically least cycle of
/// minimal length when the first failing axiom is violated.
pub fn is_consistent(g: &ExecutionGraph, m: ModelId) -> Verdict {
    check_index(&g.index(), m)
}

pub fn check_index(idx: &GraphIndex, m: ModelId) -> Verdict {
    for &axiom in m.axioms() {
        let base = axiom_base(idx, axiom);
        if !base.is_acyclic() {
            let cycle = least_minimal_cycle(&base).expect("cyclic relation has a cycle");
            return Verdict::Inconsistent { axiom, cycle: cycle.into_iter().map(|i| idx.ids[i]).collect() };
        }
    }
    Verdict::Consistent
}

/// Cheap yes/no check used on hot paths.
pub fn consistent(g: &ExecutionGraph, m: ModelId) -> bool {
    let idx = g.index();
    m.axioms().iter().all(|&a| axiom_base(&idx, a).is_acyclic())
}

/// Among the shortest cycles of `r`, the one whose rotation starting at its
/// least element is lexicographically least.
pub fn least_minimal_cycle(r: &Relation) -> Option<Vec<usize>> {
    let n = r.size();
    // dist_to[v]: length of the shortest path v ->* s inside nodes >= s.
    let dist_to = |s: usize| -> Vec<Option<usize>> {
        let mut d = vec![None; n];
        d[s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for u in r.predecessors(v) {
                if u >= s && d[u].is_none() {
                    d[u] = Some(d[v].unwrap() + 1);
                    q.push_back(u);
                }
            }
        }
        d
    };
    let mut best: Option<(usize, usize, Vec<Option<usize>>)> = None;
    for s in 0..n {
        let d = dist_to(s);
        let len = r.successors(s).filter(|&v| v >= s).filter_map(|v| d[v]).min().map(|k| k + 1);
        if let Some(len) = len {
            if best.as_ref().is_none_or(|(l, _, _)| len < *l) {
                best = Some((len, s, d));
            }
        }
    }
    let (len, s, d) = best?;
    let mut cycle = vec![s];
    let mut cur = s;
    for step in 1..len {
        let remaining = len - step;
        cur = r
            .successors(cur)
            .filter(|&v| v > s && d[v] == Some(remaining))
            .min()
            .expect("distance labels guarantee a successor");
        cycle.push(cur);
    }
    Some(cycle)
}
