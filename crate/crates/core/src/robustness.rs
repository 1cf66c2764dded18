//! Robustness against SC on bounded executions, and prefix sampling.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::consistency::{consistent, is_consistent, ModelId, Verdict};
use crate::enumerate::{enumerate_with, Completion, EnumerationOptions, ExplorationBounds};
use crate::error::Result;
use crate::graph::{graph_to_json, Behavior, EventId, ExecutionGraph, ThreadId};
use crate::ir::ConcurrentProgram;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RobustnessVerdict {
    Robust { graphs_checked: usize },
    NonRobust { witness: ExecutionGraph, sc_violation: Verdict },
}

impl RobustnessVerdict {
    pub fn is_robust(&self) -> bool {
        matches!(self, RobustnessVerdict::Robust { .. })
    }

    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        match self {
            RobustnessVerdict::Robust { graphs_checked } => json!({ "robust": true, "graphsChecked": graphs_checked }),
            RobustnessVerdict::NonRobust { witness, sc_violation } => {
                let (axiom, cycle) = match sc_violation {
                    Verdict::Inconsistent { axiom, cycle } => {
                        (Some(axiom.name()), cycle.iter().map(|e| e.display(names).to_string()).collect::<Vec<_>>())
                    }
                    Verdict::Consistent => (None, vec![]),
                };
                json!({
                    "robust": false,
                    "witness": graph_to_json(witness, names),
                    "axiom": axiom,
                    "cycle": cycle,
                })
            }
        }
    }
}

/// Whether every `m`-consistent graph of `p` within `b`, including partial
/// ones, is SC-consistent. A counterexample is shrunk to one none of whose
/// proper prefixes is a counterexample.
pub fn check_finite_robustness(p: &ConcurrentProgram, m: ModelId, b: &ExplorationBounds) -> Result<RobustnessVerdict> {
    let res = enumerate_with(p, m, b, &EnumerationOptions { collect_prefixes: true })?;
    let graphs = res.prefixes.unwrap_or_default();
    let bad = graphs.par_iter().find_first(|g| !consistent(g, ModelId::Sc));
    Ok(match bad {
        None => RobustnessVerdict::Robust { graphs_checked: graphs.len() },
        Some(g) => {
            let witness = minimize_witness(g);
            let sc_violation = is_consistent(&witness, ModelId::Sc);
            RobustnessVerdict::NonRobust { witness, sc_violation }
        }
    })
}

/// Events that can be dropped from `g` leaving a po∪rf-prefix: last events
/// of their thread that nobody reads from.
fn removable(g: &ExecutionGraph) -> Vec<EventId> {
    let read_from: HashSet<EventId> = g.threads().flat_map(|(_, evs)| evs.iter().filter_map(|e| e.rf)).collect();
    g.threads()
        .filter(|(_, evs)| !evs.is_empty())
        .map(|(tid, evs)| EventId::Thread { tid, sn: evs.len() as u32 - 1 })
        .filter(|e| !read_from.contains(e))
        .collect()
}

/// Drop maximal events while the graph stays SC-inconsistent.
pub fn minimize_witness(g: &ExecutionGraph) -> ExecutionGraph {
    let mut cur = g.clone();
    'shrink: loop {
        for e in removable(&cur) {
            let keep: BTreeSet<EventId> = cur.ids().into_iter().filter(|&x| x != e).collect();
            let smaller = cur.restrict_to_prefix(&keep).expect("dropping a maximal event leaves a prefix");
            if !consistent(&smaller, ModelId::Sc) {
                cur = smaller;
                continue 'shrink;
            }
        }
        return cur;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixClosednessReport {
    pub checked: usize,
    /// A sampled prefix that is not consistent.
    pub counterexample: Option<ExecutionGraph>,
}

/// A random po∪rf-closed subset of `g`'s events.
pub fn random_prefix(g: &ExecutionGraph, rng: &mut impl Rng) -> BTreeSet<EventId> {
    let mut cut: Vec<usize> = g.threads().map(|(_, evs)| rng.gen_range(0..=evs.len())).collect();
    loop {
        let mut grew = false;
        for (tid, evs) in g.threads() {
            for e in &evs[..cut[tid.index()]] {
                if let Some(EventId::Thread { tid: src, sn }) = e.rf {
                    if cut[src.index()] <= sn as usize {
                        cut[src.index()] = sn as usize + 1;
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    let mut keep: BTreeSet<EventId> = g.ids().into_iter().filter(|e| e.is_init()).collect();
    for (i, &c) in cut.iter().enumerate() {
        keep.extend((0..c).map(|sn| EventId::Thread { tid: ThreadId::from_index(i), sn: sn as u32 }));
    }
    keep
}

/// Check that `m`-consistency of `g` survives restriction to `samples`
/// random po∪rf-prefixes, plus the empty and the full prefix.
pub fn check_prefix_closedness(g: &ExecutionGraph, m: ModelId, samples: usize, seed: u64) -> Result<PrefixClosednessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: BTreeSet<EventId> = g.ids().into_iter().collect();
    let init: BTreeSet<EventId> = all.iter().copied().filter(|e| e.is_init()).collect();
    let mut prefixes = vec![init, all];
    prefixes.extend((0..samples).map(|_| random_prefix(g, &mut rng)));
    let mut checked = 0;
    for keep in prefixes {
        let h = g.restrict_to_prefix(&keep)?;
        checked += 1;
        if !consistent(&h, m) {
            return Ok(PrefixClosednessReport { checked, counterexample: Some(h) });
        }
    }
    Ok(PrefixClosednessReport { checked, counterexample: None })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferReport {
    pub equal: bool,
    pub only_under_model: BTreeSet<Behavior>,
    pub only_under_sc: BTreeSet<Behavior>,
}

/// Compare the behaviors of complete graphs under `m` and under SC.
pub fn check_robustness_transfer(p: &ConcurrentProgram, m: ModelId, b: &ExplorationBounds) -> Result<TransferReport> {
    let behaviors = |model| -> Result<BTreeSet<Behavior>> {
        let res = enumerate_with(p, model, b, &EnumerationOptions::default())?;
        Ok(res.graphs.iter().filter(|g| g.completion == Completion::Complete).map(|g| g.graph.behavior()).collect())
    };
    let weak = behaviors(m)?;
    let sc = behaviors(ModelId::Sc)?;
    Ok(TransferReport {
        equal: weak == sc,
        only_under_model: weak.difference(&sc).cloned().collect(),
        only_under_sc: sc.difference(&weak).cloned().collect(),
    })
}
