//! Oracles and program sources shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memfair_core::consistency::{consistent, ModelId};
use memfair_core::corpus;
use memfair_core::enumerate::{enumerate_with, EnumerationOptions, ExplorationBounds};
use memfair_core::graph::{Behavior, EventId, EventLabel, ExecutionGraph, Loc, ThreadEvent, Value};
use memfair_core::ir::{parse_program, ConcurrentProgram, ThreadProgram};

/// Straight-line litmus programs of the corpus.
pub const LITMUS: &[&str] = &["sb", "mp", "2rmw", "sb_rmws"];

/// Corpus programs with the bounds used to explore them: per-thread event
/// limit and whether threads are cut off at it.
pub const BOUNDED_CORPUS: &[(&str, usize, bool)] = &[
    ("sb", 4, false),
    ("mp", 4, false),
    ("2rmw", 4, false),
    ("sb_rmws", 4, false),
    ("rloop", 5, false),
    ("spinloop", 5, false),
    ("wwrloop", 4, true),
    ("hb_acyclic", 4, true),
    ("spinlock_client", 6, false),
];

pub fn program(name: &str) -> ConcurrentProgram {
    corpus::load(name).unwrap_or_else(|| panic!("no bundled program {name}"))
}

pub fn bounds(max: usize, truncate: bool) -> ExplorationBounds {
    ExplorationBounds { truncate, ..ExplorationBounds::with_max_events(max) }
}

/// Every terminated label sequence of `t`, reads ranging over `domain`.
fn thread_runs(t: &ThreadProgram, domain: &[Value], max: usize) -> Vec<Vec<EventLabel>> {
    fn go(
        t: &ThreadProgram,
        s: &memfair_core::ir::ThreadState,
        domain: &[Value],
        max: usize,
        seq: &mut Vec<EventLabel>,
        out: &mut Vec<Vec<EventLabel>>,
    ) {
        if t.is_terminated(s) {
            out.push(seq.clone());
            return;
        }
        assert!(seq.len() < max, "oracle programs must terminate within {max} events");
        for l in t.enabled_labels(s, domain) {
            let next = t.step(s, &l).expect("enabled label steps");
            seq.push(l);
            go(t, &next, domain, max, seq, out);
            seq.pop();
        }
    }
    let mut out = Vec::new();
    go(t, &t.initial_state().expect("thread starts"), domain, max, &mut Vec::new(), &mut out);
    out
}

/// All complete `m`-consistent graphs of a loop-free `p`, by generating
/// every combination of thread runs, rf choices and mo orders and keeping
/// the well-formed consistent ones.
pub fn naive_graphs(p: &ConcurrentProgram, m: ModelId, max: usize) -> BTreeSet<ExecutionGraph> {
    let domain: Vec<Value> = (0..=8).collect();
    let per_thread: Vec<Vec<Vec<EventLabel>>> = p.threads.iter().map(|t| thread_runs(t, &domain, max)).collect();
    let mut out = BTreeSet::new();
    for runs in per_thread.iter().map(|r| r.iter()).multi_cartesian_product() {
        let ids: Vec<(EventId, EventLabel)> = runs
            .iter()
            .enumerate()
            .flat_map(|(i, run)| {
                run.iter().enumerate().map(move |(sn, l)| {
                    (EventId::thread(memfair_core::graph::ThreadId::from_index(i), sn as u32), *l)
                })
            })
            .collect();
        let writes_to = |loc: Loc| -> Vec<EventId> {
            std::iter::once(EventId::Init(loc))
                .chain(ids.iter().filter(|(_, l)| l.is_write() && l.loc() == loc).map(|(e, _)| *e))
                .collect()
        };
        let value_of = |w: EventId| match w {
            EventId::Init(_) => 0,
            e => ids.iter().find(|(x, _)| *x == e).and_then(|(_, l)| l.val_w()).expect("write"),
        };
        // rf candidates per read, in event order.
        let reads: Vec<(EventId, Vec<EventId>)> = ids
            .iter()
            .filter(|(_, l)| l.is_read())
            .map(|(e, l)| (*e, writes_to(l.loc()).into_iter().filter(|&w| w != *e && Some(value_of(w)) == l.val_r()).collect()))
            .collect();
        let mo_choices: Vec<Vec<Vec<EventId>>> = (0..p.num_locs())
            .map(|l| {
                let ws = writes_to(Loc(l as u16));
                let k = ws.len();
                ws.into_iter().permutations(k).collect()
            })
            .collect();
        let rf_iter = reads.iter().map(|(_, c)| c.iter().copied()).multi_cartesian_product();
        let rf_choices: Vec<Vec<EventId>> = if reads.is_empty() { vec![vec![]] } else { rf_iter.collect() };
        for rf in &rf_choices {
            let threads: Vec<Vec<ThreadEvent>> = runs
                .iter()
                .enumerate()
                .map(|(i, run)| {
                    run.iter()
                        .enumerate()
                        .map(|(sn, &label)| {
                            let id = EventId::thread(memfair_core::graph::ThreadId::from_index(i), sn as u32);
                            let src = reads.iter().position(|(e, _)| *e == id).map(|k| rf[k]);
                            ThreadEvent { label, rf: src }
                        })
                        .collect()
                })
                .collect();
            for mo in mo_choices.iter().map(|c| c.iter().cloned()).multi_cartesian_product() {
                let g = ExecutionGraph::from_parts(p.num_locs(), threads.clone(), mo);
                if g.check_wellformed().is_ok() && consistent(&g, m) {
                    out.insert(g);
                }
            }
        }
    }
    out
}

/// A random loop-free program with at most `max_events` memory accesses
/// over locations x and y, two or three threads, and forward branches.
pub fn random_program(seed: u64, max_events: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threads = rng.gen_range(2..=3);
    let mut budget = max_events;
    let mut src = String::from("locations x y;\n");
    for t in 1..=threads {
        let left = threads - t;
        let n = rng.gen_range(1..=(budget - left).min(3));
        budget -= n;
        let mut body = Vec::new();
        let mut branched = false;
        for k in 0..n {
            let loc = if rng.gen_bool(0.5) { "x" } else { "y" };
            let r = format!("r{t}{k}");
            let instr = match rng.gen_range(0..10) {
                0..=2 => format!("store({loc}, {})", rng.gen_range(1..=2)),
                3..=5 => format!("{r} = load({loc})"),
                6 => format!("{r} = FADD({loc}, 1)"),
                7 => format!("{r} = CAS({loc}, 0, {})", rng.gen_range(1..=2)),
                8 => format!("{r} = SWAP({loc}, {})", rng.gen_range(1..=2)),
                _ => "fence".to_string(),
            };
            let reads = instr.starts_with('r');
            body.push(format!("{instr};"));
            if reads && k + 1 < n && rng.gen_bool(0.3) {
                body.push(format!("if ({r} != 0) goto E;"));
                branched = true;
            }
        }
        if branched {
            body.push("E: halt;".into());
        }
        src.push_str(&format!("thread {t} {{ {} }}\n", body.join(" ")));
    }
    src
}

pub fn parse(src: &str) -> ConcurrentProgram {
    parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

/// Behaviors of complete graphs, and of every consistent graph visited.
pub fn declarative_behaviors(
    p: &ConcurrentProgram,
    m: ModelId,
    b: &ExplorationBounds,
) -> (BTreeSet<Behavior>, BTreeSet<Behavior>) {
    let res = enumerate_with(p, m, b, &EnumerationOptions { collect_prefixes: true }).expect("enumeration");
    let terminated = res.complete().map(|g| g.graph.behavior()).collect();
    let all = res.prefixes.unwrap_or_default().iter().map(|g| g.behavior()).collect();
    (terminated, all)
}

/// Every subset of `g`'s events closed under po and rf, as per-thread cut
/// points.
pub fn all_prefixes(g: &ExecutionGraph) -> Vec<BTreeSet<EventId>> {
    let lens: Vec<usize> = g.threads().map(|(_, e)| e.len()).collect();
    let mut out = Vec::new();
    for cut in lens.iter().map(|&n| 0..=n).multi_cartesian_product() {
        let inside = |e: EventId| match e {
            EventId::Init(_) => true,
            EventId::Thread { tid, sn } => (sn as usize) < cut[tid.index()],
        };
        let closed = g.threads().all(|(tid, evs)| {
            evs.iter().take(cut[tid.index()]).all(|ev| ev.rf.is_none_or(&inside))
        });
        if closed {
            out.push(g.ids().into_iter().filter(|&e| inside(e)).collect());
        }
    }
    out
}
