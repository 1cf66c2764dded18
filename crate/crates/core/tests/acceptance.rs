//! Acceptance runner: one PASS/FAIL line per criterion, with timing limits
//! enforced. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use memfair_core::consistency::{consistent, derived, ModelId};
use memfair_core::correspondence::{graph_to_fair_trace, trace_to_graph};
use memfair_core::enumerate::{
    check_outcome, enumerate_consistent_graphs, enumerate_with, EnumerationOptions, ExplorationBounds,
};
use memfair_core::graph::{
    check_n_total, check_prefix_finite_bounded, from_read, EventId, EventLabel, ExecutionGraph, Loc, ThreadId,
};
use memfair_core::ir::{Assertion, ConcurrentProgram};
use memfair_core::operational::{explore_behaviors, run_program};
use memfair_core::robustness::{check_finite_robustness, check_robustness_transfer, RobustnessVerdict};
use memfair_core::termination::{
    analyze_termination, check_lock_progress, TerminationVerdict, DEFAULT_TERMINATION_EVENTS,
};

/// Every bundled program with the bounds used for exhaustive checks.
const FULL_CORPUS: &[(&str, usize, bool)] = &[
    ("sb", 4, false),
    ("mp", 4, false),
    ("2rmw", 4, false),
    ("sb_rmws", 4, false),
    ("rloop", 8, false),
    ("spinloop", 8, false),
    ("wwrloop", 6, true),
    ("hb_acyclic", 6, true),
    ("spinlock_client", 8, false),
    ("spinlock_client3", 5, false),
    ("ticketlock_client", 6, true),
    ("mcs_client", 5, true),
    ("mcs_client_nofence", 5, true),
];

type Check = Result<String, String>;

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn criterion_litmus() -> Check {
    let matrix: &[(&str, &str, [bool; 4])] = &[
        ("sb", "a=0 && b=0", [false, true, true, true]),
        ("mp", "a=1 && b=0", [false, false, false, true]),
        ("2rmw", "a=0 && b=0", [false, false, false, false]),
        ("sb_rmws", "a=0 && b=0", [false, false, false, true]),
    ];
    let limit = Duration::from_secs(5);
    let mut slowest = Duration::ZERO;
    let mut n = 0;
    for &(name, outcome, expected) in matrix {
        let p = common::program(name);
        let a = Assertion::parse(outcome, &p).map_err(|e| e.to_string())?;
        for (m, want) in ModelId::ALL.into_iter().zip(expected) {
            let t = Instant::now();
            let v = check_outcome(&p, m, &a, &ExplorationBounds::default()).map_err(|e| e.to_string())?;
            let d = t.elapsed();
            slowest = slowest.max(d);
            if v.allowed != want {
                return Err(format!("{name} {outcome} under {m}: allowed={} expected {want}", v.allowed));
            }
            if d > limit {
                return Err(format!("{name} under {m} took {}", secs(d)));
            }
            n += 1;
        }
    }
    Ok(format!("{n} verdicts as expected, slowest {} (limit 5s)", secs(slowest)))
}

/// Thread 1's last read is R(a_locked,1) from its own mo-maximal write,
/// which happens before thread 2's W(a_locked,0) yet follows it in mo.
fn mcs_witness_shape(p: &ConcurrentProgram, g: &ExecutionGraph) -> Result<(), String> {
    let a_locked = p.loc("a_locked").ok_or("no a_locked")?;
    let evs = g.thread(ThreadId(1));
    let stuck = EventId::thread(ThreadId(1), evs.len().checked_sub(1).ok_or("thread 1 is empty")? as u32);
    let mine = EventId::thread(ThreadId(1), 0);
    if g.label(stuck) != (EventLabel::Read { loc: a_locked, val: 1 }) || g.rf_of(stuck) != Some(mine) {
        return Err(format!("stuck read is {:?}", g.label(stuck)));
    }
    if g.mo_maximal(a_locked) != mine {
        return Err("stuck read does not read the mo-maximal write".into());
    }
    let release = g
        .thread(ThreadId(2))
        .iter()
        .position(|e| e.label == EventLabel::Write { loc: a_locked, val: 0 })
        .map(|sn| EventId::thread(ThreadId(2), sn as u32))
        .ok_or("thread 2 never releases a_locked")?;
    let d = derived(g);
    let idx = g.index();
    let (i, j) = (idx.pos(mine).unwrap(), idx.pos(release).unwrap());
    if !d.hb_ra.contains(i, j) || d.sc_loc.contains(i, j) || consistent(g, ModelId::Ra) {
        return Err("witness lacks the po;rf;po ordering against mo".into());
    }
    Ok(())
}

fn criterion_termination() -> Check {
    let limit = Duration::from_secs(60);
    let b = ExplorationBounds::with_max_events(DEFAULT_TERMINATION_EVENTS);
    let mut cases: Vec<(String, ModelId, &str)> = Vec::new();
    for name in ["spinloop", "rloop", "spinlock_client", "spinlock_client3"] {
        for m in ModelId::ALL {
            cases.push((name.into(), m, "AllSpinloopsTerminate"));
        }
    }
    for rounds in 1..=2 {
        for m in ModelId::ALL {
            cases.push((format!("ticketlock_client@{rounds}"), m, "AllSpinloopsTerminate"));
        }
    }
    for m in [ModelId::Sc, ModelId::Tso, ModelId::Ra] {
        cases.push(("mcs_client".into(), m, "AllSpinloopsTerminate"));
    }
    cases.push(("mcs_client_nofence".into(), ModelId::StrongCoh, "MayDiverge"));
    for m in ModelId::ALL {
        cases.push(("wwrloop".into(), m, "Unsupported"));
    }
    let mut slowest = Duration::ZERO;
    for (name, m, want) in &cases {
        let t = Instant::now();
        let v = match name.split_once('@') {
            Some((prog, r)) => check_lock_progress(&common::program(prog), *m, r.parse().unwrap()),
            None => analyze_termination(&common::program(name), *m, &b),
        }
        .map_err(|e| format!("{name} under {m}: {e}"))?;
        let d = t.elapsed();
        slowest = slowest.max(d);
        if v.outcome() != *want {
            return Err(format!("{name} under {m}: {} expected {want}", v.outcome()));
        }
        if d > limit {
            return Err(format!("{name} under {m} took {}", secs(d)));
        }
        if let TerminationVerdict::MayDiverge { witness, .. } = &v {
            mcs_witness_shape(&common::program(name), witness).map_err(|e| format!("{name}: {e}"))?;
        }
    }
    Ok(format!("{} verdicts as expected, MCS witness shape ok, slowest {} (limit 60s)", cases.len(), secs(slowest)))
}

fn criterion_equivalence() -> Check {
    let limit = Duration::from_secs(600);
    let t = Instant::now();
    let mut n = 0;
    for &(name, max, truncate) in FULL_CORPUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            let op = explore_behaviors(&p, m, max).map_err(|e| e.to_string())?;
            let (terminated, all) = common::declarative_behaviors(&p, m, &common::bounds(max, truncate));
            if op.terminated != terminated {
                return Err(format!(
                    "{name} under {m}: terminated behaviors differ ({} operational, {} declarative)",
                    op.terminated.len(),
                    terminated.len()
                ));
            }
            if op.all != all {
                return Err(format!("{name} under {m}: reachable behaviors differ"));
            }
            n += 1;
        }
    }
    let d = t.elapsed();
    if d > limit {
        return Err(format!("took {}", secs(d)));
    }
    Ok(format!("{n} program/model pairs with equal behavior sets in {} (limit 600s)", secs(d)))
}

fn round_trip(p: &ConcurrentProgram, g: &ExecutionGraph, m: ModelId) -> Result<(), String> {
    let t = graph_to_fair_trace(g, m).map_err(|e| e.to_string())?;
    run_program(p, m, &t.steps).map_err(|e| format!("replay: {e}"))?;
    let h = trace_to_graph(&t).map_err(|e| e.to_string())?;
    if h.behavior() != g.behavior() {
        return Err("behavior changed".into());
    }
    if !consistent(&h, m) {
        return Err("graph of the trace is inconsistent".into());
    }
    if h != *g {
        return Err("graph of the trace differs from the original".into());
    }
    Ok(())
}

fn criterion_round_trips() -> Check {
    let (mut ok, mut total) = (0, 0);
    let mut first_failure = None;
    for &(name, max, truncate) in FULL_CORPUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            let res = enumerate_with(&p, m, &common::bounds(max, truncate), &EnumerationOptions { collect_prefixes: true })
                .map_err(|e| e.to_string())?;
            for g in res.prefixes.unwrap_or_default() {
                total += 1;
                match round_trip(&p, &g, m) {
                    Ok(()) => ok += 1,
                    Err(e) => {
                        first_failure.get_or_insert(format!("{name} under {m}: {e}"));
                    }
                }
            }
        }
    }
    match first_failure {
        None => Ok(format!("{ok}/{total} graphs round-trip")),
        Some(e) => Err(format!("{ok}/{total} graphs round-trip; first failure: {e}")),
    }
}

fn criterion_robustness() -> Check {
    let p = common::program("spinlock_client");
    for m in [ModelId::Ra, ModelId::Tso, ModelId::StrongCoh] {
        let v = check_finite_robustness(&p, m, &ExplorationBounds::with_max_events(16)).map_err(|e| e.to_string())?;
        if !v.is_robust() {
            return Err(format!("spinlock_client not robust under {m}"));
        }
    }
    let sb = common::program("sb");
    let v = check_finite_robustness(&sb, ModelId::Tso, &ExplorationBounds::default()).map_err(|e| e.to_string())?;
    let RobustnessVerdict::NonRobust { witness, .. } = v else {
        return Err("sb judged robust under TSO".into());
    };
    let (x, y) = (Loc(0), Loc(1));
    let mut weak = ExecutionGraph::init_only(2, 2);
    weak.push_event(ThreadId(1), EventLabel::Write { loc: x, val: 1 }, None, Some(1));
    weak.push_event(ThreadId(1), EventLabel::Read { loc: y, val: 0 }, Some(EventId::Init(y)), None);
    weak.push_event(ThreadId(2), EventLabel::Write { loc: y, val: 1 }, None, Some(1));
    weak.push_event(ThreadId(2), EventLabel::Read { loc: x, val: 0 }, Some(EventId::Init(x)), None);
    if witness != weak {
        return Err(format!("unexpected sb witness {witness:?}"));
    }
    let mut robust = 0;
    for &(name, max, truncate) in FULL_CORPUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            let b = common::bounds(max, truncate);
            if check_finite_robustness(&p, m, &b).map_err(|e| e.to_string())?.is_robust() {
                robust += 1;
                if !check_robustness_transfer(&p, m, &b).map_err(|e| e.to_string())?.equal {
                    return Err(format!("{name} robust under {m} but behaviors differ from SC"));
                }
            }
        }
    }
    Ok(format!("spinlock robust, sb witness matches, transfer holds for {robust} robust pairs"))
}

fn relation_properties(g: &ExecutionGraph, m: ModelId) -> Result<(), String> {
    let idx = g.index();
    // fr against its definition.
    let lib: BTreeSet<(EventId, EventId)> = from_read(g).pairs().map(|(a, b)| (idx.ids[a], idx.ids[b])).collect();
    let mut def = BTreeSet::new();
    for r in g.ids() {
        if let Some(w) = g.rf_of(r) {
            let order = g.mo(g.label(r).loc());
            let k = order.iter().position(|&x| x == w).unwrap();
            def.extend(order[k + 1..].iter().filter(|&&x| x != r).map(|&x| (r, x)));
        }
    }
    if lib != def {
        return Err("fr differs from its definition".into());
    }
    let n = g.num_threads();
    let carrier = idx.non_init();
    if !check_n_total(&idx.po, &carrier, n) {
        return Err("po is not n-total".into());
    }
    let r = idx.po.union(&idx.rf).union(&idx.mo).union(&idx.fr).restrict(&carrier, &carrier);
    if r.is_acyclic() {
        let rep = check_prefix_finite_bounded(&r, &carrier, n).map_err(|e| e.to_string())?;
        if rep.compression_holds != Some(true) {
            return Err("compression law fails".into());
        }
    }
    for keep in common::all_prefixes(g) {
        if !consistent(&g.restrict_to_prefix(&keep).map_err(|e| e.to_string())?, m) {
            return Err(format!("a prefix is not {m}-consistent"));
        }
    }
    for tid in (0..n).map(ThreadId::from_index) {
        for l in (0..g.num_locs()).map(|l| Loc(l as u16)) {
            let w = g.mo_maximal(l);
            let mut h = g.clone();
            h.push_event(tid, EventLabel::Read { loc: l, val: g.label(w).val_w().unwrap() }, Some(w), None);
            if !consistent(&h, m) {
                return Err(format!("reading the mo-maximal write breaks {m}-consistency"));
            }
        }
    }
    Ok(())
}

fn criterion_relations() -> Check {
    let limit = Duration::from_secs(60);
    let t = Instant::now();
    let mut n = 0;
    for &(name, max, truncate) in common::BOUNDED_CORPUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            let res = enumerate_with(&p, m, &common::bounds(max, truncate), &EnumerationOptions { collect_prefixes: true })
                .map_err(|e| e.to_string())?;
            for g in res.prefixes.unwrap_or_default() {
                relation_properties(&g, m).map_err(|e| format!("{name} under {m}: {e}"))?;
                n += 1;
            }
        }
    }
    for seed in 0..50 {
        let p = common::parse(&common::random_program(seed, 5));
        for m in ModelId::ALL {
            let res = enumerate_with(&p, m, &ExplorationBounds::default(), &EnumerationOptions { collect_prefixes: true })
                .map_err(|e| e.to_string())?;
            for g in res.prefixes.unwrap_or_default() {
                relation_properties(&g, m).map_err(|e| format!("random program {seed} under {m}: {e}"))?;
                n += 1;
            }
        }
    }
    let d = t.elapsed();
    if d > limit {
        return Err(format!("took {}", secs(d)));
    }
    Ok(format!("{n} graphs satisfy all relation properties in {} (limit 60s)", secs(d)))
}

fn criterion_oracle() -> Check {
    let mut programs: Vec<(String, ConcurrentProgram)> =
        common::LITMUS.iter().map(|n| (n.to_string(), common::program(n))).collect();
    programs.extend((0..100).map(|s| (format!("random program {s}"), common::parse(&common::random_program(s, 6)))));
    let mut graphs = 0;
    for (name, p) in &programs {
        for m in ModelId::ALL {
            let got: BTreeSet<ExecutionGraph> = enumerate_consistent_graphs(p, m, &ExplorationBounds::default())
                .map_err(|e| e.to_string())?
                .complete()
                .map(|g| g.graph.clone())
                .collect();
            let want = common::naive_graphs(p, m, 6);
            if got != want {
                return Err(format!("{name} under {m}: {} enumerated, {} by the oracle", got.len(), want.len()));
            }
            graphs += got.len();
        }
    }
    Ok(format!("{} programs x 4 models agree with the oracle ({graphs} graphs)", programs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("litmus matrix", criterion_litmus),
        ("termination verdicts", criterion_termination),
        ("operational/declarative equivalence", criterion_equivalence),
        ("correspondence round-trips", criterion_round_trips),
        ("robustness", criterion_robustness),
        ("relation properties", criterion_relations),
        ("enumeration oracle", criterion_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = check();
        let took = secs(t.elapsed());
        match res {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{took}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail} [{took}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
