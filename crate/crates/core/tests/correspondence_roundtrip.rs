mod common;

use memfair_core::consistency::{consistent, ModelId};
use memfair_core::correspondence::{graph_to_fair_trace, trace_to_graph};
use memfair_core::enumerate::{enumerate_with, EnumerationOptions, ExplorationBounds};
use memfair_core::graph::ExecutionGraph;
use memfair_core::ir::ConcurrentProgram;
use memfair_core::operational::{fair_run, run_program, AnnotatedTrace, FairSchedulerConfig};
use proptest::prelude::*;

/// Schedule `g` on the machine, replay the schedule against the program,
/// and read a graph back off the trace.
fn round_trip(p: &ConcurrentProgram, g: &ExecutionGraph, m: ModelId) -> ExecutionGraph {
    let t = graph_to_fair_trace(g, m).unwrap_or_else(|e| panic!("{m}: {e} on {g:?}"));
    let (replayed, _) = run_program(p, m, &t.steps).unwrap_or_else(|e| panic!("{m}: {e} on {g:?}"));
    assert_eq!(replayed, t);
    assert!(t.last_state().is_quiescent() || m != ModelId::Tso);
    let h = trace_to_graph(&t).unwrap();
    assert_eq!(h.behavior(), g.behavior());
    assert!(consistent(&h, m));
    h
}

fn check_program(p: &ConcurrentProgram, b: &ExplorationBounds) -> usize {
    let mut n = 0;
    for m in ModelId::ALL {
        let res = enumerate_with(p, m, b, &EnumerationOptions { collect_prefixes: true }).unwrap();
        for g in res.prefixes.unwrap() {
            let h = round_trip(p, &g, m);
            assert_eq!(h, g, "{m}");
            n += 1;
        }
    }
    n
}

#[test]
fn corpus_graphs_round_trip() {
    for &(name, max, truncate) in common::BOUNDED_CORPUS {
        let n = check_program(&common::program(name), &common::bounds(max, truncate));
        assert!(n > 0, "{name}");
    }
}

#[test]
fn fair_runs_give_consistent_graphs() {
    for name in ["rloop", "spinlock_client", "sb", "mp"] {
        let p = common::program(name);
        for m in ModelId::ALL {
            for seed in 0..5 {
                let run = fair_run(&p, m, &FairSchedulerConfig { seed, ..Default::default() }).unwrap();
                let g = trace_to_graph(&run.trace).unwrap();
                assert!(consistent(&g, m), "{name} under {m}");
                assert_eq!(g.behavior(), run.trace.behavior());
                // And back again.
                let t: AnnotatedTrace = graph_to_fair_trace(&g, m).unwrap();
                assert_eq!(trace_to_graph(&t).unwrap(), g);
            }
        }
    }
}

#[test]
fn inconsistent_graph_rejected() {
    let p = common::program("sb");
    let res = enumerate_with(&p, ModelId::Tso, &ExplorationBounds::default(), &EnumerationOptions::default()).unwrap();
    let weak = res.graphs.iter().find(|g| !consistent(&g.graph, ModelId::Sc)).unwrap();
    let e = graph_to_fair_trace(&weak.graph, ModelId::Sc).unwrap_err();
    assert_eq!(e.code(), "E_INCONSISTENT_INPUT");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn random_programs_round_trip(seed in any::<u64>()) {
        let p = common::parse(&common::random_program(seed, 6));
        check_program(&p, &ExplorationBounds::default());
    }
}
