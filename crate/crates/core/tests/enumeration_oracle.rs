mod common;

use std::collections::BTreeSet;

use memfair_core::consistency::ModelId;
use memfair_core::enumerate::{enumerate_consistent_graphs, ExplorationBounds};
use memfair_core::graph::ExecutionGraph;
use memfair_core::ir::ConcurrentProgram;
use proptest::prelude::*;

fn enumerated(p: &ConcurrentProgram, m: ModelId) -> BTreeSet<ExecutionGraph> {
    let r = enumerate_consistent_graphs(p, m, &ExplorationBounds::default()).unwrap();
    r.complete().map(|g| g.graph.clone()).collect()
}

#[test]
fn litmus_programs_match_oracle() {
    for name in common::LITMUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            assert_eq!(enumerated(&p, m), common::naive_graphs(&p, m, 6), "{name} under {m}");
        }
    }
}

#[test]
fn store_buffering_graph_counts() {
    let p = common::program("sb");
    let counts: Vec<usize> = ModelId::ALL.iter().map(|&m| enumerated(&p, m).len()).collect();
    assert_eq!(counts, vec![3, 4, 4, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn random_programs_match_oracle(seed in any::<u64>()) {
        let src = common::random_program(seed, 6);
        let p = common::parse(&src);
        for m in ModelId::ALL {
            prop_assert_eq!(enumerated(&p, m), common::naive_graphs(&p, m, 6), "{} under {}", src, m);
        }
    }
}
