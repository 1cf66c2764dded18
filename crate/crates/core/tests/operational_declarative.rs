mod common;

use std::collections::HashMap;

use memfair_core::consistency::ModelId;
use memfair_core::graph::{EventId, EventLabel, Loc, ThreadId};
use memfair_core::ir::ConcurrentProgram;
use memfair_core::operational::{
    explore_behaviors, fair_run, AnnotatedTrace, FairSchedulerConfig, Memory, TransitionLabel,
};
use proptest::prelude::*;

fn assert_same_behaviors(p: &ConcurrentProgram, m: ModelId, max: usize, truncate: bool, what: &str) {
    let op = explore_behaviors(p, m, max).unwrap();
    let (terminated, all) = common::declarative_behaviors(p, m, &common::bounds(max, truncate));
    assert_eq!(op.terminated, terminated, "terminated behaviors of {what} under {m}");
    assert_eq!(op.all, all, "reachable behaviors of {what} under {m}");
}

#[test]
fn corpus_behaviors_agree() {
    for &(name, max, truncate) in common::BOUNDED_CORPUS {
        let p = common::program(name);
        for m in ModelId::ALL {
            assert_same_behaviors(&p, m, max, truncate, name);
        }
    }
}

#[test]
fn message_passing_separates_ra_from_strongcoh() {
    let p = common::program("mp");
    let weak = |b: &memfair_core::graph::Behavior| {
        b.thread(ThreadId(2)) == [EventLabel::Read { loc: Loc(1), val: 1 }, EventLabel::Read { loc: Loc(0), val: 0 }]
    };
    for m in ModelId::ALL {
        let op = explore_behaviors(&p, m, 4).unwrap();
        assert_eq!(op.terminated.iter().any(weak), m == ModelId::StrongCoh, "{m}");
    }
}

/// Plain writes of each thread reach memory in program order.
fn check_fifo(t: &AnnotatedTrace) {
    let mut issued: HashMap<ThreadId, Vec<EventId>> = HashMap::new();
    let mut flushed: HashMap<ThreadId, Vec<EventId>> = HashMap::new();
    for (i, step) in t.steps.iter().enumerate() {
        let before = t.state_before(i);
        match step.label {
            TransitionLabel::Observable { tid, label } if label.is_write() && !label.is_rmw() => {
                issued.entry(tid).or_default().push(before.next_event(tid));
            }
            TransitionLabel::PropTso { tid } => {
                let front = before.tso().unwrap().buffers[tid.index()].front().unwrap().clone();
                let after = &t.snapshots[i].tso().unwrap().memory;
                assert_eq!(after[front.loc.index()], front.val);
                flushed.entry(tid).or_default().push(front.origin);
            }
            _ => {}
        }
    }
    for (tid, f) in flushed {
        assert_eq!(f[..], issued[&tid][..f.len()], "thread {tid}");
    }
}

/// Every RMW message sits right after the message it read, in every state.
fn check_adjacency(t: &AnnotatedTrace) {
    let mut read_by: Vec<(EventId, EventId)> = Vec::new();
    for (i, step) in t.steps.iter().enumerate() {
        if let TransitionLabel::Observable { tid, label } = step.label {
            if label.is_rmw() {
                read_by.push((t.state_before(i).next_event(tid), step.choice.reads.unwrap()));
            }
        }
        let Memory::Ra(ra) = &t.snapshots[i].memory else { unreachable!() };
        for &(u, w) in &read_by {
            let (lu, pu) = ra.find(u).unwrap();
            let (lw, pw) = ra.find(w).unwrap();
            assert_eq!((lu, pu), (lw, pw + 1));
            assert!(ra.message(lu, pu).adjacent);
        }
    }
}

#[test]
fn lock_clients_terminate_in_fair_runs() {
    for name in ["spinlock_client", "spinlock_client3", "mcs_client"] {
        let p = common::program(name);
        for m in [ModelId::Sc, ModelId::Tso, ModelId::Ra] {
            for seed in 0..10 {
                let run = fair_run(&p, m, &FairSchedulerConfig { seed, ..Default::default() }).unwrap();
                assert!(run.terminated, "{name} under {m}, seed {seed}");
                match m {
                    ModelId::Tso => check_fifo(&run.trace),
                    ModelId::Ra => check_adjacency(&run.trace),
                    _ => {}
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn random_program_behaviors_agree(seed in any::<u64>()) {
        let src = common::random_program(seed, 5);
        let p = common::parse(&src);
        for m in ModelId::ALL {
            assert_same_behaviors(&p, m, 5, false, &src);
        }
    }

    #[test]
    fn buffers_are_fifo(seed in any::<u64>()) {
        let p = common::parse(&common::random_program(seed, 6));
        let run = fair_run(&p, ModelId::Tso, &FairSchedulerConfig { seed, ..Default::default() }).unwrap();
        prop_assert!(run.terminated);
        check_fifo(&run.trace);
    }

    #[test]
    fn rmw_messages_stay_adjacent(seed in any::<u64>()) {
        let p = common::parse(&common::random_program(seed, 6));
        for m in [ModelId::Ra, ModelId::StrongCoh] {
            let run = fair_run(&p, m, &FairSchedulerConfig { seed, ..Default::default() }).unwrap();
            prop_assert!(run.terminated);
            check_adjacency(&run.trace);
        }
    }
}
