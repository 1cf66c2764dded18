mod common;

use memfair_core::consistency::ModelId;
use memfair_core::enumerate::{check_outcome, ExplorationBounds};
use memfair_core::ir::Assertion;

/// (program, outcome, allowed under SC, TSO, RA, StrongCOH)
const MATRIX: &[(&str, &str, [bool; 4])] = &[
    ("sb", "a=0 && b=0", [false, true, true, true]),
    ("mp", "a=1 && b=0", [false, false, false, true]),
    ("2rmw", "a=0 && b=0", [false, false, false, false]),
    ("sb_rmws", "a=0 && b=0", [false, false, false, true]),
];

#[test]
fn litmus_matrix() {
    for &(name, outcome, expected) in MATRIX {
        let p = common::program(name);
        let a = Assertion::parse(outcome, &p).unwrap();
        for (m, want) in ModelId::ALL.into_iter().zip(expected) {
            let v = check_outcome(&p, m, &a, &ExplorationBounds::default()).unwrap();
            assert_eq!(v.allowed, want, "{name}: {outcome} under {m}");
            assert_eq!(v.witness.is_some(), want);
        }
    }
}

#[test]
fn unwritten_value_is_forbidden() {
    let p = common::program("sb");
    let a = Assertion::parse("a=7", &p).unwrap();
    for m in ModelId::ALL {
        assert!(!check_outcome(&p, m, &a, &ExplorationBounds::default()).unwrap().allowed);
    }
}

#[test]
fn qualified_registers() {
    let p = common::parse("locations x; thread 1 { a = load(x); } thread 2 { a = load(x); store(x, 1); }");
    assert!(Assertion::parse("a=0", &p).is_err());
    let a = Assertion::parse("1:a=1 && 2:a=0", &p).unwrap();
    assert!(check_outcome(&p, ModelId::Sc, &a, &ExplorationBounds::default()).unwrap().allowed);
}
