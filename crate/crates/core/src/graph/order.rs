//! Chain-bound checks used as finite stand-ins for prefix-finiteness.

use super::relation::Relation;
use crate::error::{Error, Result};

/// True iff among any `n + 1` distinct members of `carrier` some two are
/// related by `r` (in either direction).
pub fn check_n_total(r: &Relation, carrier: &[bool], n: usize) -> bool {
    let members: Vec<usize> = (0..r.size()).filter(|&i| carrier[i]).collect();
    let related = |a: usize, b: usize| r.contains(a, b) || r.contains(b, a);
    // Search for n + 1 pairwise unrelated members.
    fn grow(
        members: &[usize],
        start: usize,
        chosen: &mut Vec<usize>,
        target: usize,
        related: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        if chosen.len() == target {
            return true;
        }
        if members.len() - start < target - chosen.len() {
            return false;
        }
        for i in start..members.len() {
            let m = members[i];
            if chosen.iter().all(|&c| !related(c, m)) {
                chosen.push(m);
                if grow(members, i + 1, chosen, target, related) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    !grow(&members, 0, &mut Vec::new(), n + 1, &related)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixFiniteReport {
    /// Largest number of predecessors of any element.
    pub max_predecessors: usize,
    pub n_total: bool,
    /// `R^(2n+1) ⊆ R^1 ∪ … ∪ R^(2n)`, checked only when `n_total` holds.
    pub compression_holds: Option<bool>,
}

/// Predecessor counts of an acyclic `r` over `carrier`, plus the chain
/// compression law when `r` is `n`-total there.
pub fn check_prefix_finite_bounded(r: &Relation, carrier: &[bool], n: usize) -> Result<PrefixFiniteReport> {
    if !r.is_acyclic() {
        return Err(Error::Cyclic);
    }
    let r = r.restrict(carrier, carrier);
    let max_predecessors = (0..r.size()).map(|b| r.predecessors(b).count()).max().unwrap_or(0);
    let n_total = check_n_total(&r, carrier, n);
    let compression_holds = n_total.then(|| compression_law(&r, n));
    Ok(PrefixFiniteReport { max_predecessors, n_total, compression_holds })
}

fn compression_law(r: &Relation, n: usize) -> bool {
    let mut upto = r.clone();
    let mut power = r.clone();
    for _ in 2..=2 * n {
        power = power.compose(r);
        upto = upto.union(&power);
    }
    power.compose(r).is_subset(&upto)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_relation_not_n_total() {
        let r = Relation::empty(3);
        assert!(!check_n_total(&r, &[true; 3], 2));
        assert!(check_n_total(&r, &[true; 3], 3));
    }

    #[test]
    fn two_chains_are_two_total() {
        // 0<1<2 and 3<4<5
        let r = Relation::from_pairs(6, [(0, 1), (1, 2), (3, 4), (4, 5)]).transitive_closure();
        assert!(check_n_total(&r, &[true; 6], 2));
        assert!(!check_n_total(&r, &[true; 6], 1));
        let rep = check_prefix_finite_bounded(&r, &[true; 6], 2).unwrap();
        assert_eq!(rep.max_predecessors, 2);
        assert_eq!(rep.compression_holds, Some(true));
    }

    #[test]
    fn cyclic_rejected() {
        let r = Relation::from_pairs(2, [(0, 1), (1, 0)]);
        assert_eq!(check_prefix_finite_bounded(&r, &[true; 2], 1), Err(Error::Cyclic));
    }
}
