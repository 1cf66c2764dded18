//! Dense bit-matrix relations over `0..n`.
//!
//! Graphs handled here have a few dozen events, so closures are computed
//! eagerly with a row-wise Warshall pass.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

impl Relation {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Relation { n, words, bits: vec![0; words * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut r = Relation::empty(n);
        for i in 0..n {
            r.insert(i, i);
        }
        r
    }

    /// `[A]`: the identity restricted to the members of `set`.
    pub fn identity_on(set: &[bool]) -> Self {
        let mut r = Relation::empty(set.len());
        for (i, &b) in set.iter().enumerate() {
            if b {
                r.insert(i, i);
            }
        }
        r
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut r = Relation::empty(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    /// Pairs `(a, b)` for which `f(a, b)` holds.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut r = Relation::empty(n);
        for a in 0..n {
            for b in 0..n {
                if f(a, b) {
                    r.insert(a, b);
                }
            }
        }
        r
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn row(&self, a: usize) -> &[u64] {
        &self.bits[a * self.words..(a + 1) * self.words]
    }

    fn row_mut(&mut self, a: usize) -> &mut [u64] {
        &mut self.bits[a * self.words..(a + 1) * self.words]
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        assert!(a < self.n && b < self.n, "pair ({a},{b}) outside carrier of size {}", self.n);
        self.bits[a * self.words + b / 64] |= 1 << (b % 64);
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        self.bits[a * self.words + b / 64] &= !(1 << (b % 64));
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        self.row(a).iter().enumerate().flat_map(move |(wi, &w)| {
            (0..64).filter(move |bit| w >> bit & 1 == 1).map(move |bit| wi * 64 + bit)
        })
        .filter(move |&b| b < n)
    }

    pub fn predecessors(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&a| self.contains(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| self.successors(a).map(move |b| (a, b)))
    }

    fn zip_with(&self, other: &Relation, f: impl Fn(u64, u64) -> u64) -> Relation {
        assert_eq!(self.n, other.n, "relations over different carriers");
        Relation {
            n: self.n,
            words: self.words,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn union(&self, other: &Relation) -> Relation {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Relation) -> Relation {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Relation) -> Relation {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| a & !b == 0)
    }

    pub fn inverse(&self) -> Relation {
        let mut r = Relation::empty(self.n);
        for (a, b) in self.pairs() {
            r.insert(b, a);
        }
        r
    }

    /// Left composition `self ; other`.
    pub fn compose(&self, other: &Relation) -> Relation {
        assert_eq!(self.n, other.n, "relations over different carriers");
        let mut r = Relation::empty(self.n);
        for a in 0..self.n {
            for m in self.successors(a).collect::<Vec<_>>() {
                let (src_start, dst_start) = (m * self.words, a * self.words);
                for w in 0..self.words {
                    r.bits[dst_start + w] |= other.bits[src_start + w];
                }
            }
        }
        r
    }

    /// `R+`.
    pub fn transitive_closure(&self) -> Relation {
        let mut r = self.clone();
        for k in 0..self.n {
            let row_k: Vec<u64> = r.row(k).to_vec();
            for i in 0..self.n {
                if r.contains(i, k) {
                    for (dst, src) in r.row_mut(i).iter_mut().zip(&row_k) {
                        *dst |= *src;
                    }
                }
            }
        }
        r
    }

    /// `R?`.
    pub fn reflexive_closure(&self) -> Relation {
        self.union(&Relation::identity(self.n))
    }

    /// `R*`.
    pub fn reflexive_transitive_closure(&self) -> Relation {
        self.transitive_closure().reflexive_closure()
    }

    /// `[dom] ; R ; [codom]`.
    pub fn restrict(&self, dom: &[bool], codom: &[bool]) -> Relation {
        let mut r = self.clone();
        for (a, b) in self.pairs() {
            if !dom[a] || !codom[b] {
                r.remove(a, b);
            }
        }
        r
    }

    pub fn is_irreflexive(&self) -> bool {
        (0..self.n).all(|i| !self.contains(i, i))
    }

    pub fn is_acyclic(&self) -> bool {
        self.transitive_closure().is_irreflexive()
    }

    /// `R^k` for `k >= 1`.
    pub fn power(&self, k: usize) -> Relation {
        assert!(k >= 1);
        let mut r = self.clone();
        for _ in 1..k {
            r = r.compose(self);
        }
        r
    }

    /// Members of `dom(R)`.
    pub fn domain(&self) -> Vec<bool> {
        (0..self.n).map(|a| self.row(a).iter().any(|&w| w != 0)).collect()
    }

    /// Members of `codom(R)`.
    pub fn codomain(&self) -> Vec<bool> {
        let mut out = vec![false; self.n];
        for (_, b) in self.pairs() {
            out[b] = true;
        }
        out
    }
}
