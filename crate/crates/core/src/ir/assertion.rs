//! Predicates over final register values, e.g. `a=0 && b=0` or
//! `1:a=1 || 2:a=1`.

use crate::error::{Error, Result};
use crate::graph::Value;

use super::program::{ConcurrentProgram, Reg};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    /// Index of the thread owning the register.
    pub thread: usize,
    pub reg: Reg,
    pub equal: bool,
    pub value: Value,
}

/// Disjunction of conjunctions of register comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub clauses: Vec<Vec<Atom>>,
}

impl Assertion {
    pub fn holds(&self, regs: &[Vec<Value>]) -> bool {
        self.clauses.iter().any(|c| {
            c.iter().all(|a| (regs[a.thread][a.reg] == a.value) == a.equal)
        })
    }

    /// Parse against `p`. An unqualified register name must belong to
    /// exactly one thread; otherwise write `tid:reg`.
    pub fn parse(src: &str, p: &ConcurrentProgram) -> Result<Assertion> {
        let err = |msg: String| Error::Syntax { line: 1, col: 1, msg: format!("assertion: {msg}") };
        let mut clauses = Vec::new();
        for clause in src.split("||") {
            let mut atoms = Vec::new();
            for atom in clause.split("&&") {
                let atom = atom.trim();
                let (lhs, rhs, equal) = if let Some((l, r)) = atom.split_once("!=") {
                    (l, r, false)
                } else if let Some((l, r)) = atom.split_once("==") {
                    (l, r, true)
                } else if let Some((l, r)) = atom.split_once('=') {
                    (l, r, true)
                } else {
                    return Err(err(format!("`{atom}` is not a comparison")));
                };
                let value: Value = rhs.trim().parse().map_err(|_| err(format!("`{}` is not an integer", rhs.trim())))?;
                let lhs = lhs.trim();
                let (thread, name) = match lhs.split_once(':') {
                    Some((t, n)) => {
                        let t: usize = t.trim().parse().map_err(|_| err(format!("bad thread in `{lhs}`")))?;
                        if t == 0 || t > p.num_threads() {
                            return Err(err(format!("no thread {t}")));
                        }
                        (Some(t - 1), n.trim())
                    }
                    None => (None, lhs),
                };
                let owners: Vec<(usize, Reg)> = p
                    .threads
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| thread.is_none_or(|t| t == *i))
                    .filter_map(|(i, t)| t.reg(name).map(|r| (i, r)))
                    .collect();
                let (thread, reg) = match owners.as_slice() {
                    [one] => *one,
                    [] => return Err(err(format!("no register `{name}`"))),
                    _ => return Err(err(format!("register `{name}` is ambiguous; qualify it as tid:{name}"))),
                };
                atoms.push(Atom { thread, reg, equal, value });
            }
            clauses.push(atoms);
        }
        Ok(Assertion { clauses })
    }
}
