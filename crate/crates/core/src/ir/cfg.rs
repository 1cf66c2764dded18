//! Control-flow analysis: natural loops, spinloop classification, register
//! liveness and loop unrolling.

use std::collections::{BTreeMap, BTreeSet};

use super::program::{ConcurrentProgram, Instruction, Reg, ThreadProgram};
use crate::error::{Error, Result};
use crate::graph::{ThreadId, Value};

/// The natural loop of one back edge `latch -> head`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopRegion {
    pub head: usize,
    pub latch: usize,
    pub body: BTreeSet<usize>,
    /// The body never writes unconditionally. A CAS may sit in the body:
    /// a failing CAS only reads, and iterations that succeed are not
    /// counted as spinloop iterations at run time.
    pub is_spinloop: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadLoops {
    pub loops: Vec<LoopRegion>,
    pub irreducible: bool,
    pub acyclic_outside_spinloops: bool,
    /// Registers live on entry to each program point (index `len` is the
    /// exit, where every register is live).
    pub live_in: Vec<Vec<bool>>,
}

impl ThreadLoops {
    pub fn spin_heads(&self) -> BTreeSet<usize> {
        self.loops.iter().filter(|l| l.is_spinloop).map(|l| l.head).collect()
    }

    pub fn is_spin_head(&self, pc: usize) -> bool {
        self.loops.iter().any(|l| l.is_spinloop && l.head == pc)
    }

    pub fn in_spinloop(&self, pc: usize) -> bool {
        self.loops.iter().any(|l| l.is_spinloop && l.body.contains(&pc))
    }

    /// The register file at `pc` with dead registers zeroed, so that two
    /// visits compare equal exactly when the continuations agree.
    pub fn live_projection(&self, pc: usize, regs: &[Value]) -> Vec<Value> {
        regs.iter()
            .enumerate()
            .map(|(r, &v)| if self.live_in[pc][r] { v } else { 0 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinloopInfo {
    pub threads: Vec<ThreadLoops>,
}

impl SpinloopInfo {
    pub fn thread(&self, tid: ThreadId) -> &ThreadLoops {
        &self.threads[tid.index()]
    }

    pub fn acyclic_outside_spinloops(&self) -> bool {
        self.threads.iter().all(|t| t.acyclic_outside_spinloops)
    }

    pub fn irreducible(&self) -> bool {
        self.threads.iter().any(|t| t.irreducible)
    }
}

fn successors(t: &ThreadProgram) -> Vec<Vec<usize>> {
    let n = t.instrs.len();
    let mut succ: Vec<Vec<usize>> = t.instrs.iter().enumerate().map(|(pc, i)| i.successors(pc)).collect();
    succ.push(vec![]);
    debug_assert_eq!(succ.len(), n + 1);
    succ
}

fn reachable(succ: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; succ.len()];
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut seen[v], true) {
            stack.extend(succ[v].iter().copied());
        }
    }
    seen
}

/// Dominator sets by the iterative data-flow algorithm.
fn dominators(succ: &[Vec<usize>], reach: &[bool]) -> Vec<BTreeSet<usize>> {
    let n = succ.len();
    let all: BTreeSet<usize> = (0..n).filter(|&v| reach[v]).collect();
    let mut preds = vec![Vec::new(); n];
    for (u, ss) in succ.iter().enumerate() {
        if reach[u] {
            for &v in ss {
                preds[v].push(u);
            }
        }
    }
    let mut dom: Vec<BTreeSet<usize>> = (0..n).map(|v| if v == 0 { [0].into() } else { all.clone() }).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for v in 1..n {
            if !reach[v] {
                continue;
            }
            let mut new: Option<BTreeSet<usize>> = None;
            for &p in &preds[v] {
                new = Some(match new {
                    None => dom[p].clone(),
                    Some(s) => s.intersection(&dom[p]).copied().collect(),
                });
            }
            let mut new = new.unwrap_or_default();
            new.insert(v);
            if new != dom[v] {
                dom[v] = new;
                changed = true;
            }
        }
    }
    dom
}

fn liveness(t: &ThreadProgram, succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = t.instrs.len();
    let nr = t.registers.len();
    let mut live = vec![vec![false; nr]; n + 1];
    live[n] = vec![true; nr];
    let mut changed = true;
    while changed {
        changed = false;
        for pc in (0..n).rev() {
            let instr = &t.instrs[pc];
            let mut out = vec![false; nr];
            if matches!(instr, Instruction::Halt) {
                out = vec![true; nr];
            }
            for &s in &succ[pc] {
                for r in 0..nr {
                    out[r] |= live[s][r];
                }
            }
            if let Some(d) = instr.def() {
                out[d] = false;
            }
            for r in instr.uses() {
                out[r] = true;
            }
            if out != live[pc] {
                live[pc] = out;
                changed = true;
            }
        }
    }
    live
}

fn has_cycle(succ: &[Vec<usize>], reach: &[bool], skip: &BTreeSet<(usize, usize)>) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = succ.len();
    let mut state = vec![0u8; n];
    for root in 0..n {
        if !reach[root] || state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if skip.contains(&(v, w)) {
                    continue;
                }
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    false
}

pub fn analyze_thread(t: &ThreadProgram) -> ThreadLoops {
    let succ = successors(t);
    let reach = reachable(&succ);
    let dom = dominators(&succ, &reach);
    let mut preds = vec![Vec::new(); succ.len()];
    for (u, ss) in succ.iter().enumerate() {
        for &v in ss {
            preds[v].push(u);
        }
    }
    let mut loops = Vec::new();
    let mut back_edges = BTreeSet::new();
    for (u, ss) in succ.iter().enumerate() {
        if !reach[u] {
            continue;
        }
        for &v in ss {
            if dom[u].contains(&v) {
                back_edges.insert((u, v));
                let mut body: BTreeSet<usize> = [v].into();
                let mut stack = vec![u];
                while let Some(x) = stack.pop() {
                    if body.insert(x) {
                        stack.extend(preds[x].iter().copied().filter(|&p| reach[p]));
                    }
                }
                let is_spinloop = body.iter().all(|&pc| !t.instrs[pc].always_writes());
                loops.push(LoopRegion { head: v, latch: u, body, is_spinloop });
            }
        }
    }
    let irreducible = has_cycle(&succ, &reach, &back_edges);
    let acyclic_outside_spinloops = !irreducible && loops.iter().all(|l| l.is_spinloop);
    let live_in = liveness(t, &succ);
    ThreadLoops { loops, irreducible, acyclic_outside_spinloops, live_in }
}

/// Natural loops of every thread, classified as spinloops or not.
pub fn detect_spinloops(p: &ConcurrentProgram) -> SpinloopInfo {
    SpinloopInfo { threads: p.threads.iter().map(analyze_thread).collect() }
}

/// Replace every loop that is not a spinloop by `rounds` sequential copies
/// of its body. Each such loop must end in an unconditional `goto` back to
/// its head and must not contain another loop of the same kind.
pub fn unroll_loops(p: &ConcurrentProgram, rounds: usize) -> Result<ConcurrentProgram> {
    let mut out = p.clone();
    for (ti, t) in p.threads.iter().enumerate() {
        let info = analyze_thread(t);
        if info.irreducible {
            return Err(Error::UnsupportedLoop(format!("thread {} has an irreducible control-flow graph", t.tid)));
        }
        let outer: Vec<&LoopRegion> = info.loops.iter().filter(|l| !l.is_spinloop).collect();
        let Some(lp) = outer.first() else { continue };
        if outer.len() > 1 {
            return Err(Error::UnsupportedLoop(format!("thread {} has more than one loop that writes", t.tid)));
        }
        let (head, latch) = (lp.head, lp.latch);
        if t.instrs[latch] != (Instruction::Goto { target: head }) || lp.body != (head..=latch).collect() {
            return Err(Error::UnsupportedLoop(format!(
                "thread {}: a loop that writes must be a contiguous block closed by `goto`",
                t.tid
            )));
        }
        out.threads[ti] = unroll_block(t, head, latch, rounds.max(1));
    }
    Ok(out)
}

fn unroll_block(t: &ThreadProgram, head: usize, latch: usize, rounds: usize) -> ThreadProgram {
    let body_len = latch - head;
    let extra = (body_len * rounds) as isize - (body_len as isize + 1);
    let after = |pc: usize| if pc > latch { (pc as isize + extra) as usize } else { pc };
    let remap_target = |target: usize, copy: usize| -> usize {
        if (head..=latch).contains(&target) {
            // Jumping to the latch continues with the next round.
            let off = target - head;
            if target == latch {
                head + body_len * (copy + 1)
            } else {
                head + body_len * copy + off
            }
        } else {
            after(target)
        }
    };
    let fix = |i: &Instruction, copy: usize| -> Instruction {
        match i {
            Instruction::Branch { cond, target } => {
                Instruction::Branch { cond: cond.clone(), target: remap_target(*target, copy) }
            }
            Instruction::Goto { target } => Instruction::Goto { target: remap_target(*target, copy) },
            other => other.clone(),
        }
    };
    let mut instrs = Vec::new();
    for i in &t.instrs[..head] {
        instrs.push(fix(i, 0));
    }
    for copy in 0..rounds {
        for i in &t.instrs[head..latch] {
            instrs.push(fix(i, copy));
        }
    }
    for i in &t.instrs[latch + 1..] {
        instrs.push(fix(i, rounds - 1));
    }
    let mut labels = BTreeMap::new();
    for (name, &pc) in &t.labels {
        if (head..latch).contains(&pc) {
            for copy in 0..rounds {
                labels.insert(format!("{name}#{}", copy + 1), head + body_len * copy + (pc - head));
            }
        } else if pc == latch {
            labels.insert(name.clone(), head + body_len * rounds);
        } else {
            labels.insert(name.clone(), after(pc));
        }
    }
    ThreadProgram { tid: t.tid, instrs, labels, registers: t.registers.clone() }
}

/// Registers live at `pc` of `t`.
pub fn live_registers(info: &ThreadLoops, pc: usize) -> Vec<Reg> {
    info.live_in[pc].iter().enumerate().filter(|(_, &l)| l).map(|(r, _)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    #[test]
    fn spinloop_detected() {
        let p = parse_program("locations x; thread 1 { store(x,1); } thread 2 { L: a = load(x); if (a = 0) goto L; }")
            .unwrap();
        let info = detect_spinloops(&p);
        assert!(info.thread(ThreadId(1)).loops.is_empty());
        let t2 = info.thread(ThreadId(2));
        assert_eq!(t2.loops.len(), 1);
        assert!(t2.loops[0].is_spinloop);
        assert_eq!(t2.loops[0].head, 0);
        assert!(info.acyclic_outside_spinloops());
        // `a` is overwritten before use at the head
        assert_eq!(live_registers(t2, 0), Vec::<Reg>::new());
    }

    #[test]
    fn writing_loop_is_not_a_spinloop() {
        let p = parse_program(
            "locations x; thread 1 { L: store(x,1); store(x,0); goto L; } thread 2 { L: a = load(x); if (a = 0) goto L; }",
        )
        .unwrap();
        let info = detect_spinloops(&p);
        assert!(!info.thread(ThreadId(1)).loops[0].is_spinloop);
        assert!(!info.acyclic_outside_spinloops());
    }

    #[test]
    fn irreducible_flow_flagged() {
        let p = parse_program(
            "locations x; thread 1 { a = load(x); if (a = 0) goto B; A: b = load(x); B: c = load(x); goto A; }",
        )
        .unwrap();
        assert!(detect_spinloops(&p).irreducible());
    }

    #[test]
    fn unroll_two_rounds() {
        let p = parse_program("locations x; thread 1 { L: a = FADD(x, 1); b = load(x); goto L; }").unwrap();
        let u = unroll_loops(&p, 2).unwrap();
        let t = &u.threads[0];
        assert_eq!(t.instrs.len(), 4);
        assert!(detect_spinloops(&u).threads[0].loops.is_empty());
        let s = t.initial_state().unwrap();
        assert_eq!(s.pc, 0);
    }
}
