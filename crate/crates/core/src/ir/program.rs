use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{EventLabel, Loc, ThreadId, Value};

/// Index into a thread's register table.
pub type Reg = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Le,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    Reg(Reg),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Comparisons yield 1 or 0; arithmetic wraps.
    pub fn eval(&self, regs: &[Value]) -> Value {
        match self {
            Expr::Const(v) => *v,
            Expr::Reg(r) => regs[*r],
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(regs), b.eval(regs));
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Eq => (a == b) as Value,
                    BinOp::Ne => (a != b) as Value,
                    BinOp::Lt => (a < b) as Value,
                    BinOp::Le => (a <= b) as Value,
                }
            }
        }
    }

    pub fn regs_used(&self, out: &mut Vec<Reg>) {
        match self {
            Expr::Const(_) => {}
            Expr::Reg(r) => out.push(*r),
            Expr::Bin(_, a, b) => {
                a.regs_used(out);
                b.regs_used(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    Load { dst: Reg, loc: Loc },
    Store { loc: Loc, val: Expr },
    Fadd { dst: Option<Reg>, loc: Loc, val: Expr },
    /// Success emits `RMW(loc, expected, new)`, failure a plain read of a
    /// different value. The register receives the value read.
    Cas { dst: Option<Reg>, loc: Loc, expected: Expr, new: Expr },
    Swap { dst: Option<Reg>, loc: Loc, val: Expr },
    Assign { dst: Reg, val: Expr },
    Branch { cond: Expr, target: usize },
    Goto { target: usize },
    Halt,
}

impl Instruction {
    pub fn is_silent(&self) -> bool {
        matches!(self, Instruction::Assign { .. } | Instruction::Branch { .. } | Instruction::Goto { .. })
    }

    pub fn loc(&self) -> Option<Loc> {
        match self {
            Instruction::Load { loc, .. }
            | Instruction::Store { loc, .. }
            | Instruction::Fadd { loc, .. }
            | Instruction::Cas { loc, .. }
            | Instruction::Swap { loc, .. } => Some(*loc),
            _ => None,
        }
    }

    /// Instructions that emit a write on every execution.
    pub fn always_writes(&self) -> bool {
        matches!(self, Instruction::Store { .. } | Instruction::Fadd { .. } | Instruction::Swap { .. })
    }

    pub fn def(&self) -> Option<Reg> {
        match self {
            Instruction::Load { dst, .. } | Instruction::Assign { dst, .. } => Some(*dst),
            Instruction::Fadd { dst, .. } | Instruction::Cas { dst, .. } | Instruction::Swap { dst, .. } => *dst,
            _ => None,
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        let mut out = Vec::new();
        match self {
            Instruction::Store { val, .. }
            | Instruction::Fadd { val, .. }
            | Instruction::Swap { val, .. }
            | Instruction::Assign { val, .. } => val.regs_used(&mut out),
            Instruction::Cas { expected, new, .. } => {
                expected.regs_used(&mut out);
                new.regs_used(&mut out);
            }
            Instruction::Branch { cond, .. } => cond.regs_used(&mut out),
            Instruction::Load { .. } | Instruction::Goto { .. } | Instruction::Halt => {}
        }
        out
    }

    /// Control-flow successors; `len` stands for falling off the end.
    pub fn successors(&self, pc: usize) -> Vec<usize> {
        match self {
            Instruction::Halt => vec![],
            Instruction::Goto { target } => vec![*target],
            Instruction::Branch { target, .. } => {
                if *target == pc + 1 {
                    vec![pc + 1]
                } else {
                    vec![pc + 1, *target]
                }
            }
            _ => vec![pc + 1],
        }
    }
}

/// Local state of one thread: program counter and register file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadState {
    pub pc: usize,
    pub regs: Vec<Value>,
}

const SILENT_STEP_LIMIT: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadProgram {
    pub tid: ThreadId,
    pub instrs: Vec<Instruction>,
    /// Label name to instruction index.
    pub labels: BTreeMap<String, usize>,
    pub registers: Vec<String>,
}

impl ThreadProgram {
    pub fn reg(&self, name: &str) -> Option<Reg> {
        self.registers.iter().position(|r| r == name)
    }

    /// The initial local state, with silent instructions already run.
    pub fn initial_state(&self) -> Result<ThreadState> {
        self.initial_state_traced(&mut |_, _| {})
    }

    /// Like [`initial_state`](Self::initial_state), reporting every program
    /// point passed through together with the register file there.
    pub fn initial_state_traced(&self, visit: &mut dyn FnMut(usize, &[Value])) -> Result<ThreadState> {
        self.settle(ThreadState { pc: 0, regs: vec![0; self.registers.len()] }, visit)
    }

    fn settle(&self, mut s: ThreadState, visit: &mut dyn FnMut(usize, &[Value])) -> Result<ThreadState> {
        for _ in 0..SILENT_STEP_LIMIT {
            visit(s.pc, &s.regs);
            match self.instrs.get(s.pc) {
                Some(Instruction::Assign { dst, val }) => {
                    s.regs[*dst] = val.eval(&s.regs);
                    s.pc += 1;
                }
                Some(Instruction::Goto { target }) => s.pc = *target,
                Some(Instruction::Branch { cond, target }) => {
                    s.pc = if cond.eval(&s.regs) != 0 { *target } else { s.pc + 1 };
                }
                _ => return Ok(s),
            }
        }
        Err(Error::SilentDivergence { tid: self.tid.0 })
    }

    pub fn is_terminated(&self, s: &ThreadState) -> bool {
        matches!(self.instrs.get(s.pc), None | Some(Instruction::Halt))
    }

    /// The memory instruction the thread is about to execute.
    pub fn pending(&self, s: &ThreadState) -> Option<&Instruction> {
        self.instrs.get(s.pc).filter(|i| !matches!(i, Instruction::Halt))
    }

    /// Labels the thread can emit next, reads ranging over `domain`.
    pub fn enabled_labels(&self, s: &ThreadState, domain: &[Value]) -> Vec<EventLabel> {
        let Some(instr) = self.pending(s) else { return vec![] };
        match instr {
            Instruction::Load { loc, .. } => {
                domain.iter().map(|&val| EventLabel::Read { loc: *loc, val }).collect()
            }
            Instruction::Store { loc, val } => vec![EventLabel::Write { loc: *loc, val: val.eval(&s.regs) }],
            Instruction::Fadd { loc, val, .. } => {
                let d = val.eval(&s.regs);
                domain
                    .iter()
                    .map(|&r| EventLabel::Rmw { loc: *loc, read: r, write: r.wrapping_add(d) })
                    .collect()
            }
            Instruction::Swap { loc, val, .. } => {
                let w = val.eval(&s.regs);
                domain.iter().map(|&r| EventLabel::Rmw { loc: *loc, read: r, write: w }).collect()
            }
            Instruction::Cas { loc, expected, new, .. } => {
                let (e, n) = (expected.eval(&s.regs), new.eval(&s.regs));
                let mut out: Vec<EventLabel> = domain
                    .iter()
                    .filter(|&&v| v != e)
                    .map(|&val| EventLabel::Read { loc: *loc, val })
                    .collect();
                out.push(EventLabel::Rmw { loc: *loc, read: e, write: n });
                out
            }
            _ => unreachable!("settled states only stop at memory instructions"),
        }
    }

    /// The label the pending instruction emits when it reads `v`.
    pub fn label_for_read(&self, s: &ThreadState, v: Value) -> Option<EventLabel> {
        let instr = self.pending(s)?;
        Some(match instr {
            Instruction::Load { loc, .. } => EventLabel::Read { loc: *loc, val: v },
            Instruction::Fadd { loc, val, .. } => {
                EventLabel::Rmw { loc: *loc, read: v, write: v.wrapping_add(val.eval(&s.regs)) }
            }
            Instruction::Swap { loc, val, .. } => EventLabel::Rmw { loc: *loc, read: v, write: val.eval(&s.regs) },
            Instruction::Cas { loc, expected, new, .. } => {
                if v == expected.eval(&s.regs) {
                    EventLabel::Rmw { loc: *loc, read: v, write: new.eval(&s.regs) }
                } else {
                    EventLabel::Read { loc: *loc, val: v }
                }
            }
            Instruction::Store { .. } => return None,
            _ => unreachable!(),
        })
    }

    pub fn step(&self, s: &ThreadState, label: &EventLabel) -> Result<ThreadState> {
        self.step_traced(s, label, &mut |_, _| {})
    }

    /// Execute the pending instruction with `label`, then run silent
    /// instructions, reporting every program point passed through.
    pub fn step_traced(
        &self,
        s: &ThreadState,
        label: &EventLabel,
        visit: &mut dyn FnMut(usize, &[Value]),
    ) -> Result<ThreadState> {
        let not_enabled = || Error::NotEnabled(format!("thread {} cannot emit {:?} at pc {}", self.tid, label, s.pc));
        let instr = self.pending(s).ok_or_else(not_enabled)?;
        let mut next = s.clone();
        let set = |regs: &mut Vec<Value>, dst: &Option<Reg>, v: Value| {
            if let Some(d) = dst {
                regs[*d] = v;
            }
        };
        match (instr, *label) {
            (Instruction::Load { dst, loc }, EventLabel::Read { loc: l, val }) if *loc == l => {
                next.regs[*dst] = val;
            }
            (Instruction::Store { loc, val }, EventLabel::Write { loc: l, val: v })
                if *loc == l && val.eval(&s.regs) == v => {}
            (Instruction::Fadd { dst, loc, val }, EventLabel::Rmw { loc: l, read, write })
                if *loc == l && read.wrapping_add(val.eval(&s.regs)) == write =>
            {
                set(&mut next.regs, dst, read);
            }
            (Instruction::Swap { dst, loc, val }, EventLabel::Rmw { loc: l, read, write })
                if *loc == l && val.eval(&s.regs) == write =>
            {
                set(&mut next.regs, dst, read);
            }
            (Instruction::Cas { dst, loc, expected, new }, EventLabel::Rmw { loc: l, read, write })
                if *loc == l && expected.eval(&s.regs) == read && new.eval(&s.regs) == write =>
            {
                set(&mut next.regs, dst, read);
            }
            (Instruction::Cas { dst, loc, expected, .. }, EventLabel::Read { loc: l, val })
                if *loc == l && expected.eval(&s.regs) != val =>
            {
                set(&mut next.regs, dst, val);
            }
            _ => return Err(not_enabled()),
        }
        next.pc += 1;
        self.settle(next, visit)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcurrentProgram {
    pub locations: Vec<String>,
    pub threads: Vec<ThreadProgram>,
    /// Reserved location backing `fence`, when the program uses one.
    pub fence_loc: Option<Loc>,
}

/// Local states of all threads.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProgramState {
    pub threads: Vec<ThreadState>,
}

impl ConcurrentProgram {
    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn num_locs(&self) -> usize {
        self.locations.len()
    }

    pub fn thread(&self, tid: ThreadId) -> &ThreadProgram {
        &self.threads[tid.index()]
    }

    pub fn thread_ids(&self) -> impl DoubleEndedIterator<Item = ThreadId> {
        (0..self.threads.len()).map(ThreadId::from_index)
    }

    pub fn loc(&self, name: &str) -> Option<Loc> {
        self.locations.iter().position(|l| l == name).map(|i| Loc(i as u16))
    }

    pub fn initial_state(&self) -> Result<ProgramState> {
        Ok(ProgramState { threads: self.threads.iter().map(|t| t.initial_state()).collect::<Result<_>>()? })
    }

    pub fn is_terminated(&self, s: &ProgramState) -> bool {
        self.threads.iter().zip(&s.threads).all(|(t, ts)| t.is_terminated(ts))
    }

    /// Every `(thread, label)` pair enabled at `s`, reads ranging over
    /// `domain`.
    pub fn enabled_labels(&self, s: &ProgramState, domain: &[Value]) -> Vec<(ThreadId, EventLabel)> {
        self.thread_ids()
            .flat_map(|tid| {
                self.thread(tid)
                    .enabled_labels(&s.threads[tid.index()], domain)
                    .into_iter()
                    .map(move |l| (tid, l))
            })
            .collect()
    }

    pub fn step(&self, s: &ProgramState, tid: ThreadId, label: &EventLabel) -> Result<ProgramState> {
        let t = tid.index();
        if t >= self.threads.len() {
            return Err(Error::NotEnabled(format!("no thread {tid}")));
        }
        let mut next = s.clone();
        next.threads[t] = self.threads[t].step(&s.threads[t], label)?;
        Ok(next)
    }

    /// Values that some store, swap or CAS could write when every register
    /// holds a constant of the program. FADD results are not included;
    /// callers needing them should close the set themselves.
    pub fn constant_values(&self) -> Vec<Value> {
        fn consts(e: &Expr, out: &mut Vec<Value>) {
            match e {
                Expr::Const(v) => out.push(*v),
                Expr::Reg(_) => {}
                Expr::Bin(_, a, b) => {
                    consts(a, out);
                    consts(b, out);
                }
            }
        }
        let mut out = vec![0];
        for t in &self.threads {
            for i in &t.instrs {
                match i {
                    Instruction::Store { val, .. } | Instruction::Swap { val, .. } => consts(val, &mut out),
                    Instruction::Cas { new, .. } => consts(new, &mut out),
                    _ => {}
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl fmt::Display for ConcurrentProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} threads over {{{}}}", self.threads.len(), self.locations.join(", "))
    }
}
