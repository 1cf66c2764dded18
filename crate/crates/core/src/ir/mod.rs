//! Programs as deterministic labelled transition systems, and their
//! textual format.

mod assertion;
mod cfg;
mod parse;
mod program;

pub use assertion::{Assertion, Atom};
pub use cfg::{analyze_thread, detect_spinloops, live_registers, unroll_loops, LoopRegion, SpinloopInfo, ThreadLoops};
pub use parse::{parse_program, FENCE_LOCATION};
pub use program::{BinOp, ConcurrentProgram, Expr, Instruction, ProgramState, Reg, ThreadProgram, ThreadState};
