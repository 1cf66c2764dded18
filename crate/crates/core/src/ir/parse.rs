//! Parser for the litmus-like program format.
//!
//! ```text
//! locations x y;   // or: locations x, y;
//! thread 1 { store(x, 1); a = load(y); }
//! thread 2 { store(y, 1); b = load(x); }
//! ```

use std::collections::BTreeMap;

use super::program::{BinOp, ConcurrentProgram, Expr, Instruction, ThreadProgram};
use crate::error::{Error, Result};
use crate::graph::{Loc, ThreadId};

/// Name of the location that `fence` operates on.
pub const FENCE_LOCATION: &str = "__fence";

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "==", "!=", "<=", "&&", "||", "≠", "≤", ";", ":", "{", "}", "(", ")", ",", "=", "<", "+", "-",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let s: String = chars[i..].iter().take_while(|c| c.is_ascii_alphanumeric() || **c == '_').collect();
            i += s.len();
            col += s.len();
            out.push(Token { tok: Tok::Ident(s), line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let s: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
            i += s.len();
            col += s.len();
            let v = s.parse().map_err(|_| Error::Syntax { line, col: start_col, msg: format!("integer {s} out of range") })?;
            out.push(Token { tok: Tok::Int(v), line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                let n = sym.chars().count();
                i += n;
                col += n;
                out.push(Token { tok: Tok::Sym(sym), line, col: start_col });
            }
            None => return Err(Error::Syntax { line, col, msg: format!("unexpected character `{c}`") }),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Unresolved expression: identifiers are classified once all register
/// targets of the thread are known.
#[derive(Clone, Debug)]
enum RawExpr {
    Const(i64),
    Name(String, usize, usize),
    Bin(BinOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Clone, Debug)]
enum RawInstr {
    Load(String, Loc),
    Store(Loc, RawExpr),
    Fadd(String, Loc, RawExpr),
    Cas(String, Loc, RawExpr, RawExpr),
    Swap(String, Loc, RawExpr),
    Assign(String, RawExpr),
    Branch(RawExpr, String),
    Goto(String),
    Fence,
    Halt,
}

type Body = Vec<(Option<(String, usize, usize)>, RawInstr)>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    locations: Vec<String>,
    uses_fence: bool,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            let found = Self::describe(&self.peek().tok);
            self.err(format!("expected `{s}`, found {found}"))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, t.line, t.col))
            }
            other => self.err(format!("expected {what}, found {}", Self::describe(&other))),
        }
    }

    fn location(&mut self) -> Result<Loc> {
        let (name, line, col) = self.ident("a location")?;
        match self.locations.iter().position(|l| *l == name) {
            Some(i) => Ok(Loc(i as u16)),
            None => Err(Error::UndeclaredLocation { name, line, col }),
        }
    }

    fn program(&mut self) -> Result<(Vec<(u32, Body)>, usize)> {
        if !self.is_kw("locations") {
            return self.err("program must start with `locations`");
        }
        self.bump();
        loop {
            let (name, line, col) = self.ident("a location name")?;
            if name == FENCE_LOCATION {
                return Err(Error::Syntax { line, col, msg: format!("`{FENCE_LOCATION}` is reserved") });
            }
            if self.locations.contains(&name) {
                return Err(Error::Syntax { line, col, msg: format!("location `{name}` declared twice") });
            }
            self.locations.push(name);
            if self.is_sym(";") {
                self.bump();
                break;
            }
            if self.is_sym(",") {
                self.bump();
            }
        }
        let mut threads = Vec::new();
        while self.is_kw("thread") {
            self.bump();
            let t = self.peek().clone();
            let tid = match t.tok {
                Tok::Int(v) if v == threads.len() as i64 + 1 => v as u32,
                _ => return self.err(format!("expected thread number {}", threads.len() + 1)),
            };
            self.bump();
            self.expect_sym("{")?;
            let mut body = Vec::new();
            while !self.is_sym("}") {
                body.push(self.statement()?);
            }
            self.bump();
            threads.push((tid, body));
        }
        if threads.is_empty() {
            return self.err("expected at least one `thread`");
        }
        if self.peek().tok != Tok::Eof {
            let found = Self::describe(&self.peek().tok);
            return self.err(format!("expected `thread` or end of input, found {found}"));
        }
        Ok((threads, self.locations.len()))
    }

    fn statement(&mut self) -> Result<(Option<(String, usize, usize)>, RawInstr)> {
        let mut label = None;
        if matches!(self.peek().tok, Tok::Ident(_)) && *self.peek_at(1) == Tok::Sym(":") {
            let (name, line, col) = self.ident("a label")?;
            self.bump();
            label = Some((name, line, col));
        }
        let instr = self.instruction()?;
        self.expect_sym(";")?;
        Ok((label, instr))
    }

    fn instruction(&mut self) -> Result<RawInstr> {
        let (word, _, _) = match &self.peek().tok {
            Tok::Ident(_) => self.ident("an instruction")?,
            other => {
                let found = Self::describe(other);
                return self.err(format!("expected an instruction, found {found}"));
            }
        };
        match word.as_str() {
            "store" => {
                self.expect_sym("(")?;
                let loc = self.location()?;
                self.expect_sym(",")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(RawInstr::Store(loc, e))
            }
            "if" => {
                self.expect_sym("(")?;
                let cond = self.expr()?;
                self.expect_sym(")")?;
                if !self.is_kw("goto") {
                    return self.err("expected `goto` after condition");
                }
                self.bump();
                Ok(RawInstr::Branch(cond, self.ident("a label")?.0))
            }
            "goto" => Ok(RawInstr::Goto(self.ident("a label")?.0)),
            "fence" => {
                self.uses_fence = true;
                Ok(RawInstr::Fence)
            }
            "halt" => Ok(RawInstr::Halt),
            _ => {
                self.expect_sym("=")?;
                let op = match (&self.peek().tok, self.peek_at(1)) {
                    (Tok::Ident(s), Tok::Sym("(")) => Some(s.to_ascii_lowercase()),
                    _ => None,
                };
                match op.as_deref() {
                    Some("load") => {
                        self.bump();
                        self.expect_sym("(")?;
                        let loc = self.location()?;
                        self.expect_sym(")")?;
                        Ok(RawInstr::Load(word, loc))
                    }
                    Some(k @ ("fadd" | "swap")) => {
                        let is_fadd = k == "fadd";
                        self.bump();
                        self.expect_sym("(")?;
                        let loc = self.location()?;
                        self.expect_sym(",")?;
                        let e = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(if is_fadd { RawInstr::Fadd(word, loc, e) } else { RawInstr::Swap(word, loc, e) })
                    }
                    Some("cas") => {
                        self.bump();
                        self.expect_sym("(")?;
                        let loc = self.location()?;
                        self.expect_sym(",")?;
                        let e1 = self.expr()?;
                        self.expect_sym(",")?;
                        let e2 = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(RawInstr::Cas(word, loc, e1, e2))
                    }
                    _ => Ok(RawInstr::Assign(word, self.expr()?)),
                }
            }
        }
    }

    fn expr(&mut self) -> Result<RawExpr> {
        let lhs = self.additive()?;
        let op = match &self.peek().tok {
            Tok::Sym("=") | Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") | Tok::Sym("≠") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") | Tok::Sym("≤") => BinOp::Le,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(RawExpr::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<RawExpr> {
        let mut lhs = self.atom()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.atom()?;
            lhs = RawExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn atom(&mut self) -> Result<RawExpr> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(v) => {
                self.bump();
                Ok(RawExpr::Const(v))
            }
            Tok::Sym("-") => {
                self.bump();
                let inner = self.atom()?;
                Ok(RawExpr::Bin(BinOp::Sub, Box::new(RawExpr::Const(0)), Box::new(inner)))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(RawExpr::Name(name, t.line, t.col))
            }
            other => self.err(format!("expected an expression, found {}", Self::describe(&other))),
        }
    }
}

fn resolve_thread(
    tid: u32,
    body: Body,
    locations: &[String],
    fence_loc: Option<Loc>,
) -> Result<ThreadProgram> {
    let mut registers: Vec<String> = Vec::new();
    let mut labels = BTreeMap::new();
    for (i, (label, instr)) in body.iter().enumerate() {
        if let Some((l, line, col)) = label {
            if labels.insert(l.clone(), i).is_some() {
                return Err(Error::Syntax { line: *line, col: *col, msg: format!("label `{l}` defined twice") });
            }
        }
        let dst = match instr {
            RawInstr::Load(r, _)
            | RawInstr::Fadd(r, _, _)
            | RawInstr::Cas(r, _, _, _)
            | RawInstr::Swap(r, _, _)
            | RawInstr::Assign(r, _) => Some(r),
            _ => None,
        };
        if let Some(r) = dst {
            if locations.contains(r) {
                return Err(Error::Syntax { line: 0, col: 0, msg: format!("`{r}` is a location and cannot be assigned; use store") });
            }
            if !registers.contains(r) {
                registers.push(r.clone());
            }
        }
    }
    let reg = |name: &str| registers.iter().position(|r| r == name).expect("collected above");
    fn expr(e: &RawExpr, registers: &[String], locations: &[String], tid: u32) -> Result<Expr> {
        Ok(match e {
            RawExpr::Const(v) => Expr::Const(*v),
            RawExpr::Name(n, line, col) => match registers.iter().position(|r| r == n) {
                Some(i) => Expr::Reg(i),
                None if locations.contains(n) => {
                    return Err(Error::Syntax {
                        line: *line,
                        col: *col,
                        msg: format!("location `{n}` used as a value; read it with load"),
                    })
                }
                None => return Err(Error::UndeclaredRegister { name: n.clone(), tid }),
            },
            RawExpr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(expr(a, registers, locations, tid)?),
                Box::new(expr(b, registers, locations, tid)?),
            ),
        })
    }
    let target = |l: &str| -> Result<usize> {
        labels.get(l).copied().ok_or_else(|| Error::DanglingLabel { label: l.to_string(), tid })
    };
    let mut instrs = Vec::with_capacity(body.len());
    for (_, raw) in &body {
        let e = |x: &RawExpr| expr(x, &registers, locations, tid);
        instrs.push(match raw {
            RawInstr::Load(r, loc) => Instruction::Load { dst: reg(r), loc: *loc },
            RawInstr::Store(loc, v) => Instruction::Store { loc: *loc, val: e(v)? },
            RawInstr::Fadd(r, loc, v) => Instruction::Fadd { dst: Some(reg(r)), loc: *loc, val: e(v)? },
            RawInstr::Swap(r, loc, v) => Instruction::Swap { dst: Some(reg(r)), loc: *loc, val: e(v)? },
            RawInstr::Cas(r, loc, a, b) => {
                Instruction::Cas { dst: Some(reg(r)), loc: *loc, expected: e(a)?, new: e(b)? }
            }
            RawInstr::Assign(r, v) => Instruction::Assign { dst: reg(r), val: e(v)? },
            RawInstr::Branch(c, l) => Instruction::Branch { cond: e(c)?, target: target(l)? },
            RawInstr::Goto(l) => Instruction::Goto { target: target(l)? },
            RawInstr::Fence => Instruction::Swap {
                dst: None,
                loc: fence_loc.expect("fence location allocated when fences occur"),
                val: Expr::Const(0),
            },
            RawInstr::Halt => Instruction::Halt,
        });
    }
    Ok(ThreadProgram { tid: ThreadId(tid), instrs, labels, registers })
}

/// Parse a program. `fence` becomes a swap of 0 on a reserved location
/// appended after the declared ones.
pub fn parse_program(src: &str) -> Result<ConcurrentProgram> {
    let mut p = Parser { toks: lex(src)?, pos: 0, locations: Vec::new(), uses_fence: false };
    let (threads, _) = p.program()?;
    let mut locations = p.locations;
    let fence_loc = p.uses_fence.then(|| {
        locations.push(FENCE_LOCATION.to_string());
        Loc(locations.len() as u16 - 1)
    });
    let threads = threads
        .into_iter()
        .map(|(tid, body)| resolve_thread(tid, body, &locations, fence_loc))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcurrentProgram { locations, threads, fence_loc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EventLabel;

    #[test]
    fn spinloop_program_parses() {
        let p = parse_program(
            "locations x;\n thread 1 { store(x, 1); }\n thread 2 { L: a = load(x); if (a = 0) goto L; }",
        )
        .unwrap();
        assert_eq!(p.num_threads(), 2);
        assert_eq!(p.locations, vec!["x"]);
        assert_eq!(p.threads[1].labels["L"], 0);
        assert_eq!(p.threads[1].registers, vec!["a"]);
    }

    #[test]
    fn empty_thread_is_terminated_initially() {
        let p = parse_program("locations x; thread 1 { }").unwrap();
        let s = p.initial_state().unwrap();
        assert!(p.is_terminated(&s));
        assert!(p.enabled_labels(&s, &[0, 1]).is_empty());
    }

    #[test]
    fn errors_carry_kind_and_position() {
        let e = parse_program("locations x;\nthread 1 { store(y, 1); }").unwrap_err();
        assert_eq!(e, Error::UndeclaredLocation { name: "y".into(), line: 2, col: 18 });
        let e = parse_program("locations x; thread 1 { goto M; }").unwrap_err();
        assert_eq!(e.code(), "E_DANGLING_LABEL");
        let e = parse_program("locations x; thread 1 { store(x 1); }").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 1, col: 33, .. }), "{e:?}");
        let e = parse_program("locations x; thread 2 { }").unwrap_err();
        assert_eq!(e.code(), "E_SYNTAX");
        let e = parse_program("locations x; thread 1 { a = x; }").unwrap_err();
        assert_eq!(e.code(), "E_SYNTAX");
        let e = parse_program("locations x; thread 1 { store(x, b); }").unwrap_err();
        assert_eq!(e.code(), "E_UNDECLARED_REGISTER");
    }

    #[test]
    fn fence_becomes_swap_on_reserved_location() {
        let p = parse_program("locations x; thread 1 { store(x,1); fence; a = load(x); }").unwrap();
        let f = p.fence_loc.unwrap();
        assert_eq!(p.locations[f.index()], FENCE_LOCATION);
        let t = &p.threads[0];
        let s = t.initial_state().unwrap();
        let s = t.step(&s, &EventLabel::Write { loc: Loc(0), val: 1 }).unwrap();
        assert_eq!(t.enabled_labels(&s, &[0]), vec![EventLabel::Rmw { loc: f, read: 0, write: 0 }]);
    }

    #[test]
    fn expression_precedence() {
        let p = parse_program("locations x; thread 1 { a = 1 + 2 - 4 < 0; b = -(a) + 3 = 2; c = a ≠ b; }").unwrap();
        let s = p.threads[0].initial_state().unwrap();
        assert_eq!(s.regs, vec![1, 1, 0]);
    }
}
