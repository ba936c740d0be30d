//! Variables, literals, clause collections and DIMACS text.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::Not;

use thiserror::Error;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Self {
        assert!(index > 0 && index <= i32::MAX as u32, "variable index out of range: {index}");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }

    pub fn neg(self) -> Lit {
        Lit(-(self.0 as i32))
    }

    pub fn lit(self, positive: bool) -> Lit {
        if positive {
            self.pos()
        } else {
            self.neg()
        }
    }
}

/// A DIMACS-style literal: a non-zero signed variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn from_dimacs(value: i32) -> Self {
        assert!(value != 0 && value != i32::MIN, "invalid DIMACS literal {value}");
        Lit(value)
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A clause set together with a monotone variable counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(num_vars: u32) -> Self {
        Cnf { num_vars, clauses: Vec::new() }
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var::new(self.num_vars)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn add_clause(&mut self, clause: impl IntoIterator<Item = Lit>) {
        let clause: Vec<Lit> = clause.into_iter().collect();
        debug_assert!(
            clause.iter().all(|l| l.var().index() <= self.num_vars),
            "clause references an unallocated variable: {clause:?}"
        );
        self.clauses.push(clause);
    }

    /// Makes sure variables `1..=n` are allocated.
    pub fn reserve_vars(&mut self, n: u32) {
        self.num_vars = self.num_vars.max(n);
    }

    pub fn contains_empty_clause(&self) -> bool {
        self.clauses.iter().any(Vec::is_empty)
    }

    /// Evaluates the clause set under a total assignment indexed by `var - 1`.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| assignment[l.var().index() as usize - 1] == l.is_positive()))
    }
}

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Writes `p cnf` text. Comment lines come first, each prefixed with `c `.
pub fn write_dimacs<W: Write>(mut out: W, cnf: &Cnf, comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(out, "c {c}")?;
    }
    writeln!(out, "p cnf {} {}", cnf.num_vars(), cnf.num_clauses())?;
    let mut line = String::new();
    for clause in cnf.clauses() {
        line.clear();
        for lit in clause {
            line.push_str(&lit.to_dimacs().to_string());
            line.push(' ');
        }
        line.push('0');
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses DIMACS CNF. Comments are skipped; clauses may span lines. The
/// header's variable count is honoured even if some variables never occur.
pub fn read_dimacs<R: BufRead>(input: R) -> Result<Cnf, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut cnf = Cnf::new();
    let mut current = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
            continue;
        }
        if trimmed.starts_with('p') {
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(DimacsError::Syntax { line: lineno, msg: format!("bad header `{trimmed}`") });
            }
            let vars = parts[2]
                .parse()
                .map_err(|_| DimacsError::Syntax { line: lineno, msg: "bad variable count".into() })?;
            let clauses = parts[3]
                .parse()
                .map_err(|_| DimacsError::Syntax { line: lineno, msg: "bad clause count".into() })?;
            header = Some((vars, clauses));
            cnf.reserve_vars(vars);
            continue;
        }
        if header.is_none() {
            return Err(DimacsError::Syntax { line: lineno, msg: "clause before `p cnf` header".into() });
        }
        for tok in trimmed.split_whitespace() {
            let v: i32 = tok
                .parse()
                .map_err(|_| DimacsError::Syntax { line: lineno, msg: format!("bad literal `{tok}`") })?;
            if v == 0 {
                cnf.clauses.push(std::mem::take(&mut current));
            } else {
                if v == i32::MIN {
                    return Err(DimacsError::Syntax { line: lineno, msg: format!("bad literal `{tok}`") });
                }
                let lit = Lit::from_dimacs(v);
                cnf.reserve_vars(lit.var().index());
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        cnf.clauses.push(current);
    }
    match header {
        None => Err(DimacsError::Syntax { line: 0, msg: "missing `p cnf` header".into() }),
        Some((_, n)) if n != cnf.num_clauses() => Err(DimacsError::Syntax {
            line: 0,
            msg: format!("header announces {n} clauses, found {}", cnf.num_clauses()),
        }),
        Some(_) => Ok(cnf),
    }
}
