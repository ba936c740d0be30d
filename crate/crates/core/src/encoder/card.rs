//! Cardinality constraints over literals.
//!
//! Two families are available: cardinality networks built from odd-even
//! merging (`Network`) and the sequential counter (`Sequential`). Both
//! produce unary count outputs `c_1, c_2, ...` where `c_i` stands for "at
//! least `i` inputs are true". Clauses can be emitted in the upward
//! direction (inputs force outputs), the downward direction (outputs force
//! inputs) or both.

use std::ops::Not;

use crate::cnf::{Cnf, Lit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardEncoding {
    Network,
    Sequential,
}

impl Default for CardEncoding {
    fn default() -> Self {
        if cfg!(feature = "seq-counter") {
            CardEncoding::Sequential
        } else {
            CardEncoding::Network
        }
    }
}

/// A literal or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    Const(bool),
    Lit(Lit),
}

impl Not for Wire {
    type Output = Wire;

    fn not(self) -> Wire {
        match self {
            Wire::Const(b) => Wire::Const(!b),
            Wire::Lit(l) => Wire::Lit(!l),
        }
    }
}

impl From<Lit> for Wire {
    fn from(l: Lit) -> Self {
        Wire::Lit(l)
    }
}

/// Which implications between inputs and outputs to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub up: bool,
    pub down: bool,
}

impl Direction {
    pub const UP: Direction = Direction { up: true, down: false };
    pub const DOWN: Direction = Direction { up: false, down: true };
    pub const BOTH: Direction = Direction { up: true, down: true };
}

/// Adds a clause over wires; true wires drop the clause, false ones are
/// skipped.
pub fn add_wire_clause(cnf: &mut Cnf, wires: &[Wire]) {
    let mut lits = Vec::with_capacity(wires.len());
    for &w in wires {
        match w {
            Wire::Const(true) => return,
            Wire::Const(false) => {}
            Wire::Lit(l) => lits.push(l),
        }
    }
    cnf.add_clause(lits);
}

struct Builder<'a> {
    cnf: &'a mut Cnf,
    dir: Direction,
}

impl Builder<'_> {
    fn fresh(&mut self) -> Wire {
        Wire::Lit(self.cnf.new_var().pos())
    }

    /// Two-comparator: returns (a or b, a and b).
    fn compare(&mut self, a: Wire, b: Wire) -> (Wire, Wire) {
        match (a, b) {
            (Wire::Const(false), x) | (x, Wire::Const(false)) => (x, Wire::Const(false)),
            (Wire::Const(true), x) | (x, Wire::Const(true)) => (Wire::Const(true), x),
            _ => {
                let hi = self.fresh();
                let lo = self.fresh();
                if self.dir.up {
                    add_wire_clause(self.cnf, &[!a, hi]);
                    add_wire_clause(self.cnf, &[!b, hi]);
                    add_wire_clause(self.cnf, &[!a, !b, lo]);
                }
                if self.dir.down {
                    add_wire_clause(self.cnf, &[!hi, a, b]);
                    add_wire_clause(self.cnf, &[!lo, a]);
                    add_wire_clause(self.cnf, &[!lo, b]);
                }
                (hi, lo)
            }
        }
    }

    /// Merges two sorted sequences of equal power-of-two length.
    fn merge(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        debug_assert_eq!(a.len(), b.len());
        if a.len() == 1 {
            let (hi, lo) = self.compare(a[0], b[0]);
            return vec![hi, lo];
        }
        let odd = |s: &[Wire]| s.iter().step_by(2).copied().collect::<Vec<_>>();
        let even = |s: &[Wire]| s.iter().skip(1).step_by(2).copied().collect::<Vec<_>>();
        let d = self.merge(&odd(a), &odd(b));
        let e = self.merge(&even(a), &even(b));
        let n = a.len();
        let mut out = Vec::with_capacity(2 * n);
        out.push(d[0]);
        for i in 0..n - 1 {
            let (hi, lo) = self.compare(d[i + 1], e[i]);
            out.push(hi);
            out.push(lo);
        }
        out.push(e[n - 1]);
        out
    }

    /// Sorts a power-of-two length sequence in decreasing order.
    fn sort(&mut self, a: &[Wire]) -> Vec<Wire> {
        if a.len() == 1 {
            return a.to_vec();
        }
        let (l, r) = a.split_at(a.len() / 2);
        let l = self.sort(l);
        let r = self.sort(r);
        self.merge(&l, &r)
    }

    /// First `n + 1` outputs of merging two sorted length-`n` sequences.
    fn simplified_merge(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        debug_assert_eq!(a.len(), b.len());
        if a.len() == 1 {
            let (hi, lo) = self.compare(a[0], b[0]);
            return vec![hi, lo];
        }
        let odd = |s: &[Wire]| s.iter().step_by(2).copied().collect::<Vec<_>>();
        let even = |s: &[Wire]| s.iter().skip(1).step_by(2).copied().collect::<Vec<_>>();
        let d = self.simplified_merge(&odd(a), &odd(b));
        let e = self.simplified_merge(&even(a), &even(b));
        let half = a.len() / 2;
        let mut out = Vec::with_capacity(a.len() + 1);
        out.push(d[0]);
        for i in 0..half {
            let (hi, lo) = self.compare(d[i + 1], e[i]);
            out.push(hi);
            out.push(lo);
        }
        out
    }

    /// First `k` sorted outputs of `a`, where `k` is a power of two and
    /// `a.len()` a multiple of `k`.
    fn card(&mut self, a: &[Wire], k: usize) -> Vec<Wire> {
        if a.len() == k {
            return self.sort(a);
        }
        let (l, r) = a.split_at(k);
        let d = self.card(l, k);
        let e = self.card(r, k);
        let mut out = self.simplified_merge(&d, &e);
        out.truncate(k);
        out
    }

    fn network(&mut self, inputs: &[Wire], needed: usize) -> Vec<Wire> {
        let n = inputs.len();
        let k = needed.max(1).next_power_of_two();
        let mut padded = inputs.to_vec();
        let target = if n <= k { n.max(1).next_power_of_two() } else { n.div_ceil(k) * k };
        padded.resize(target, Wire::Const(false));
        let mut out = if target <= k { self.sort(&padded) } else { self.card(&padded, k) };
        out.truncate(needed);
        out
    }

    fn sequential(&mut self, inputs: &[Wire], needed: usize) -> Vec<Wire> {
        // prev[j] holds "at least j+1 of the inputs seen so far".
        let mut prev = vec![Wire::Const(false); needed];
        for &x in inputs {
            let mut cur = Vec::with_capacity(needed);
            for j in 0..needed {
                let carry = if j == 0 { Wire::Const(true) } else { prev[j - 1] };
                cur.push(self.or_and(prev[j], x, carry));
            }
            prev = cur;
        }
        prev
    }

    /// Wire for `keep or (x and carry)`.
    fn or_and(&mut self, keep: Wire, x: Wire, carry: Wire) -> Wire {
        let conj = match (x, carry) {
            (Wire::Const(false), _) | (_, Wire::Const(false)) => Wire::Const(false),
            (Wire::Const(true), c) | (c, Wire::Const(true)) => c,
            _ => {
                let v = self.fresh();
                if self.dir.up {
                    add_wire_clause(self.cnf, &[!x, !carry, v]);
                }
                if self.dir.down {
                    add_wire_clause(self.cnf, &[!v, x]);
                    add_wire_clause(self.cnf, &[!v, carry]);
                }
                return self.or(keep, v);
            }
        };
        self.or(keep, conj)
    }

    fn or(&mut self, a: Wire, b: Wire) -> Wire {
        match (a, b) {
            (Wire::Const(false), x) | (x, Wire::Const(false)) => x,
            (Wire::Const(true), _) | (_, Wire::Const(true)) => Wire::Const(true),
            _ => {
                let v = self.fresh();
                if self.dir.up {
                    add_wire_clause(self.cnf, &[!a, v]);
                    add_wire_clause(self.cnf, &[!b, v]);
                }
                if self.dir.down {
                    add_wire_clause(self.cnf, &[!v, a, b]);
                }
                v
            }
        }
    }
}

/// Unary count outputs `c_1..c_needed` over `inputs`; fewer outputs than
/// requested never happens, missing ones are constant false.
pub fn count_outputs(
    cnf: &mut Cnf,
    inputs: &[Wire],
    needed: usize,
    dir: Direction,
    kind: CardEncoding,
) -> Vec<Wire> {
    if needed == 0 {
        return Vec::new();
    }
    let mut b = Builder { cnf, dir };
    let mut out = match kind {
        CardEncoding::Network => b.network(inputs, needed),
        CardEncoding::Sequential => b.sequential(inputs, needed),
    };
    out.resize(needed, Wire::Const(false));
    out
}

/// Asserts that at least `bound` of the inputs are true.
pub fn at_least(cnf: &mut Cnf, inputs: &[Wire], bound: usize, kind: CardEncoding) {
    if let Some(out) = at_least_output(cnf, inputs, bound, kind) {
        add_wire_clause(cnf, &[out]);
    }
}

/// A wire that implies "at least `bound` inputs are true"; `None` when the
/// bound is zero and the constraint is trivially true.
pub fn at_least_output(cnf: &mut Cnf, inputs: &[Wire], bound: usize, kind: CardEncoding) -> Option<Wire> {
    if bound == 0 {
        return None;
    }
    if bound > inputs.len() {
        return Some(Wire::Const(false));
    }
    let out = count_outputs(cnf, inputs, bound, Direction::DOWN, kind);
    Some(out[bound - 1])
}

/// Asserts that at most `bound` of the inputs are true.
pub fn at_most(cnf: &mut Cnf, inputs: &[Wire], bound: usize, kind: CardEncoding) {
    if bound >= inputs.len() {
        return;
    }
    if bound == 0 {
        for &x in inputs {
            add_wire_clause(cnf, &[!x]);
        }
        return;
    }
    let out = count_outputs(cnf, inputs, bound + 1, Direction::UP, kind);
    add_wire_clause(cnf, &[!out[bound]]);
}

/// At most one input true: pairwise up to four inputs, a gadget above.
pub fn at_most_one(cnf: &mut Cnf, inputs: &[Wire], kind: CardEncoding) {
    if inputs.len() <= 4 {
        for i in 0..inputs.len() {
            for j in i + 1..inputs.len() {
                add_wire_clause(cnf, &[!inputs[i], !inputs[j]]);
            }
        }
    } else {
        at_most(cnf, inputs, 1, kind);
    }
}

pub fn exactly_one(cnf: &mut Cnf, inputs: &[Wire], kind: CardEncoding) {
    add_wire_clause(cnf, inputs);
    at_most_one(cnf, inputs, kind);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CdclSolver, SatOracle};

    const KINDS: [CardEncoding; 2] = [CardEncoding::Network, CardEncoding::Sequential];

    /// Satisfiability of the gadget under a fixed input assignment.
    fn sat_under(cnf: &Cnf, inputs: &[Lit], bits: u32) -> bool {
        let mut s = CdclSolver::default();
        s.add_cnf(cnf).unwrap();
        let assumptions: Vec<Lit> =
            inputs.iter().enumerate().map(|(i, &l)| if bits >> i & 1 == 1 { l } else { !l }).collect();
        s.solve(&assumptions).unwrap().is_sat()
    }

    fn check(build: impl Fn(&mut Cnf, &[Wire]), pred: impl Fn(usize) -> bool, n: usize) {
        let mut cnf = Cnf::with_vars(n as u32);
        let inputs: Vec<Lit> = (1..=n as u32).map(|v| Lit::from_dimacs(v as i32)).collect();
        let wires: Vec<Wire> = inputs.iter().map(|&l| l.into()).collect();
        build(&mut cnf, &wires);
        for bits in 0..1u32 << n {
            let count = bits.count_ones() as usize;
            assert_eq!(sat_under(&cnf, &inputs, bits), pred(count), "n={n} bits={bits:b}");
        }
    }

    #[test]
    fn at_least_exhaustive() {
        for kind in KINDS {
            for n in 0..=8 {
                for b in 0..=n + 1 {
                    check(|c, w| at_least(c, w, b, kind), |k| k >= b, n);
                }
            }
        }
    }

    #[test]
    fn at_most_exhaustive() {
        for kind in KINDS {
            for n in 0..=8 {
                for b in 0..=n {
                    check(|c, w| at_most(c, w, b, kind), |k| k <= b, n);
                }
            }
        }
    }

    #[test]
    fn exactly_one_exhaustive() {
        for kind in KINDS {
            for n in 1..=8 {
                check(|c, w| exactly_one(c, w, kind), |k| k == 1, n);
            }
        }
    }

    #[test]
    fn both_directions_define_the_count() {
        for kind in KINDS {
            for n in 1..=6 {
                let mut cnf = Cnf::with_vars(n as u32);
                let inputs: Vec<Lit> = (1..=n as i32).map(Lit::from_dimacs).collect();
                let wires: Vec<Wire> = inputs.iter().map(|&l| l.into()).collect();
                let out = count_outputs(&mut cnf, &wires, n, Direction::BOTH, kind);
                for bits in 0..1u32 << n {
                    let count = bits.count_ones() as usize;
                    for (i, &o) in out.iter().enumerate() {
                        let Wire::Lit(o) = o else { continue };
                        let mut s = CdclSolver::default();
                        s.add_cnf(&cnf).unwrap();
                        let mut a: Vec<Lit> = inputs
                            .iter()
                            .enumerate()
                            .map(|(j, &l)| if bits >> j & 1 == 1 { l } else { !l })
                            .collect();
                        a.push(if count > i { !o } else { o });
                        assert!(!s.solve(&a).unwrap().is_sat(), "{kind:?} n={n} bits={bits:b} out={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_inputs() {
        for kind in KINDS {
            let mut cnf = Cnf::with_vars(2);
            let w = [Wire::Const(true), Wire::Lit(Lit::from_dimacs(1)), Wire::Const(false), Wire::Lit(Lit::from_dimacs(2))];
            at_least(&mut cnf, &w, 2, kind);
            let inputs = [Lit::from_dimacs(1), Lit::from_dimacs(2)];
            for bits in 0..4 {
                assert_eq!(sat_under(&cnf, &inputs, bits), bits != 0);
            }
        }
    }

    #[test]
    fn small_amo_is_pairwise() {
        let mut cnf = Cnf::with_vars(2);
        exactly_one(&mut cnf, &[Lit::from_dimacs(1).into(), Lit::from_dimacs(2).into()], CardEncoding::Network);
        let clauses: Vec<Vec<i32>> =
            cnf.clauses().iter().map(|c| c.iter().map(|l| l.to_dimacs()).collect()).collect();
        assert_eq!(clauses, vec![vec![1, 2], vec![-1, -2]]);
    }
}
