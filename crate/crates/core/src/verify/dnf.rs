//! DNF formulas and their translation into majority-vote forests.
//!
//! Each term becomes a path-shaped tree voting `1` exactly when the term
//! holds, and `n - 1` constant trees voting `1` are added, so the forest of
//! `2n - 1` trees predicts `1` iff some term holds.

use thiserror::Error;

use crate::model::{FeatureSpec, Forest, Node, Split, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DnfError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("term {0} contains a variable and its negation")]
    Complementary(usize),
    #[error("term {term} mentions variable {var} but there are only {num_vars}")]
    VarOutOfRange { term: usize, var: usize, num_vars: usize },
    #[error("a DNF needs at least one term")]
    NoTerms,
    #[error("a DNF needs at least one variable")]
    NoVars,
    #[error("{0} variables is beyond the brute-force budget")]
    OverBudget(usize),
}

/// Disjunction of terms; a term is a conjunction of signed, 1-based
/// variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dnf {
    num_vars: usize,
    terms: Vec<Vec<i32>>,
}

impl Dnf {
    /// Literals inside a term are sorted by variable and deduplicated.
    pub fn new(num_vars: usize, terms: Vec<Vec<i32>>) -> Result<Self, DnfError> {
        if num_vars == 0 {
            return Err(DnfError::NoVars);
        }
        if terms.is_empty() {
            return Err(DnfError::NoTerms);
        }
        let mut clean = Vec::with_capacity(terms.len());
        for (t, mut term) in terms.into_iter().enumerate() {
            term.sort_by_key(|l| (l.unsigned_abs(), *l));
            term.dedup();
            if term.windows(2).any(|w| w[0] == -w[1]) {
                return Err(DnfError::Complementary(t));
            }
            if let Some(&l) = term.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > num_vars) {
                return Err(DnfError::VarOutOfRange { term: t, var: l.unsigned_abs() as usize, num_vars });
            }
            clean.push(term);
        }
        Ok(Dnf { num_vars, terms: clean })
    }

    /// One term per line as whitespace-separated signed integers. A lone `0`
    /// is the empty term; a trailing `0` ends a term; blank lines and lines
    /// starting with `c` or `#` are skipped. Without `num_vars` the largest
    /// variable mentioned is used.
    pub fn parse(text: &str, num_vars: Option<usize>) -> Result<Self, DnfError> {
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('#') {
                continue;
            }
            let mut lits = line
                .split_whitespace()
                .map(|tok| tok.parse::<i32>().map_err(|_| DnfError::Syntax { line: i + 1, msg: format!("bad literal `{tok}`") }))
                .collect::<Result<Vec<_>, _>>()?;
            if lits.last() == Some(&0) {
                lits.pop();
            }
            if lits.contains(&0) {
                return Err(DnfError::Syntax { line: i + 1, msg: "0 inside a term".into() });
            }
            terms.push(lits);
        }
        let inferred = terms.iter().flatten().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0);
        Dnf::new(num_vars.unwrap_or(inferred.max(1)), terms)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[Vec<i32>] {
        &self.terms
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.terms.iter().any(|t| t.iter().all(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
    }
}

impl std::fmt::Display for Dnf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in &self.terms {
            if t.is_empty() {
                writeln!(f, "0")?;
            } else {
                writeln!(f, "{}", t.iter().map(i32::to_string).collect::<Vec<_>>().join(" "))?;
            }
        }
        Ok(())
    }
}

/// Forest over binary features `x1..xm` with classes `"0"` and `"1"`.
pub fn reduce_dnf_to_rf(dnf: &Dnf) -> Forest {
    let features = (1..=dnf.num_vars()).map(|j| FeatureSpec::binary(format!("x{j}"))).collect();
    let mut trees: Vec<Tree> = dnf.terms().iter().map(|t| term_tree(t)).collect();
    trees.extend((1..dnf.terms().len()).map(|_| Tree::leaf(1)));
    Forest::new(features, vec!["0".into(), "1".into()], trees).expect("reduction yields a valid forest")
}

/// A path testing the literals in order; any deviation ends in class 0.
fn term_tree(term: &[i32]) -> Tree {
    let mut nodes = Vec::with_capacity(2 * term.len() + 1);
    for &l in term {
        let id = nodes.len();
        let (fail, next) = (id + 1, id + 2);
        let (left, right) = if l > 0 { (fail, next) } else { (next, fail) };
        nodes.push(Node::Internal { feature: l.unsigned_abs() as usize - 1, split: Split::Binary, left, right });
        nodes.push(Node::Leaf { class: 0 });
    }
    nodes.push(Node::Leaf { class: 1 });
    Tree::from_nodes(nodes).expect("path tree is well formed")
}

/// All subset-minimal sets of the assignment's literals that entail the
/// formula, each as sorted signed literals.
pub fn brute_prime_implicants(dnf: &Dnf, assignment: &[bool]) -> Result<Vec<Vec<i32>>, DnfError> {
    let m = dnf.num_vars();
    if m > 20 {
        return Err(DnfError::OverBudget(m));
    }
    // Agreement masks of falsifying assignments.
    let mut falsifying = Vec::new();
    let mut y = vec![false; m];
    for bits in 0u32..1 << m {
        for (j, v) in y.iter_mut().enumerate() {
            *v = bits >> j & 1 == 1;
        }
        if !dnf.eval(&y) {
            let agree = (0..m).filter(|&j| y[j] == assignment[j]).fold(0u32, |acc, j| acc | 1 << j);
            falsifying.push(agree);
        }
    }
    falsifying.sort_unstable();
    falsifying.dedup();
    let entails = |rho: u32| !falsifying.iter().any(|&a| a & rho == rho);
    let mut out = Vec::new();
    for rho in 0u32..1 << m {
        if entails(rho) && (0..m).filter(|&j| rho >> j & 1 == 1).all(|j| !entails(rho & !(1 << j))) {
            let lits = (0..m)
                .filter(|&j| rho >> j & 1 == 1)
                .map(|j| if assignment[j] { j as i32 + 1 } else { -(j as i32 + 1) })
                .collect();
            out.push(lits);
        }
    }
    out.sort();
    Ok(out)
}
