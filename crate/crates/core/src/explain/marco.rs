//! Joint AXp/CXp enumeration with a map formula.
//!
//! The map solver holds one selector per soft literal and a blocking clause
//! per explanation found so far. Each model of the map is a seed: if the
//! seed's literals are satisfiable with the hard clauses it is grown to a
//! maximal satisfiable subset whose complement is a CXp, otherwise it is
//! shrunk to a minimal unsatisfiable subset, an AXp.

use super::{Calls, ExplainError, Explanation, ExplanationKind, Step};
use crate::abstraction::SoftLiterals;
use crate::cnf::{Lit, Var};
use crate::oracle::{CdclSolver, Phase, SatOracle, SolveOutcome, SolverConfig};

pub struct Enumeration<'a> {
    oracle: &'a mut dyn SatOracle,
    soft: &'a SoftLiterals,
    order: Vec<usize>,
    map: CdclSolver,
    limit: Option<usize>,
    emitted: usize,
    done: bool,
}

impl<'a> Enumeration<'a> {
    pub(super) fn new(oracle: &'a mut dyn SatOracle, soft: &'a SoftLiterals, order: &[usize], limit: Option<usize>) -> Self {
        let mut map = CdclSolver::new(SolverConfig { phase: Phase::AlwaysTrue, ..Default::default() });
        map.reserve_vars(soft.len() as u32);
        Enumeration { oracle, soft, order: order.to_vec(), map, limit, emitted: 0, done: false }
    }

    fn selector(i: usize) -> Var {
        Var::new(i as u32 + 1)
    }

    fn lits(&self, keep: &[bool]) -> Vec<Lit> {
        self.soft.entries().iter().zip(keep).filter(|(_, &k)| k).map(|(e, _)| e.lit).collect()
    }

    fn step(&mut self) -> Result<Option<Explanation>, ExplainError> {
        let seed = match self.map.solve(&[])? {
            SolveOutcome::Unsat(_) => return Ok(None),
            SolveOutcome::Sat(m) => (0..self.soft.len()).map(|i| m.value(Self::selector(i).pos())).collect::<Vec<_>>(),
        };
        let soft = self.soft;
        let order = self.order.clone();
        let mut keep = seed;
        let assumptions = self.lits(&keep);
        let mut calls = Calls::new(&mut *self.oracle);
        let mut certificate = Vec::new();
        match calls.solve(&assumptions)? {
            SolveOutcome::Sat(mut model) => {
                // Grow: literals the model already satisfies come for free.
                for &i in &order {
                    if keep[i] {
                        continue;
                    }
                    if model.value(soft.entries()[i].lit) {
                        keep[i] = true;
                        continue;
                    }
                    keep[i] = true;
                    let a: Vec<Lit> =
                        soft.entries().iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| e.lit).collect();
                    match calls.solve(&a)? {
                        SolveOutcome::Sat(m) => {
                            model = m;
                            certificate.push(Step { feature: soft.entries()[i].feature, sat: true });
                        }
                        SolveOutcome::Unsat(_) => {
                            keep[i] = false;
                            certificate.push(Step { feature: soft.entries()[i].feature, sat: false });
                        }
                    }
                }
                let stats = calls.finish();
                let block: Vec<Lit> = (0..soft.len()).filter(|&i| !keep[i]).map(|i| Self::selector(i).pos()).collect();
                self.map.add_clause(&block)?;
                let features = (0..soft.len()).filter(|&i| !keep[i]).map(|i| soft.entries()[i].feature).collect();
                Ok(Some(Explanation::new(ExplanationKind::Cxp, soft, features, stats, certificate)))
            }
            SolveOutcome::Unsat(core) => {
                // Shrink, starting from the core and refining with each new one.
                let mut in_set = vec![false; soft.len()];
                for &l in &core {
                    in_set[position(soft, l)] = true;
                }
                for &i in &order {
                    if !in_set[i] {
                        continue;
                    }
                    in_set[i] = false;
                    let a: Vec<Lit> =
                        soft.entries().iter().zip(&in_set).filter(|(_, &k)| k).map(|(e, _)| e.lit).collect();
                    match calls.solve(&a)? {
                        SolveOutcome::Unsat(core) => {
                            let mut refined = vec![false; soft.len()];
                            for &l in &core {
                                refined[position(soft, l)] = true;
                            }
                            in_set = refined;
                            certificate.push(Step { feature: soft.entries()[i].feature, sat: false });
                        }
                        SolveOutcome::Sat(_) => {
                            in_set[i] = true;
                            certificate.push(Step { feature: soft.entries()[i].feature, sat: true });
                        }
                    }
                }
                let stats = calls.finish();
                let block: Vec<Lit> = (0..soft.len()).filter(|&i| in_set[i]).map(|i| Self::selector(i).neg()).collect();
                self.map.add_clause(&block)?;
                let features = (0..soft.len()).filter(|&i| in_set[i]).map(|i| soft.entries()[i].feature).collect();
                Ok(Some(Explanation::new(ExplanationKind::Axp, soft, features, stats, certificate)))
            }
        }
    }
}

fn position(soft: &SoftLiterals, lit: Lit) -> usize {
    soft.entries().iter().position(|e| e.lit == lit).expect("core literal is a soft literal")
}

impl Iterator for Enumeration<'_> {
    type Item = Result<Explanation, ExplainError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.limit.is_some_and(|l| self.emitted >= l) {
            return None;
        }
        match self.step() {
            Ok(Some(e)) => {
                self.emitted += 1;
                Some(Ok(e))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
