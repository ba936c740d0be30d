//! Assumption-based incremental SAT oracles.
//!
//! Clauses are added once and persist; each [`SatOracle::solve`] call takes
//! a fresh list of assumption literals. An unsatisfiable answer carries a
//! core: a subset of the assumptions that is already unsatisfiable together
//! with the clauses. Cores are not guaranteed to be minimal.

mod cdcl;
mod subprocess;

use std::time::Duration;

use thiserror::Error;

use crate::cnf::{Cnf, Lit};

pub use cdcl::{CdclSolver, Phase, SolverConfig};
pub use subprocess::SubprocessSolver;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("assumption {0} refers to an unallocated variable")]
    UnknownVariable(Lit),
    #[error("solver binary `{0}` could not be started: {1}")]
    MissingBinary(String, std::io::Error),
    #[error("solver I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver failed: {0}")]
    Failed(String),
    #[error("malformed solver output: {0}")]
    BadOutput(String),
}

/// A total assignment over the allocated variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Model { values }
    }

    pub fn value(&self, lit: Lit) -> bool {
        let v = self.values.get(lit.var().index() as usize - 1).copied().unwrap_or(false);
        v == lit.is_positive()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Model),
    /// The core is a subset of the assumptions passed to `solve`.
    Unsat(Vec<Lit>),
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveOutcome::Sat(_))
    }
}

/// Per-oracle call accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleStats {
    pub solve_calls: u64,
    pub sat_calls: u64,
    pub unsat_calls: u64,
    pub sat_time: Duration,
    pub unsat_time: Duration,
    pub max_sat_time: Duration,
    pub max_unsat_time: Duration,
}

impl OracleStats {
    pub fn record(&mut self, sat: bool, elapsed: Duration) {
        self.solve_calls += 1;
        if sat {
            self.sat_calls += 1;
            self.sat_time += elapsed;
            self.max_sat_time = self.max_sat_time.max(elapsed);
        } else {
            self.unsat_calls += 1;
            self.unsat_time += elapsed;
            self.max_unsat_time = self.max_unsat_time.max(elapsed);
        }
    }
}

pub trait SatOracle: Send {
    /// Makes sure variables `1..=n` exist.
    fn reserve_vars(&mut self, n: u32);

    fn num_vars(&self) -> u32;

    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), OracleError>;

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError>;

    fn stats(&self) -> &OracleStats;

    fn add_cnf(&mut self, cnf: &Cnf) -> Result<(), OracleError> {
        self.reserve_vars(cnf.num_vars());
        for clause in cnf.clauses() {
            self.add_clause(clause)?;
        }
        Ok(())
    }
}

impl<T: SatOracle + ?Sized> SatOracle for Box<T> {
    fn reserve_vars(&mut self, n: u32) {
        (**self).reserve_vars(n)
    }
    fn num_vars(&self) -> u32 {
        (**self).num_vars()
    }
    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), OracleError> {
        (**self).add_clause(clause)
    }
    fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError> {
        (**self).solve(assumptions)
    }
    fn stats(&self) -> &OracleStats {
        (**self).stats()
    }
}

/// Which oracle implementation to instantiate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Adapter {
    Embedded { seed: u64 },
    Subprocess { binary: String },
}

impl Default for Adapter {
    fn default() -> Self {
        Adapter::Embedded { seed: 0 }
    }
}

impl Adapter {
    pub fn instantiate(&self) -> Box<dyn SatOracle> {
        match self {
            Adapter::Embedded { seed } => Box::new(CdclSolver::new(SolverConfig { seed: *seed, ..Default::default() })),
            Adapter::Subprocess { binary } => Box::new(SubprocessSolver::new(binary.clone())),
        }
    }
}
