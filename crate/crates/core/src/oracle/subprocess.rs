//! External solver driven through DIMACS files.
//!
//! Every call writes the accumulated clauses plus one unit clause per
//! assumption to a temporary file and runs `<binary> <file>`. The solver
//! must print SAT-competition output (`s SATISFIABLE` / `s UNSATISFIABLE`
//! and `v` lines). Unsat cores are recovered by deletion probing over the
//! assumptions, so each unsatisfiable call costs up to one extra run per
//! assumption. Nothing is kept between runs.

use std::io::{BufWriter, Write};
use std::process::Command;
use std::time::Instant;

use super::{Model, OracleError, OracleStats, SatOracle, SolveOutcome};
use crate::cnf::{write_dimacs, Cnf, Lit};

#[derive(Debug)]
pub struct SubprocessSolver {
    binary: String,
    cnf: Cnf,
    stats: OracleStats,
    runs: u64,
}

impl SubprocessSolver {
    pub fn new(binary: impl Into<String>) -> Self {
        SubprocessSolver { binary: binary.into(), cnf: Cnf::new(), stats: OracleStats::default(), runs: 0 }
    }

    /// Number of solver processes started, including core probes.
    pub fn runs(&self) -> u64 {
        self.runs
    }

    fn run(&mut self, assumptions: &[Lit]) -> Result<Option<Model>, OracleError> {
        self.runs += 1;
        let mut file = tempfile::Builder::new().prefix("rfxp-").suffix(".cnf").tempfile()?;
        {
            let mut cnf = self.cnf.clone();
            for &a in assumptions {
                cnf.add_clause([a]);
            }
            let mut w = BufWriter::new(file.as_file_mut());
            write_dimacs(&mut w, &cnf, &[])?;
            w.flush()?;
        }
        let output = Command::new(&self.binary)
            .arg(file.path())
            .output()
            .map_err(|e| OracleError::MissingBinary(self.binary.clone(), e))?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        parse_output(&stdout, self.cnf.num_vars()).map_err(|e| match output.status.code() {
            Some(10) | Some(20) | Some(0) => e,
            code => OracleError::Failed(format!(
                "`{}` exited with {code:?}: {}",
                self.binary,
                String::from_utf8_lossy(&output.stderr).trim()
            )),
        })
    }
}

/// Parses SAT-competition style output.
fn parse_output(stdout: &str, num_vars: u32) -> Result<Option<Model>, OracleError> {
    let mut status = None;
    let mut values = vec![false; num_vars as usize];
    let mut saw_values = false;
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = match rest.trim() {
                "SATISFIABLE" => Some(true),
                "UNSATISFIABLE" => Some(false),
                other => return Err(OracleError::BadOutput(format!("unknown status `{other}`"))),
            };
        } else if let Some(rest) = line.strip_prefix('v') {
            saw_values = true;
            for tok in rest.split_whitespace() {
                let v: i64 = tok.parse().map_err(|_| OracleError::BadOutput(format!("bad value `{tok}`")))?;
                if v == 0 {
                    continue;
                }
                let idx = v.unsigned_abs() as usize;
                if idx > values.len() {
                    return Err(OracleError::BadOutput(format!("value for unknown variable {idx}")));
                }
                values[idx - 1] = v > 0;
            }
        }
    }
    match status {
        None => Err(OracleError::BadOutput("no `s` status line".into())),
        Some(false) => Ok(None),
        Some(true) if !saw_values && num_vars > 0 => Err(OracleError::BadOutput("satisfiable without a model".into())),
        Some(true) => Ok(Some(Model::new(values))),
    }
}

impl SatOracle for SubprocessSolver {
    fn reserve_vars(&mut self, n: u32) {
        self.cnf.reserve_vars(n);
    }

    fn num_vars(&self) -> u32 {
        self.cnf.num_vars()
    }

    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), OracleError> {
        if let Some(max) = clause.iter().map(|l| l.var().index()).max() {
            self.cnf.reserve_vars(max);
        }
        self.cnf.add_clause(clause.iter().copied());
        Ok(())
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError> {
        if let Some(&a) = assumptions.iter().find(|a| a.var().index() > self.cnf.num_vars()) {
            return Err(OracleError::UnknownVariable(a));
        }
        let start = Instant::now();
        let outcome = match self.run(assumptions)? {
            Some(model) => SolveOutcome::Sat(model),
            None => {
                let mut core = assumptions.to_vec();
                let mut i = 0;
                while i < core.len() {
                    let mut candidate = core.clone();
                    candidate.remove(i);
                    if self.run(&candidate)?.is_none() {
                        core = candidate;
                    } else {
                        i += 1;
                    }
                }
                SolveOutcome::Unsat(core)
            }
        };
        self.stats.record(outcome.is_sat(), start.elapsed());
        Ok(outcome)
    }

    fn stats(&self) -> &OracleStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_competition_output() {
        let m = parse_output("c hi\ns SATISFIABLE\nv 1 -2\nv 3 0\n", 3).unwrap().unwrap();
        assert_eq!(m.as_slice(), &[true, false, true]);
        assert!(parse_output("s UNSATISFIABLE\n", 3).unwrap().is_none());
        assert!(parse_output("nothing\n", 3).is_err());
        assert!(parse_output("s SATISFIABLE\n", 3).is_err());
        assert!(parse_output("s SATISFIABLE\nv 9 0\n", 3).is_err());
    }

    #[test]
    fn missing_binary_is_an_error() {
        let mut s = SubprocessSolver::new("/nonexistent/solver");
        s.reserve_vars(1);
        assert!(matches!(s.solve(&[]), Err(OracleError::MissingBinary(..))));
    }
}
