//! Small reference DPLL solver speaking SAT-competition output.
//!
//! Usage: `rfxp-dpll <file.cnf>`. Exits with 10 (satisfiable) or 20
//! (unsatisfiable). It shares no code with the embedded CDCL solver and is
//! meant for differential testing on small formulas.

use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;

use rfxp::cnf::read_dimacs;

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: rfxp-dpll <file.cnf>");
        return ExitCode::from(1);
    };
    let cnf = match File::open(&path).map_err(|e| e.to_string()).and_then(|f| {
        read_dimacs(BufReader::new(f)).map_err(|e| e.to_string())
    }) {
        Ok(cnf) => cnf,
        Err(e) => {
            eprintln!("rfxp-dpll: {path}: {e}");
            return ExitCode::from(1);
        }
    };
    let clauses: Vec<Vec<i32>> = cnf.clauses().iter().map(|c| c.iter().map(|l| l.to_dimacs()).collect()).collect();
    let mut assign = vec![0i8; cnf.num_vars() as usize + 1];
    if dpll(&clauses, &mut assign) {
        println!("s SATISFIABLE");
        let vals: Vec<String> = (1..assign.len())
            .map(|v| if assign[v] >= 0 { v.to_string() } else { format!("-{v}") })
            .collect();
        println!("v {} 0", vals.join(" "));
        ExitCode::from(10)
    } else {
        println!("s UNSATISFIABLE");
        ExitCode::from(20)
    }
}

fn lit_value(assign: &[i8], lit: i32) -> i8 {
    let v = assign[lit.unsigned_abs() as usize];
    if lit > 0 {
        v
    } else {
        -v
    }
}

/// Plain recursive DPLL with unit propagation; `assign` holds 1/-1/0.
fn dpll(clauses: &[Vec<i32>], assign: &mut Vec<i8>) -> bool {
    let saved = assign.clone();
    loop {
        let mut changed = false;
        for clause in clauses {
            let mut unassigned = None;
            let mut count = 0;
            let mut satisfied = false;
            for &l in clause {
                match lit_value(assign, l) {
                    1 => {
                        satisfied = true;
                        break;
                    }
                    0 => {
                        count += 1;
                        unassigned = Some(l);
                    }
                    _ => {}
                }
            }
            if satisfied {
                continue;
            }
            match (count, unassigned) {
                (0, _) => {
                    *assign = saved;
                    return false;
                }
                (1, Some(l)) => {
                    assign[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let branch = clauses
        .iter()
        .filter(|c| !c.iter().any(|&l| lit_value(assign, l) == 1))
        .flat_map(|c| c.iter())
        .find(|&&l| lit_value(assign, l) == 0)
        .copied();
    let Some(l) = branch else {
        return true;
    };
    let v = l.unsigned_abs() as usize;
    for value in [1i8, -1] {
        assign[v] = value;
        if dpll(clauses, assign) {
            return true;
        }
        assign[v] = 0;
    }
    *assign = saved;
    false
}
