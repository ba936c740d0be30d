//! Per-dataset explanation runs and their summary statistics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};

use super::{ExplainOptions, Explainer, Explanation, ExplanationKind};
use crate::model::{ClassId, Forest, Instance};
use crate::verify::{self, CellTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Axp,
    Cxp,
    Enumerate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Axp => "axp",
            Mode::Cxp => "cxp",
            Mode::Enumerate => "enumerate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub explain: ExplainOptions,
    /// Cap on explanations per instance when enumerating.
    pub limit: Option<usize>,
    /// Cross-check every explanation by cell enumeration.
    pub verify: bool,
    pub cell_budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Axp,
            explain: ExplainOptions::default(),
            limit: None,
            verify: false,
            cell_budget: verify::DEFAULT_CELL_BUDGET,
        }
    }
}

/// Outcome of the brute-force cross-check of one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Passed,
    Failed(String),
    Skipped(String),
}

#[derive(Debug, Clone)]
pub struct RowReport {
    pub index: usize,
    pub prediction: Option<ClassId>,
    pub explanations: Vec<Explanation>,
    /// No other class is reachable, so no CXp exists.
    pub immutable: bool,
    pub num_vars: u32,
    pub num_clauses: usize,
    /// Number of soft literals.
    pub num_soft: usize,
    pub time: Duration,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
}

impl RowReport {
    pub fn sat_calls(&self) -> u64 {
        self.explanations.iter().map(|e| e.stats.sat_calls).sum()
    }

    pub fn unsat_calls(&self) -> u64 {
        self.explanations.iter().map(|e| e.stats.unsat_calls).sum()
    }

    pub fn max_sat_time(&self) -> Duration {
        self.explanations.iter().map(|e| e.stats.max_sat_time).max().unwrap_or_default()
    }

    pub fn max_unsat_time(&self) -> Duration {
        self.explanations.iter().map(|e| e.stats.max_unsat_time).max().unwrap_or_default()
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none() && !matches!(self.verdict, Some(Verdict::Failed(_)))
    }
}

/// Explains one instance; failures end up in `error` rather than aborting.
pub fn explain_instance(forest: &Forest, index: usize, instance: &Instance, opts: &RunOptions) -> RowReport {
    let start = Instant::now();
    let mut row = RowReport {
        index,
        prediction: None,
        explanations: Vec::new(),
        immutable: false,
        num_vars: 0,
        num_clauses: 0,
        num_soft: 0,
        time: Duration::ZERO,
        verdict: None,
        error: None,
    };
    let result = (|| {
        let mut ex = Explainer::new(forest, instance, &opts.explain)?;
        row.prediction = Some(ex.prediction());
        row.num_vars = ex.encoding().num_vars();
        row.num_clauses = ex.encoding().num_clauses();
        row.num_soft = ex.num_soft();
        row.immutable = !ex.prediction_mutable();
        match opts.mode {
            Mode::Axp => row.explanations.push(ex.extract_axp()?),
            Mode::Cxp => row.explanations.extend(ex.extract_cxp()?),
            Mode::Enumerate => {
                for e in ex.enumerate(opts.limit) {
                    row.explanations.push(e?);
                }
            }
        }
        Ok::<_, super::ExplainError>(())
    })();
    row.time = start.elapsed();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    } else if opts.verify {
        row.verdict = Some(verify_row(forest, instance, &row, opts));
    }
    row
}

fn verify_row(forest: &Forest, instance: &Instance, row: &RowReport, opts: &RunOptions) -> Verdict {
    let table = match CellTable::build(forest, opts.cell_budget) {
        Ok(t) => t,
        Err(e) => return Verdict::Skipped(e.to_string()),
    };
    for e in &row.explanations {
        let ok = match e.kind {
            ExplanationKind::Axp => {
                let c = table.check_axp(instance, &e.features);
                c.sufficient && c.minimal
            }
            ExplanationKind::Cxp => {
                let c = table.check_cxp(instance, &e.features);
                c.valid && c.minimal
            }
        };
        if !ok {
            return Verdict::Failed(format!("{} {} rejected", e.kind.as_str(), e.display(forest)));
        }
    }
    if row.immutable && table.check_cxp(instance, &table.all_features()).valid {
        return Verdict::Failed("prediction reported immutable but another class is reachable".into());
    }
    Verdict::Passed
}

/// Table-style aggregate over successful rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub rows: usize,
    pub errors: usize,
    pub verify_failures: usize,
    pub avg_vars: f64,
    pub avg_clauses: f64,
    pub max_sat_time: Duration,
    pub max_unsat_time: Duration,
    pub avg_sat_calls: f64,
    pub avg_unsat_calls: f64,
    pub max_time: Duration,
    pub min_time: Duration,
    pub avg_time: Duration,
}

impl Aggregate {
    pub fn from_rows(rows: &[RowReport]) -> Self {
        let ok: Vec<&RowReport> = rows.iter().filter(|r| r.error.is_none()).collect();
        let n = ok.len();
        let mean = |f: &dyn Fn(&RowReport) -> f64| if n == 0 { 0.0 } else { ok.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
        let total: Duration = ok.iter().map(|r| r.time).sum();
        Aggregate {
            rows: rows.len(),
            errors: rows.len() - n,
            verify_failures: rows.iter().filter(|r| matches!(r.verdict, Some(Verdict::Failed(_)))).count(),
            avg_vars: mean(&|r| r.num_vars as f64),
            avg_clauses: mean(&|r| r.num_clauses as f64),
            max_sat_time: ok.iter().map(|r| r.max_sat_time()).max().unwrap_or_default(),
            max_unsat_time: ok.iter().map(|r| r.max_unsat_time()).max().unwrap_or_default(),
            avg_sat_calls: mean(&|r| r.sat_calls() as f64),
            avg_unsat_calls: mean(&|r| r.unsat_calls() as f64),
            max_time: ok.iter().map(|r| r.time).max().unwrap_or_default(),
            min_time: ok.iter().map(|r| r.time).min().unwrap_or_default(),
            avg_time: if n == 0 { Duration::ZERO } else { total / n as u32 },
        }
    }
}

/// All rows plus their aggregate.
#[derive(Debug, Clone)]
pub struct Report {
    pub mode: Mode,
    pub rows: Vec<RowReport>,
    pub aggregate: Aggregate,
}

impl Report {
    pub fn new(mode: Mode, mut rows: Vec<RowReport>) -> Self {
        rows.sort_by_key(|r| r.index);
        let aggregate = Aggregate::from_rows(&rows);
        Report { mode, rows, aggregate }
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(RowReport::succeeded)
    }
}

pub fn explain_dataset(forest: &Forest, instances: &[Instance], opts: &RunOptions) -> Report {
    let rows = instances.iter().enumerate().map(|(i, v)| explain_instance(forest, i, v, opts)).collect();
    Report::new(opts.mode, rows)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

pub const TABLE_COLUMNS: [&str; 9] = ["#var", "#cl", "MxS", "MxU", "#S", "#U", "Mx", "m", "avg"];

/// The aggregate as a two-line table with the usual column names.
pub fn render_table(agg: &Aggregate) -> String {
    let cells = [
        format!("{:.0}", agg.avg_vars),
        format!("{:.0}", agg.avg_clauses),
        format!("{:.3}", secs(agg.max_sat_time)),
        format!("{:.3}", secs(agg.max_unsat_time)),
        format!("{:.1}", agg.avg_sat_calls),
        format!("{:.1}", agg.avg_unsat_calls),
        format!("{:.3}", secs(agg.max_time)),
        format!("{:.3}", secs(agg.min_time)),
        format!("{:.3}", secs(agg.avg_time)),
    ];
    let widths: Vec<usize> = TABLE_COLUMNS.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
    let line = |items: &mut dyn Iterator<Item = &str>| {
        items.zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
    };
    let mut out = line(&mut TABLE_COLUMNS.iter().copied());
    out.push('\n');
    out.push_str(&line(&mut cells.iter().map(String::as_str)));
    out.push('\n');
    let _ = writeln!(out, "rows {}  errors {}  verify failures {}", agg.rows, agg.errors, agg.verify_failures);
    out
}

/// One human-readable line per explanation, or per failed row.
pub fn render_rows(forest: &Forest, report: &Report) -> String {
    let mut out = String::new();
    for row in &report.rows {
        if let Some(e) = &row.error {
            let _ = writeln!(out, "{}: error: {e}", row.index);
            continue;
        }
        let class = row.prediction.map(|c| forest.classes()[c].as_str()).unwrap_or("?");
        if row.explanations.is_empty() {
            let _ = writeln!(out, "{}: {class} CXp none (prediction immutable)", row.index);
        }
        for e in &row.explanations {
            let _ = writeln!(out, "{}: {class} {} {}", row.index, e.kind.as_str(), e.display(forest));
        }
        match &row.verdict {
            Some(Verdict::Failed(msg)) => {
                let _ = writeln!(out, "{}: verification failed: {msg}", row.index);
            }
            Some(Verdict::Skipped(msg)) => {
                let _ = writeln!(out, "{}: verification skipped: {msg}", row.index);
            }
            _ => {}
        }
    }
    out
}

fn explanation_json(forest: &Forest, e: &Explanation) -> Json {
    json!({
        "kind": e.kind.as_str(),
        "features": e.feature_names(forest),
        "literals": e.literals.iter().map(|l| l.to_dimacs()).collect::<Vec<_>>(),
        "sat_calls": e.stats.sat_calls,
        "unsat_calls": e.stats.unsat_calls,
        "max_sat_time": secs(e.stats.max_sat_time),
        "max_unsat_time": secs(e.stats.max_unsat_time),
        "time": secs(e.stats.total_time),
    })
}

pub fn row_json(forest: &Forest, row: &RowReport) -> Json {
    json!({
        "index": row.index,
        "prediction": row.prediction.map(|c| forest.classes()[c].clone()),
        "explanations": row.explanations.iter().map(|e| explanation_json(forest, e)).collect::<Vec<_>>(),
        "immutable": row.immutable,
        "vars": row.num_vars,
        "clauses": row.num_clauses,
        "m": row.num_soft,
        "time": secs(row.time),
        "verified": match &row.verdict {
            None => Json::Null,
            Some(Verdict::Passed) => json!(true),
            Some(Verdict::Failed(_)) => json!(false),
            Some(Verdict::Skipped(_)) => json!("skipped"),
        },
        "error": row.error,
    })
}

pub fn aggregate_json(agg: &Aggregate) -> Json {
    json!({
        "rows": agg.rows,
        "errors": agg.errors,
        "verify_failures": agg.verify_failures,
        "#var": agg.avg_vars,
        "#cl": agg.avg_clauses,
        "MxS": secs(agg.max_sat_time),
        "MxU": secs(agg.max_unsat_time),
        "#S": agg.avg_sat_calls,
        "#U": agg.avg_unsat_calls,
        "Mx": secs(agg.max_time),
        "m": secs(agg.min_time),
        "avg": secs(agg.avg_time),
    })
}

/// JSON lines: one object per row, then `{"aggregate": ...}`.
pub fn to_jsonl(forest: &Forest, report: &Report) -> String {
    let mut out = String::new();
    for row in &report.rows {
        out.push_str(&row_json(forest, row).to_string());
        out.push('\n');
    }
    out.push_str(&json!({ "aggregate": aggregate_json(&report.aggregate) }).to_string());
    out.push('\n');
    out
}
