//! Abductive and contrastive explanations.
//!
//! With hard clauses H ("some other class wins") and one soft unit literal
//! per relevant feature, H together with all soft literals is unsatisfiable.
//! An AXp is a minimal unsatisfiable subset of the soft literals: fixing
//! those features alone already forces the prediction. A CXp is a minimal
//! correction set: freeing those features alone admits another class.

mod marco;
pub mod report;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::abstraction::{Abstraction, SoftLiterals};
use crate::cnf::Lit;
use crate::encoder::{encode, CnfEncoding, EncoderOptions};
use crate::model::{ClassId, FeatureId, Forest, Instance};
use crate::oracle::{Adapter, OracleError, OracleStats, SatOracle, SolveOutcome};

pub use marco::Enumeration;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("feature order: {0}")]
    Order(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExplanationKind {
    Axp,
    Cxp,
}

impl ExplanationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExplanationKind::Axp => "AXp",
            ExplanationKind::Cxp => "CXp",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplanationStats {
    pub sat_calls: u64,
    pub unsat_calls: u64,
    pub max_sat_time: Duration,
    pub max_unsat_time: Duration,
    pub total_time: Duration,
}

impl ExplanationStats {
    pub fn calls(&self) -> u64 {
        self.sat_calls + self.unsat_calls
    }
}

/// One tested feature and the verdict of the oracle call that tested it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub feature: FeatureId,
    pub sat: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub kind: ExplanationKind,
    /// Sorted feature indices.
    pub features: Vec<FeatureId>,
    /// The soft literals of those features.
    pub literals: Vec<Lit>,
    pub stats: ExplanationStats,
    /// The removals (AXp) or re-additions (CXp) tried, in order.
    pub certificate: Vec<Step>,
}

impl Explanation {
    pub fn feature_names<'f>(&self, forest: &'f Forest) -> Vec<&'f str> {
        self.features.iter().map(|&f| forest.features()[f].name.as_str()).collect()
    }

    /// `{a, b}` with feature names, or `∅`.
    pub fn display(&self, forest: &Forest) -> String {
        if self.features.is_empty() {
            "∅".into()
        } else {
            format!("{{{}}}", self.feature_names(forest).join(", "))
        }
    }

    fn new(kind: ExplanationKind, soft: &SoftLiterals, mut features: Vec<FeatureId>, stats: ExplanationStats, certificate: Vec<Step>) -> Self {
        features.sort_unstable();
        let literals = features.iter().map(|&f| soft.literal_of(f).expect("feature has a soft literal")).collect();
        Explanation { kind, features, literals, stats, certificate }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplainOptions {
    /// Feature priority. Deletion visits features in this order; the CXp
    /// search visits them in reverse. Unlisted features follow in
    /// ascending order.
    pub order: Vec<FeatureId>,
    pub adapter: Adapter,
    pub encoder: EncoderOptions,
}

/// Times oracle calls on behalf of one explanation.
struct Calls<'a> {
    oracle: &'a mut dyn SatOracle,
    stats: ExplanationStats,
    start: Instant,
}

impl<'a> Calls<'a> {
    fn new(oracle: &'a mut dyn SatOracle) -> Self {
        Calls { oracle, stats: ExplanationStats::default(), start: Instant::now() }
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError> {
        let t = Instant::now();
        let out = self.oracle.solve(assumptions)?;
        let dt = t.elapsed();
        if out.is_sat() {
            self.stats.sat_calls += 1;
            self.stats.max_sat_time = self.stats.max_sat_time.max(dt);
        } else {
            self.stats.unsat_calls += 1;
            self.stats.max_unsat_time = self.stats.max_unsat_time.max(dt);
        }
        Ok(out)
    }

    fn finish(mut self) -> ExplanationStats {
        self.stats.total_time = self.start.elapsed();
        self.stats
    }
}

fn assumptions(soft: &SoftLiterals, keep: &[bool]) -> Vec<Lit> {
    soft.entries().iter().zip(keep).filter(|(_, &k)| k).map(|(e, _)| e.lit).collect()
}

/// Deletion-based MUS over the soft literals: one oracle call per entry of
/// `order` (positions into `soft`).
pub fn extract_axp(oracle: &mut dyn SatOracle, soft: &SoftLiterals, order: &[usize]) -> Result<Explanation, ExplainError> {
    let mut calls = Calls::new(oracle);
    let mut keep = vec![true; soft.len()];
    let mut certificate = Vec::with_capacity(order.len());
    for &i in order {
        keep[i] = false;
        let sat = calls.solve(&assumptions(soft, &keep))?.is_sat();
        if sat {
            keep[i] = true;
        }
        certificate.push(Step { feature: soft.entries()[i].feature, sat });
    }
    let features = soft.entries().iter().zip(&keep).filter(|(_, &k)| k).map(|(e, _)| e.feature).collect();
    Ok(Explanation::new(ExplanationKind::Axp, soft, features, calls.finish(), certificate))
}

/// Linear-search MCS: starting with every soft literal dropped, re-adds
/// them in reverse `order`, keeping each one that leaves the formula
/// satisfiable. Returns `None` when no CXp exists, i.e. the hard clauses
/// alone are unsatisfiable.
pub fn extract_cxp(
    oracle: &mut dyn SatOracle,
    soft: &SoftLiterals,
    order: &[usize],
    hard_satisfiable: bool,
) -> Result<Option<Explanation>, ExplainError> {
    if !hard_satisfiable {
        return Ok(None);
    }
    let mut calls = Calls::new(oracle);
    let mut keep = vec![false; soft.len()];
    let mut certificate = Vec::with_capacity(order.len());
    for &i in order.iter().rev() {
        keep[i] = true;
        let sat = calls.solve(&assumptions(soft, &keep))?.is_sat();
        if !sat {
            keep[i] = false;
        }
        certificate.push(Step { feature: soft.entries()[i].feature, sat });
    }
    let features = soft.entries().iter().zip(&keep).filter(|(_, &k)| !k).map(|(e, _)| e.feature).collect();
    Ok(Some(Explanation::new(ExplanationKind::Cxp, soft, features, calls.finish(), certificate)))
}

/// Everything needed to explain one prediction.
pub struct Explainer<'f> {
    forest: &'f Forest,
    instance: Instance,
    abstraction: Abstraction,
    encoding: CnfEncoding,
    oracle: Box<dyn SatOracle>,
    order: Vec<usize>,
    hard_satisfiable: bool,
}

impl<'f> Explainer<'f> {
    /// Encodes the forest for the instance's prediction and loads the
    /// oracle. Two setup calls check that all soft literals together are
    /// unsatisfiable and whether the hard clauses alone are satisfiable.
    pub fn new(forest: &'f Forest, instance: &Instance, opts: &ExplainOptions) -> Result<Self, ExplainError> {
        let abstraction = Abstraction::build(forest);
        let encoding = encode(forest, &abstraction, instance, &opts.encoder);
        let order = resolve_order(forest, encoding.soft(), &opts.order)?;
        let mut oracle = opts.adapter.instantiate();
        oracle.add_cnf(encoding.cnf())?;
        if oracle.solve(&encoding.soft().literals())?.is_sat() {
            return Err(ExplainError::Internal(
                "the instance's own feature values admit another class; encoding and prediction disagree".into(),
            ));
        }
        let hard_satisfiable = oracle.solve(&[])?.is_sat();
        Ok(Explainer { forest, instance: instance.clone(), abstraction, encoding, oracle, order, hard_satisfiable })
    }

    pub fn forest(&self) -> &'f Forest {
        self.forest
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn prediction(&self) -> ClassId {
        self.encoding.target()
    }

    pub fn abstraction(&self) -> &Abstraction {
        &self.abstraction
    }

    pub fn encoding(&self) -> &CnfEncoding {
        &self.encoding
    }

    pub fn soft(&self) -> &SoftLiterals {
        self.encoding.soft()
    }

    /// Number of soft literals, i.e. features some split refers to.
    pub fn num_soft(&self) -> usize {
        self.encoding.soft().len()
    }

    /// Feature visiting order for deletion.
    pub fn order(&self) -> Vec<FeatureId> {
        self.order.iter().map(|&i| self.soft().entries()[i].feature).collect()
    }

    /// Whether some assignment of the features yields another class.
    pub fn prediction_mutable(&self) -> bool {
        self.hard_satisfiable
    }

    pub fn oracle_stats(&self) -> &OracleStats {
        self.oracle.stats()
    }

    pub fn extract_axp(&mut self) -> Result<Explanation, ExplainError> {
        extract_axp(self.oracle.as_mut(), self.encoding.soft(), &self.order)
    }

    /// `None` when the prediction is the same everywhere.
    pub fn extract_cxp(&mut self) -> Result<Option<Explanation>, ExplainError> {
        extract_cxp(self.oracle.as_mut(), self.encoding.soft(), &self.order, self.hard_satisfiable)
    }

    /// Streams all AXps and CXps, at most `limit` of them in total.
    pub fn enumerate(&mut self, limit: Option<usize>) -> Enumeration<'_> {
        Enumeration::new(self.oracle.as_mut(), self.encoding.soft(), &self.order, limit)
    }
}

/// Positions into `soft` following the requested feature priority.
fn resolve_order(forest: &Forest, soft: &SoftLiterals, requested: &[FeatureId]) -> Result<Vec<usize>, ExplainError> {
    let mut seen = vec![false; forest.num_features()];
    let mut order = Vec::with_capacity(soft.len());
    let position = |f: FeatureId| soft.entries().iter().position(|e| e.feature == f);
    for &f in requested {
        if f >= forest.num_features() {
            return Err(ExplainError::Order(format!("unknown feature index {f}")));
        }
        if std::mem::replace(&mut seen[f], true) {
            return Err(ExplainError::Order(format!("feature `{}` listed twice", forest.features()[f].name)));
        }
        if let Some(i) = position(f) {
            order.push(i);
        }
    }
    for (i, e) in soft.entries().iter().enumerate() {
        if !seen[e.feature] {
            order.push(i);
        }
    }
    Ok(order)
}

/// Parses a comma-separated list of feature names or indices.
pub fn parse_order(forest: &Forest, text: &str) -> Result<Vec<FeatureId>, ExplainError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            forest
                .feature_index(s)
                .or_else(|| s.parse::<usize>().ok().filter(|&i| i < forest.num_features()))
                .ok_or_else(|| ExplainError::Order(format!("unknown feature `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{heart_disease_forest, FeatureSpec, Tree, Value};

    fn running_instance(forest: &Forest) -> Instance {
        Instance::new(
            forest.features(),
            vec![Value::Binary(true), Value::Binary(false), Value::Binary(true), Value::Ordinal(70.0)],
        )
        .unwrap()
    }

    #[test]
    fn running_example() {
        let forest = heart_disease_forest();
        let v = running_instance(&forest);
        let mut ex = Explainer::new(&forest, &v, &ExplainOptions::default()).unwrap();
        assert_eq!(ex.prediction(), 1);
        let axp = ex.extract_axp().unwrap();
        assert_eq!(axp.feature_names(&forest), ["blocked-arteries", "chest-pain"]);
        assert_eq!(axp.stats.calls(), 4);
        assert_eq!((axp.stats.sat_calls, axp.stats.unsat_calls), (2, 2));
        assert_eq!(
            axp.certificate.iter().map(|s| s.sat).collect::<Vec<_>>(),
            vec![true, false, true, false]
        );
        let cxp = ex.extract_cxp().unwrap().unwrap();
        assert_eq!(cxp.feature_names(&forest), ["blocked-arteries"]);
        assert_eq!(cxp.stats.calls(), 4);
        assert_eq!(cxp.display(&forest), "{blocked-arteries}");
    }

    #[test]
    fn order_changes_which_cxp_is_found() {
        let forest = heart_disease_forest();
        let v = running_instance(&forest);
        let opts = ExplainOptions { order: vec![3, 2, 1, 0], ..Default::default() };
        let mut ex = Explainer::new(&forest, &v, &opts).unwrap();
        assert_eq!(ex.order(), vec![3, 2, 1, 0]);
        assert_eq!(ex.extract_axp().unwrap().feature_names(&forest), ["blocked-arteries", "chest-pain"]);
        assert_eq!(ex.extract_cxp().unwrap().unwrap().feature_names(&forest), ["chest-pain"]);
    }

    #[test]
    fn constant_forest() {
        let forest = Forest::new(
            vec![FeatureSpec::binary("a"), FeatureSpec::binary("b")],
            vec!["n".into(), "y".into()],
            vec![Tree::leaf(1), Tree::leaf(1)],
        )
        .unwrap();
        let v = Instance::new(forest.features(), vec![Value::Binary(true), Value::Binary(false)]).unwrap();
        let mut ex = Explainer::new(&forest, &v, &ExplainOptions::default()).unwrap();
        assert_eq!(ex.num_soft(), 0);
        let axp = ex.extract_axp().unwrap();
        assert!(axp.features.is_empty());
        assert_eq!(axp.display(&forest), "∅");
        assert!(ex.extract_cxp().unwrap().is_none());
        assert!(!ex.prediction_mutable());
    }

    #[test]
    fn parse_order_accepts_names_and_indices() {
        let forest = heart_disease_forest();
        assert_eq!(parse_order(&forest, "weight, 0").unwrap(), vec![3, 0]);
        assert!(parse_order(&forest, "height").is_err());
        let v = running_instance(&forest);
        let opts = ExplainOptions { order: vec![1, 1], ..Default::default() };
        assert!(matches!(Explainer::new(&forest, &v, &opts), Err(ExplainError::Order(_))));
    }
}
