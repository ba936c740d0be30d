//! Propositional abstraction of the feature space.
//!
//! Only the thresholds and value subsets that occur in the forest matter for
//! its predictions, so each feature is replaced by a handful of boolean
//! variables:
//!
//! * binary feature: one variable, true iff the value is 1;
//! * categorical feature: one variable per domain value;
//! * ordinal feature with sorted thresholds `t_1 < ... < t_k` (pooled over
//!   all trees): one variable per interval `(-inf, t_1], (t_1, t_2], ...,
//!   (t_k, +inf)`.
//!
//! A *cell* picks one value, interval or bit per feature; every instance in
//! a cell gets the same prediction from every tree.

use std::fmt;

use thiserror::Error;

use crate::cnf::{Lit, Var};
use crate::model::{FeatureId, FeatureKind, Forest, Instance, Node, Split, Value};

/// Sorted, duplicate-free split thresholds per feature (empty for
/// non-ordinal features).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    per_feature: Vec<Vec<f64>>,
}

impl ThresholdTable {
    pub fn from_forest(forest: &Forest) -> Self {
        let mut per_feature = vec![Vec::new(); forest.num_features()];
        for tree in forest.trees() {
            for node in tree.nodes() {
                if let Node::Internal { feature, split: Split::Threshold(t), .. } = node {
                    per_feature[*feature].push(*t);
                }
            }
        }
        for ts in &mut per_feature {
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|a, b| a == b);
        }
        ThresholdTable { per_feature }
    }

    pub fn thresholds(&self, feature: FeatureId) -> &[f64] {
        &self.per_feature[feature]
    }

    /// Position of `t` in the feature's table.
    pub fn index_of(&self, feature: FeatureId, t: f64) -> Option<usize> {
        let ts = &self.per_feature[feature];
        let i = ts.partition_point(|&x| x < t);
        (i < ts.len() && ts[i] == t).then_some(i)
    }

    /// Index of the interval `(t_i, t_{i+1}]` that contains `x`.
    pub fn interval_of(&self, feature: FeatureId, x: f64) -> usize {
        self.per_feature[feature].partition_point(|&t| t < x)
    }

    /// Lower and upper bound of interval `i`, with infinities at the ends.
    pub fn interval_bounds(&self, feature: FeatureId, i: usize) -> (f64, f64) {
        let ts = &self.per_feature[feature];
        let lo = if i == 0 { f64::NEG_INFINITY } else { ts[i - 1] };
        let hi = if i < ts.len() { ts[i] } else { f64::INFINITY };
        (lo, hi)
    }
}

/// Variables standing for one feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureLayout {
    Binary { var: Var },
    /// One variable per domain value, in domain order.
    Categorical { values: Vec<Var> },
    /// One variable per interval; empty when the forest never splits on the
    /// feature.
    Ordinal { intervals: Vec<Var> },
}

impl FeatureLayout {
    /// Number of distinct cells along this feature.
    pub fn arity(&self) -> usize {
        match self {
            FeatureLayout::Binary { .. } => 2,
            FeatureLayout::Categorical { values } => values.len(),
            FeatureLayout::Ordinal { intervals } => intervals.len().max(1),
        }
    }

    /// Variables subject to an exactly-one domain constraint.
    pub fn one_hot_vars(&self) -> &[Var] {
        match self {
            FeatureLayout::Binary { .. } => &[],
            FeatureLayout::Categorical { values } => values,
            FeatureLayout::Ordinal { intervals } => intervals,
        }
    }

    /// The literal asserting that the feature sits at coordinate `i`.
    pub fn literal(&self, i: usize) -> Option<Lit> {
        match self {
            FeatureLayout::Binary { var } => Some(var.lit(i == 1)),
            FeatureLayout::Categorical { values } => Some(values[i].pos()),
            FeatureLayout::Ordinal { intervals } => intervals.get(i).map(|v| v.pos()),
        }
    }
}

/// The unit literal fixing one feature to its instance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftLiteral {
    pub feature: FeatureId,
    pub lit: Lit,
}

/// One soft literal per relevant feature, in feature order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SoftLiterals {
    entries: Vec<SoftLiteral>,
}

impl SoftLiterals {
    pub fn entries(&self) -> &[SoftLiteral] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureId> {
        self.entries.iter().map(|e| e.feature).collect()
    }

    pub fn literal_of(&self, feature: FeatureId) -> Option<Lit> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.lit)
    }

    pub fn feature_of(&self, lit: Lit) -> Option<FeatureId> {
        self.entries.iter().find(|e| e.lit == lit).map(|e| e.feature)
    }

    pub fn literals(&self) -> Vec<Lit> {
        self.entries.iter().map(|e| e.lit).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("abstract domain size overflows 64 bits")]
    DomainOverflow,
}

/// A point of the abstracted space: one coordinate per feature.
pub type Cell = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    thresholds: ThresholdTable,
    layouts: Vec<FeatureLayout>,
    relevant: Vec<bool>,
    num_vars: u32,
}

impl Abstraction {
    /// Lays out variables `1..=num_vars()` feature by feature.
    pub fn build(forest: &Forest) -> Self {
        let thresholds = ThresholdTable::from_forest(forest);
        let mut next = 0u32;
        let mut fresh = || {
            next += 1;
            Var::new(next)
        };
        let layouts = forest
            .features()
            .iter()
            .enumerate()
            .map(|(j, spec)| match spec.kind {
                FeatureKind::Binary => FeatureLayout::Binary { var: fresh() },
                FeatureKind::Categorical => {
                    FeatureLayout::Categorical { values: spec.values.iter().map(|_| fresh()).collect() }
                }
                FeatureKind::Ordinal => {
                    let k = thresholds.thresholds(j).len();
                    let n = if k == 0 { 0 } else { k + 1 };
                    FeatureLayout::Ordinal { intervals: (0..n).map(|_| fresh()).collect() }
                }
            })
            .collect();
        let mut relevant = vec![false; forest.num_features()];
        for tree in forest.trees() {
            for node in tree.nodes() {
                if let Node::Internal { feature, .. } = node {
                    relevant[*feature] = true;
                }
            }
        }
        Abstraction { thresholds, layouts, relevant, num_vars: next }
    }

    pub fn thresholds(&self) -> &ThresholdTable {
        &self.thresholds
    }

    pub fn layouts(&self) -> &[FeatureLayout] {
        &self.layouts
    }

    pub fn layout(&self, feature: FeatureId) -> &FeatureLayout {
        &self.layouts[feature]
    }

    pub fn num_features(&self) -> usize {
        self.layouts.len()
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Whether some node of the forest tests the feature.
    pub fn is_relevant(&self, feature: FeatureId) -> bool {
        self.relevant[feature]
    }

    pub fn relevant_features(&self) -> Vec<FeatureId> {
        (0..self.layouts.len()).filter(|&j| self.relevant[j]).collect()
    }

    /// Features no split refers to; they never appear in an explanation.
    pub fn irrelevant_features(&self) -> Vec<FeatureId> {
        (0..self.layouts.len()).filter(|&j| !self.relevant[j]).collect()
    }

    /// Coordinate of an instance value along one feature.
    pub fn coordinate(&self, feature: FeatureId, value: Value) -> usize {
        match value {
            Value::Binary(b) => usize::from(b),
            Value::Categorical(i) => i,
            Value::Ordinal(x) => match &self.layouts[feature] {
                FeatureLayout::Ordinal { intervals } if intervals.is_empty() => 0,
                _ => self.thresholds.interval_of(feature, x),
            },
        }
    }

    pub fn cell_of(&self, instance: &Instance) -> Cell {
        instance.values().iter().enumerate().map(|(j, &v)| self.coordinate(j, v)).collect()
    }

    /// The unit literals fixing every relevant feature to the instance value.
    pub fn instance_literals(&self, instance: &Instance) -> SoftLiterals {
        let entries = instance
            .values()
            .iter()
            .enumerate()
            .filter(|&(j, _)| self.relevant[j])
            .filter_map(|(j, &v)| {
                let lit = self.layouts[j].literal(self.coordinate(j, v))?;
                Some(SoftLiteral { feature: j, lit })
            })
            .collect();
        SoftLiterals { entries }
    }

    /// Literals pinning every feature to the given cell.
    pub fn cell_literals(&self, cell: &[usize]) -> Vec<Lit> {
        self.layouts.iter().zip(cell).filter_map(|(layout, &i)| layout.literal(i)).collect()
    }

    pub fn arities(&self) -> Vec<usize> {
        self.layouts.iter().map(FeatureLayout::arity).collect()
    }

    /// Number of cells: the product of per-feature arities.
    pub fn domain_size(&self) -> Result<u64, AbstractionError> {
        self.layouts
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l.arity() as u64))
            .ok_or(AbstractionError::DomainOverflow)
    }

    /// Human-readable meaning of an abstraction variable.
    pub fn describe_var(&self, forest: &Forest, var: Var) -> Option<String> {
        for (j, layout) in self.layouts.iter().enumerate() {
            let name = &forest.features()[j].name;
            match layout {
                FeatureLayout::Binary { var: v } if *v == var => return Some(format!("{name} = 1")),
                FeatureLayout::Categorical { values } => {
                    if let Some(i) = values.iter().position(|v| *v == var) {
                        return Some(format!("{name} = {}", forest.features()[j].values[i]));
                    }
                }
                FeatureLayout::Ordinal { intervals } => {
                    if let Some(i) = intervals.iter().position(|v| *v == var) {
                        let (lo, hi) = self.thresholds.interval_bounds(j, i);
                        return Some(format!("{name} in {}", IntervalDisplay(lo, hi)));
                    }
                }
                _ => {}
            }
        }
        None
    }
}

struct IntervalDisplay(f64, f64);

impl fmt::Display for IntervalDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.0.is_infinite() { "-inf".to_string() } else { self.0.to_string() };
        if self.1.is_infinite() {
            write!(f, "({lo}, +inf)")
        } else {
            write!(f, "({lo}, {}]", self.1)
        }
    }
}

/// Picks a concrete value inside each cell coordinate: the upper end of a
/// bounded interval, `lo + 1` for `(lo, +inf)` and 0 for the whole line.
pub fn representative(forest: &Forest, abstraction: &Abstraction, cell: &[usize]) -> Instance {
    let values = forest
        .features()
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec.kind {
            FeatureKind::Binary => Value::Binary(cell[j] == 1),
            FeatureKind::Categorical => Value::Categorical(cell[j]),
            FeatureKind::Ordinal => {
                let (lo, hi) = abstraction.thresholds.interval_bounds(j, cell[j]);
                Value::Ordinal(if hi.is_finite() {
                    hi
                } else if lo.is_finite() {
                    lo + 1.0
                } else {
                    0.0
                })
            }
        })
        .collect();
    Instance::new(forest.features(), values).expect("representative lies in the domain")
}
