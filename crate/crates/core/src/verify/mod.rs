//! Brute-force ground truth over the abstracted feature space.
//!
//! Every cell is visited once, one representative instance per cell is
//! classified with [`Forest::predict`], and explanation claims are checked
//! against the resulting table. Nothing here touches the encoder or a SAT
//! oracle.

pub mod dnf;

use std::collections::HashMap;

use thiserror::Error;

use crate::abstraction::{representative, Abstraction, AbstractionError};
use crate::model::{ClassId, FeatureId, Forest, Instance};

pub const DEFAULT_CELL_BUDGET: u64 = 1 << 20;

/// Largest number of features the subset-lattice searches accept.
pub const MAX_LATTICE_FEATURES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("{cells} cells exceed the budget of {budget}")]
    OverBudget { cells: u64, budget: u64 },
    #[error(transparent)]
    Domain(#[from] AbstractionError),
    #[error("{0} features is more than the checker supports")]
    TooManyFeatures(usize),
}

/// Visits every cell of a mixed-radix space exactly once.
#[derive(Debug, Clone)]
pub struct CellEnumerator {
    arities: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl CellEnumerator {
    pub fn new(arities: Vec<usize>) -> Self {
        let next = arities.iter().all(|&a| a > 0).then(|| vec![0; arities.len()]);
        CellEnumerator { arities, next }
    }
}

impl Iterator for CellEnumerator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        for j in (0..succ.len()).rev() {
            succ[j] += 1;
            if succ[j] < self.arities[j] {
                self.next = Some(succ);
                return Some(cur);
            }
            succ[j] = 0;
        }
        Some(cur)
    }
}

type Mask = u128;

fn bit(f: FeatureId) -> Mask {
    1 << f
}

fn mask_of(features: &[FeatureId]) -> Mask {
    features.iter().fold(0, |m, &f| m | bit(f))
}

fn features_of(mask: Mask, universe: &[FeatureId]) -> Vec<FeatureId> {
    universe.iter().copied().filter(|&f| mask & bit(f) != 0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxpCheck {
    /// Every cell agreeing with the instance on the set gets its class.
    pub sufficient: bool,
    /// Dropping any single feature breaks sufficiency.
    pub minimal: bool,
    /// A counter-example to sufficiency, if any.
    pub counterexample: Option<Instance>,
    /// For each feature of the set, a counter-example once it is dropped.
    pub removal_witnesses: Vec<(FeatureId, Option<Instance>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CxpCheck {
    /// Some cell agreeing with the instance outside the set gets another class.
    pub valid: bool,
    /// Putting back any single feature makes it invalid.
    pub minimal: bool,
    pub witness: Option<Instance>,
}

/// Predictions of every cell.
pub struct CellTable<'f> {
    forest: &'f Forest,
    abstraction: Abstraction,
    arities: Vec<usize>,
    predictions: Vec<ClassId>,
}

/// Counter-cells of one instance, grouped by the features they agree on.
struct Counter {
    /// Agreement mask and the index of one cell with that mask.
    masks: Vec<(Mask, usize)>,
}

impl Counter {
    fn find(&self, mut pred: impl FnMut(Mask) -> bool) -> Option<usize> {
        self.masks.iter().find(|(m, _)| pred(*m)).map(|&(_, c)| c)
    }
}

impl<'f> CellTable<'f> {
    pub fn build(forest: &'f Forest, budget: u64) -> Result<Self, VerifyError> {
        if forest.num_features() > Mask::BITS as usize {
            return Err(VerifyError::TooManyFeatures(forest.num_features()));
        }
        let abstraction = Abstraction::build(forest);
        let cells = abstraction.domain_size()?;
        if cells > budget {
            return Err(VerifyError::OverBudget { cells, budget });
        }
        let arities = abstraction.arities();
        let predictions = CellEnumerator::new(arities.clone())
            .map(|cell| forest.predict(&representative(forest, &abstraction, &cell)))
            .collect();
        Ok(CellTable { forest, abstraction, arities, predictions })
    }

    pub fn num_cells(&self) -> usize {
        self.predictions.len()
    }

    pub fn abstraction(&self) -> &Abstraction {
        &self.abstraction
    }

    pub fn all_features(&self) -> Vec<FeatureId> {
        (0..self.forest.num_features()).collect()
    }

    /// Classes of all cells in enumeration order.
    pub fn predictions(&self) -> &[ClassId] {
        &self.predictions
    }

    fn cell_at(&self, mut index: usize) -> Vec<usize> {
        let mut cell = vec![0; self.arities.len()];
        for j in (0..cell.len()).rev() {
            cell[j] = index % self.arities[j];
            index /= self.arities[j];
        }
        cell
    }

    fn instance_at(&self, index: usize) -> Instance {
        representative(self.forest, &self.abstraction, &self.cell_at(index))
    }

    /// Whether any cell is predicted differently from `class`.
    pub fn has_other_class(&self, class: ClassId) -> bool {
        self.predictions.iter().any(|&p| p != class)
    }

    fn counter(&self, instance: &Instance) -> Counter {
        let target = self.forest.predict(instance);
        let home = self.abstraction.cell_of(instance);
        let mut first: HashMap<Mask, usize> = HashMap::new();
        for (idx, cell) in CellEnumerator::new(self.arities.clone()).enumerate() {
            if self.predictions[idx] == target {
                continue;
            }
            let mask = cell.iter().zip(&home).enumerate().filter(|(_, (a, b))| a == b).fold(0, |m, (j, _)| m | bit(j));
            first.entry(mask).or_insert(idx);
        }
        let mut masks: Vec<(Mask, usize)> = first.into_iter().collect();
        masks.sort_unstable_by_key(|&(_, idx)| idx);
        Counter { masks }
    }

    pub fn check_axp(&self, instance: &Instance, features: &[FeatureId]) -> AxpCheck {
        let counter = self.counter(instance);
        let fixed = mask_of(features);
        let breaks = |s: Mask| counter.find(|m| m & s == s);
        let counterexample = breaks(fixed).map(|i| self.instance_at(i));
        let removal_witnesses: Vec<(FeatureId, Option<Instance>)> = features
            .iter()
            .map(|&f| (f, breaks(fixed & !bit(f)).map(|i| self.instance_at(i))))
            .collect();
        AxpCheck {
            sufficient: counterexample.is_none(),
            minimal: removal_witnesses.iter().all(|(_, w)| w.is_some()),
            counterexample,
            removal_witnesses,
        }
    }

    pub fn check_cxp(&self, instance: &Instance, features: &[FeatureId]) -> CxpCheck {
        let counter = self.counter(instance);
        let all = mask_of(&self.all_features());
        let freed = mask_of(features);
        let reaches = |y: Mask| counter.find(|m| m | y == all);
        let witness = reaches(freed).map(|i| self.instance_at(i));
        let minimal = features.iter().all(|&f| reaches(freed & !bit(f)).is_none());
        CxpCheck { valid: witness.is_some(), minimal, witness }
    }

    fn relevant(&self) -> Result<Vec<FeatureId>, VerifyError> {
        let r = self.abstraction.relevant_features();
        if r.len() > MAX_LATTICE_FEATURES {
            return Err(VerifyError::TooManyFeatures(r.len()));
        }
        Ok(r)
    }

    /// Every AXp of the instance, by search over subsets of the relevant
    /// features.
    pub fn brute_axps(&self, instance: &Instance) -> Result<Vec<Vec<FeatureId>>, VerifyError> {
        let rel = self.relevant()?;
        let counter = self.counter(instance);
        let sufficient = |s: Mask| counter.find(|m| m & s == s).is_none();
        Ok(minimal_sets(&rel, sufficient))
    }

    /// Every CXp of the instance.
    pub fn brute_cxps(&self, instance: &Instance) -> Result<Vec<Vec<FeatureId>>, VerifyError> {
        let rel = self.relevant()?;
        let rel_mask = mask_of(&rel);
        let counter = self.counter(instance);
        let valid = |y: Mask| counter.find(|m| (m | y) & rel_mask == rel_mask).is_some();
        Ok(minimal_sets(&rel, valid))
    }
}

/// Subset-minimal members of an upward-closed family over `universe`,
/// sorted.
fn minimal_sets(universe: &[FeatureId], member: impl Fn(Mask) -> bool) -> Vec<Vec<FeatureId>> {
    let n = universe.len();
    let mut out = Vec::new();
    for sub in 0u64..1 << n {
        let mask = (0..n).filter(|&i| sub >> i & 1 == 1).fold(0, |m, i| m | bit(universe[i]));
        if member(mask) && (0..n).filter(|&i| sub >> i & 1 == 1).all(|i| !member(mask & !bit(universe[i]))) {
            out.push(features_of(mask, universe));
        }
    }
    out.sort();
    out
}

/// All subset-minimal hitting sets of `family` drawn from `universe`.
pub fn minimal_hitting_sets(family: &[Vec<FeatureId>], universe: &[FeatureId]) -> Vec<Vec<FeatureId>> {
    let sets: Vec<Mask> = family.iter().map(|s| mask_of(s)).collect();
    minimal_sets(universe, |h| sets.iter().all(|&s| s & h != 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{heart_disease_forest, Value};

    fn running() -> (Forest, Instance) {
        let forest = heart_disease_forest();
        let v = Instance::new(
            forest.features(),
            vec![Value::Binary(true), Value::Binary(false), Value::Binary(true), Value::Ordinal(70.0)],
        )
        .unwrap();
        (forest, v)
    }

    #[test]
    fn enumerator_visits_each_cell_once() {
        let cells: Vec<_> = CellEnumerator::new(vec![2, 1, 3]).collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], vec![0, 0, 0]);
        assert_eq!(cells[5], vec![1, 0, 2]);
        let mut dedup = cells.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 6);
        assert_eq!(CellEnumerator::new(vec![]).count(), 1);
    }

    #[test]
    fn running_example_checks() {
        let (forest, v) = running();
        let table = CellTable::build(&forest, DEFAULT_CELL_BUDGET).unwrap();
        assert_eq!(table.num_cells(), 16);

        let c = table.check_axp(&v, &[0, 2]);
        assert!(c.sufficient && c.minimal);
        assert!(table.check_axp(&v, &[0, 1, 2, 3]).sufficient);
        let c = table.check_axp(&v, &[1, 3]);
        assert!(!c.sufficient);
        assert_ne!(forest.predict(c.counterexample.as_ref().unwrap()), 1);

        let c = table.check_cxp(&v, &[0]);
        assert!(c.valid && c.minimal);
        assert_eq!(forest.classes()[forest.predict(c.witness.as_ref().unwrap())], "No");
        assert!(!table.check_cxp(&v, &[]).valid);
        let c = table.check_cxp(&v, &[0, 2]);
        assert!(c.valid && !c.minimal);

        assert_eq!(table.brute_axps(&v).unwrap(), vec![vec![0, 2]]);
        assert_eq!(table.brute_cxps(&v).unwrap(), vec![vec![0], vec![2]]);
    }

    #[test]
    fn hitting_sets() {
        assert_eq!(minimal_hitting_sets(&[vec![0], vec![2]], &[0, 1, 2, 3]), vec![vec![0, 2]]);
        assert_eq!(minimal_hitting_sets(&[vec![0, 2]], &[0, 1, 2, 3]), vec![vec![0], vec![2]]);
        assert_eq!(minimal_hitting_sets(&[], &[0, 1]), vec![Vec::<usize>::new()]);
        assert!(minimal_hitting_sets(&[vec![]], &[0, 1]).is_empty());
    }

    #[test]
    fn budget_refusal() {
        let (forest, _) = running();
        assert_eq!(
            CellTable::build(&forest, 8).err(),
            Some(VerifyError::OverBudget { cells: 16, budget: 8 })
        );
    }
}
