//! Features, decision trees and majority-vote random forests.
//!
//! Trees are stored as node arenas (root at index 0) and validated on
//! construction, so prediction itself cannot fail.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Index of a feature in [`Forest::features`].
pub type FeatureId = usize;
/// Index of a class in [`Forest::classes`]; the order doubles as the tie-break.
pub type ClassId = usize;
/// Index of a node inside a [`Tree`] arena.
pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("forest has no trees")]
    NoTrees,
    #[error("forest has no classes")]
    NoClasses,
    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("categorical feature `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("categorical feature `{feature}` lists value `{value}` twice")]
    DuplicateValue { feature: String, value: String },
    #[error("tree {tree}: {msg}")]
    Structure { tree: usize, msg: String },
    #[error("instance has {got} values, forest has {expected} features")]
    InstanceArity { expected: usize, got: usize },
    #[error("feature `{feature}`: {msg}")]
    BadValue { feature: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Binary,
    Categorical,
    Ordinal,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Binary => "binary",
            FeatureKind::Categorical => "categorical",
            FeatureKind::Ordinal => "ordinal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Domain of a categorical feature; empty otherwise.
    pub values: Vec<String>,
}

impl FeatureSpec {
    pub fn binary(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Binary, values: Vec::new() }
    }

    pub fn ordinal(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Ordinal, values: Vec::new() }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    /// Position of a categorical value in the domain.
    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// A single feature value of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Binary(bool),
    /// Index into the feature's categorical domain.
    Categorical(usize),
    Ordinal(f64),
}

/// The test performed at an internal node. The left child is taken when
/// the test holds: `x = 0` for binary, `x <= t` for ordinal and `x in S`
/// for categorical splits.
#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    Binary,
    Threshold(f64),
    /// Sorted, duplicate-free value indices.
    Subset(Vec<usize>),
}

impl Split {
    pub fn goes_left(&self, value: Value) -> bool {
        match (self, value) {
            (Split::Binary, Value::Binary(b)) => !b,
            (Split::Threshold(t), Value::Ordinal(x)) => x <= *t,
            (Split::Subset(s), Value::Categorical(i)) => s.binary_search(&i).is_ok(),
            // Instances are validated against the feature kinds, and so are splits.
            _ => unreachable!("split/value kind mismatch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal { feature: FeatureId, split: Split, left: NodeId, right: NodeId },
    Leaf { class: ClassId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A tree made of a single leaf.
    pub fn leaf(class: ClassId) -> Self {
        Tree { nodes: vec![Node::Leaf { class }] }
    }

    /// Builds a tree from an arena whose root is node 0. Structural checks
    /// that need the feature table are deferred to [`Forest::new`].
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parent_seen = vec![false; nodes.len()];
        parent_seen[0] = true;
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Internal { left, right, .. } = node {
                for &child in [left, right] {
                    if child >= nodes.len() {
                        return Err(format!("node {id} points to missing child {child}"));
                    }
                    if parent_seen[child] {
                        return Err(format!("node {child} has more than one parent"));
                    }
                    parent_seen[child] = true;
                }
            }
        }
        if let Some(orphan) = parent_seen.iter().position(|seen| !seen) {
            return Err(format!("node {orphan} is unreachable from the root"));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn go(tree: &Tree, id: NodeId) -> usize {
            match tree.node(id) {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + go(tree, *left).max(go(tree, *right)),
            }
        }
        go(self, 0)
    }

    /// Every root-to-leaf path as the list of `(node, went_left)` edges
    /// followed by the leaf class.
    pub fn paths(&self) -> Vec<(Vec<(NodeId, bool)>, ClassId)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((id, edges)) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { class } => out.push((edges, *class)),
                Node::Internal { left, right, .. } => {
                    let mut r = edges.clone();
                    r.push((id, false));
                    stack.push((*right, r));
                    let mut l = edges;
                    l.push((id, true));
                    stack.push((*left, l));
                }
            }
        }
        out
    }
}

/// Walks the tree from the root and returns the class of the reached leaf.
pub fn predict_tree(tree: &Tree, instance: &Instance) -> ClassId {
    let mut id = 0;
    loop {
        match &tree.nodes[id] {
            Node::Leaf { class } => return *class,
            Node::Internal { feature, split, left, right } => {
                id = if split.goes_left(instance.values[*feature]) { *left } else { *right };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    values: Vec<Value>,
}

impl Instance {
    /// Validates the values against the feature table.
    pub fn new(features: &[FeatureSpec], values: Vec<Value>) -> Result<Self, ModelError> {
        if values.len() != features.len() {
            return Err(ModelError::InstanceArity { expected: features.len(), got: values.len() });
        }
        for (spec, value) in features.iter().zip(&values) {
            let bad = |msg: String| ModelError::BadValue { feature: spec.name.clone(), msg };
            match (spec.kind, value) {
                (FeatureKind::Binary, Value::Binary(_)) => {}
                (FeatureKind::Categorical, Value::Categorical(i)) if *i < spec.values.len() => {}
                (FeatureKind::Categorical, Value::Categorical(i)) => {
                    return Err(bad(format!("value index {i} outside the domain")))
                }
                (FeatureKind::Ordinal, Value::Ordinal(x)) if x.is_finite() => {}
                (FeatureKind::Ordinal, Value::Ordinal(x)) => return Err(bad(format!("non-finite value {x}"))),
                (kind, v) => return Err(bad(format!("{v:?} is not a {} value", kind.as_str()))),
            }
        }
        Ok(Instance { values })
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn value(&self, feature: FeatureId) -> Value {
        self.values[feature]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    features: Vec<FeatureSpec>,
    classes: Vec<String>,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn new(features: Vec<FeatureSpec>, classes: Vec<String>, trees: Vec<Tree>) -> Result<Self, ModelError> {
        if trees.is_empty() {
            return Err(ModelError::NoTrees);
        }
        if classes.is_empty() {
            return Err(ModelError::NoClasses);
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(ModelError::DuplicateClass(c.clone()));
            }
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(ModelError::DuplicateFeature(f.name.clone()));
            }
            if f.kind == FeatureKind::Categorical {
                if f.values.is_empty() {
                    return Err(ModelError::EmptyDomain(f.name.clone()));
                }
                let mut vals = HashSet::new();
                for v in &f.values {
                    if !vals.insert(v.as_str()) {
                        return Err(ModelError::DuplicateValue { feature: f.name.clone(), value: v.clone() });
                    }
                }
            }
        }
        let forest = Forest { features, classes, trees };
        for (i, tree) in forest.trees.iter().enumerate() {
            forest.check_tree(tree).map_err(|msg| ModelError::Structure { tree: i, msg })?;
        }
        Ok(forest)
    }

    /// Checks feature references, leaf classes and path consistency.
    fn check_tree(&self, tree: &Tree) -> Result<(), String> {
        let mut domains: Vec<Domain> = self.features.iter().map(Domain::full).collect();
        self.check_node(tree, 0, &mut domains)
    }

    fn check_node(&self, tree: &Tree, id: NodeId, domains: &mut Vec<Domain>) -> Result<(), String> {
        match tree.node(id) {
            Node::Leaf { class } => {
                if *class >= self.classes.len() {
                    return Err(format!("leaf {id} has unknown class {class}"));
                }
                Ok(())
            }
            Node::Internal { feature, split, left, right } => {
                let spec = self
                    .features
                    .get(*feature)
                    .ok_or_else(|| format!("node {id} tests unknown feature {feature}"))?;
                match (spec.kind, split) {
                    (FeatureKind::Binary, Split::Binary) => {}
                    (FeatureKind::Ordinal, Split::Threshold(t)) if t.is_finite() => {}
                    (FeatureKind::Categorical, Split::Subset(s))
                        if s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&v| v < spec.values.len()) => {}
                    _ => return Err(format!("node {id} has a split that does not fit feature `{}`", spec.name)),
                }
                let saved = domains[*feature].clone();
                let (l, r) = saved.split(split);
                if l.is_empty() || r.is_empty() {
                    return Err(format!(
                        "node {id} on feature `{}` has an unreachable branch (inconsistent path)",
                        spec.name
                    ));
                }
                domains[*feature] = l;
                self.check_node(tree, *left, domains)?;
                domains[*feature] = r;
                self.check_node(tree, *right, domains)?;
                domains[*feature] = saved;
                Ok(())
            }
        }
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.trees.iter().map(Tree::len).sum()
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn class_index(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn feature_index(&self, name: &str) -> Option<FeatureId> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Number of trees voting for each class, indexed by class.
    pub fn vote_counts(&self, instance: &Instance) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for tree in &self.trees {
            counts[predict_tree(tree, instance)] += 1;
        }
        counts
    }

    /// Majority vote; ties go to the class listed first.
    pub fn predict(&self, instance: &Instance) -> ClassId {
        winner(&self.vote_counts(instance))
    }
}

/// Index of the largest count, preferring the smallest index on ties.
pub fn winner(counts: &[usize]) -> ClassId {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate().skip(1) {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Set of values a feature may still take along a tree path.
#[derive(Debug, Clone)]
enum Domain {
    Binary { zero: bool, one: bool },
    /// Half-open `(lo, hi]`, with infinities for unbounded ends.
    Interval { lo: f64, hi: f64 },
    Values(Vec<bool>),
}

impl Domain {
    fn full(spec: &FeatureSpec) -> Self {
        match spec.kind {
            FeatureKind::Binary => Domain::Binary { zero: true, one: true },
            FeatureKind::Ordinal => Domain::Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
            FeatureKind::Categorical => Domain::Values(vec![true; spec.values.len()]),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Domain::Binary { zero, one } => !zero && !one,
            Domain::Interval { lo, hi } => lo >= hi,
            Domain::Values(v) => !v.iter().any(|&b| b),
        }
    }

    fn split(&self, split: &Split) -> (Domain, Domain) {
        match (self, split) {
            (Domain::Binary { zero, one }, Split::Binary) => (
                Domain::Binary { zero: *zero, one: false },
                Domain::Binary { zero: false, one: *one },
            ),
            (Domain::Interval { lo, hi }, Split::Threshold(t)) => (
                Domain::Interval { lo: *lo, hi: hi.min(*t) },
                Domain::Interval { lo: lo.max(*t), hi: *hi },
            ),
            (Domain::Values(v), Split::Subset(s)) => {
                let mut left = vec![false; v.len()];
                for &i in s {
                    left[i] = v[i];
                }
                let right = v.iter().zip(&left).map(|(&a, &l)| a && !l).collect();
                (Domain::Values(left), Domain::Values(right))
            }
            _ => unreachable!("split kind checked by caller"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Binary(b) => write!(f, "{}", u8::from(*b)),
            Value::Categorical(i) => write!(f, "#{i}"),
            Value::Ordinal(x) => write!(f, "{x}"),
        }
    }
}

/// The forest of the running heart-disease example: three depth-2 trees over
/// `blocked-arteries`, `good-blood-circulation`, `chest-pain` and `weight`,
/// classes `No` and `Yes` (in that order).
pub fn heart_disease_forest() -> Forest {
    use Node::*;
    let features = vec![
        FeatureSpec::binary("blocked-arteries"),
        FeatureSpec::binary("good-blood-circulation"),
        FeatureSpec::binary("chest-pain"),
        FeatureSpec::ordinal("weight"),
    ];
    let (no, yes) = (0, 1);
    let t1 = vec![
        Internal { feature: 0, split: Split::Binary, left: 1, right: 2 },
        Leaf { class: no },
        Internal { feature: 2, split: Split::Binary, left: 3, right: 4 },
        Leaf { class: no },
        Leaf { class: yes },
    ];
    let t2 = vec![
        Internal { feature: 1, split: Split::Binary, left: 1, right: 4 },
        Internal { feature: 3, split: Split::Threshold(75.0), left: 2, right: 3 },
        Leaf { class: no },
        Leaf { class: yes },
        Leaf { class: no },
    ];
    let t3 = vec![
        Internal { feature: 1, split: Split::Binary, left: 1, right: 4 },
        Internal { feature: 2, split: Split::Binary, left: 2, right: 3 },
        Leaf { class: no },
        Leaf { class: yes },
        Internal { feature: 0, split: Split::Binary, left: 5, right: 6 },
        Leaf { class: no },
        Leaf { class: yes },
    ];
    let trees = [t1, t2, t3].into_iter().map(|n| Tree::from_nodes(n).expect("static tree")).collect();
    Forest::new(features, vec!["No".into(), "Yes".into()], trees).expect("static forest")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(vals: &[f64]) -> Vec<Value> {
        vec![
            Value::Binary(vals[0] != 0.0),
            Value::Binary(vals[1] != 0.0),
            Value::Binary(vals[2] != 0.0),
            Value::Ordinal(vals[3]),
        ]
    }

    #[test]
    fn running_example_votes() {
        let forest = heart_disease_forest();
        let inst = Instance::new(forest.features(), v(&[1.0, 0.0, 1.0, 70.0])).unwrap();
        assert_eq!(predict_tree(&forest.trees()[0], &inst), 1);
        assert_eq!(predict_tree(&forest.trees()[1], &inst), 0);
        assert_eq!(predict_tree(&forest.trees()[2], &inst), 1);
        assert_eq!(forest.vote_counts(&inst), vec![1, 2]);
        assert_eq!(forest.classes()[forest.predict(&inst)], "Yes");
        // Flipping blocked-arteries changes the prediction.
        let inst = Instance::new(forest.features(), v(&[0.0, 0.0, 1.0, 70.0])).unwrap();
        assert_eq!(forest.classes()[forest.predict(&inst)], "No");
    }

    #[test]
    fn threshold_goes_left() {
        let forest = heart_disease_forest();
        let at = Instance::new(forest.features(), v(&[0.0, 0.0, 0.0, 75.0])).unwrap();
        let above = Instance::new(forest.features(), v(&[0.0, 0.0, 0.0, 75.5])).unwrap();
        assert_eq!(predict_tree(&forest.trees()[1], &at), 0);
        assert_eq!(predict_tree(&forest.trees()[1], &above), 1);
    }

    #[test]
    fn single_leaf_and_unanimous() {
        let feats = vec![FeatureSpec::binary("a")];
        let forest = Forest::new(feats, vec!["p".into(), "q".into()], vec![Tree::leaf(1); 4]).unwrap();
        let inst = Instance::new(forest.features(), vec![Value::Binary(false)]).unwrap();
        assert_eq!(predict_tree(&forest.trees()[0], &inst), 1);
        assert_eq!(forest.vote_counts(&inst), vec![0, 4]);
        assert_eq!(forest.predict(&inst), 1);
    }

    #[test]
    fn ties_go_to_first_class() {
        let feats = vec![FeatureSpec::binary("a")];
        let forest =
            Forest::new(feats, vec!["p".into(), "q".into()], vec![Tree::leaf(1), Tree::leaf(0)]).unwrap();
        let inst = Instance::new(forest.features(), vec![Value::Binary(true)]).unwrap();
        assert_eq!(forest.predict(&inst), 0);
        assert_eq!(winner(&[1, 3, 3]), 1);
        assert_eq!(winner(&[0, 0]), 0);
    }

    #[test]
    fn rejects_structural_errors() {
        assert_eq!(Forest::new(vec![], vec!["a".into()], vec![]), Err(ModelError::NoTrees));
        let missing = Tree::from_nodes(vec![Node::Internal { feature: 0, split: Split::Binary, left: 1, right: 2 }]);
        assert!(missing.unwrap_err().contains("missing child"));

        let bad_feature = Tree::from_nodes(vec![
            Node::Internal { feature: 3, split: Split::Binary, left: 1, right: 2 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 0 },
        ])
        .unwrap();
        let err = Forest::new(vec![FeatureSpec::binary("a")], vec!["c".into()], vec![bad_feature]).unwrap_err();
        assert!(matches!(err, ModelError::Structure { tree: 0, .. }));

        let bad_leaf = Tree::leaf(5);
        assert!(Forest::new(vec![], vec!["c".into()], vec![bad_leaf]).is_err());
    }

    #[test]
    fn rejects_inconsistent_paths() {
        // x <= 5 then x <= 7 on the left branch leaves the right child empty.
        let tree = Tree::from_nodes(vec![
            Node::Internal { feature: 0, split: Split::Threshold(5.0), left: 1, right: 4 },
            Node::Internal { feature: 0, split: Split::Threshold(7.0), left: 2, right: 3 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 0 },
        ])
        .unwrap();
        let err = Forest::new(vec![FeatureSpec::ordinal("x")], vec!["c".into()], vec![tree]).unwrap_err();
        assert!(err.to_string().contains("unreachable branch"));

        let tree = Tree::from_nodes(vec![
            Node::Internal { feature: 0, split: Split::Binary, left: 1, right: 2 },
            Node::Internal { feature: 0, split: Split::Binary, left: 3, right: 4 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 0 },
        ])
        .unwrap();
        assert!(Forest::new(vec![FeatureSpec::binary("b")], vec!["c".into()], vec![tree]).is_err());
    }

    #[test]
    fn instance_validation() {
        let feats = vec![FeatureSpec::categorical("color", ["r", "g"]), FeatureSpec::ordinal("w")];
        assert!(Instance::new(&feats, vec![Value::Categorical(1), Value::Ordinal(2.0)]).is_ok());
        assert!(Instance::new(&feats, vec![Value::Categorical(2), Value::Ordinal(2.0)]).is_err());
        assert!(Instance::new(&feats, vec![Value::Categorical(0), Value::Ordinal(f64::NAN)]).is_err());
        assert!(Instance::new(&feats, vec![Value::Binary(true), Value::Ordinal(1.0)]).is_err());
        assert!(Instance::new(&feats, vec![Value::Categorical(0)]).is_err());
    }
}
