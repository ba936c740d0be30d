//! Random small forests and independent reference computations shared by
//! the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use rfxp::model::{FeatureKind, FeatureSpec, Forest, Instance, Node, Split, Tree, Value};

pub const THRESHOLDS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_trees: usize,
    pub max_depth: usize,
    pub max_features: usize,
    pub max_classes: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_trees: 7, max_depth: 4, max_features: 8, max_classes: 4 }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone)]
enum Dom {
    Bin(Option<bool>),
    /// Open-closed interval of allowed values.
    Ord(f64, f64),
    Cat(Vec<usize>),
}

pub fn random_features(rng: &mut ChaCha8Rng, m: usize) -> Vec<FeatureSpec> {
    (0..m)
        .map(|j| {
            let r: f64 = rng.gen();
            if r < 0.5 {
                FeatureSpec::binary(format!("b{j}"))
            } else if r < 0.85 {
                FeatureSpec::ordinal(format!("o{j}"))
            } else {
                let k = rng.gen_range(2..=4);
                FeatureSpec::categorical(format!("c{j}"), (0..k).map(|v| format!("v{v}")))
            }
        })
        .collect()
}

fn gen_node(
    rng: &mut ChaCha8Rng,
    feats: &[FeatureSpec],
    k: usize,
    depth: usize,
    max_depth: usize,
    doms: &mut Vec<Dom>,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { class: rng.gen_range(0..k) });
    if depth >= max_depth || rng.gen_bool(0.2 + 0.1 * depth as f64) {
        return id;
    }
    let mut candidates = Vec::new();
    for (j, d) in doms.iter().enumerate() {
        match d {
            Dom::Bin(None) => candidates.push(j),
            Dom::Ord(lo, hi) if THRESHOLDS.iter().any(|t| lo < t && t < hi) => candidates.push(j),
            Dom::Cat(vals) if vals.len() >= 2 => candidates.push(j),
            _ => {}
        }
    }
    let Some(&j) = candidates.choose(rng) else { return id };
    let saved = doms[j].clone();
    let (split, left_dom, right_dom) = match &saved {
        Dom::Bin(_) => (Split::Binary, Dom::Bin(Some(false)), Dom::Bin(Some(true))),
        Dom::Ord(lo, hi) => {
            let inside: Vec<f64> = THRESHOLDS.iter().copied().filter(|t| lo < t && t < hi).collect();
            let t = *inside.choose(rng).unwrap();
            (Split::Threshold(t), Dom::Ord(*lo, t), Dom::Ord(t, *hi))
        }
        Dom::Cat(vals) => {
            let mut shuffled = vals.clone();
            shuffled.shuffle(rng);
            let cut = rng.gen_range(1..shuffled.len());
            let mut left: Vec<usize> = shuffled[..cut].to_vec();
            let mut right: Vec<usize> = shuffled[cut..].to_vec();
            left.sort_unstable();
            right.sort_unstable();
            // Values already excluded on this path may also be listed.
            let mut subset = left.clone();
            if feats[j].values.len() > vals.len() && rng.gen_bool(0.3) {
                let outside: Vec<usize> = (0..feats[j].values.len()).filter(|v| !vals.contains(v)).collect();
                subset.push(*outside.choose(rng).unwrap());
                subset.sort_unstable();
            }
            (Split::Subset(subset), Dom::Cat(left), Dom::Cat(right))
        }
    };
    doms[j] = left_dom;
    let left = gen_node(rng, feats, k, depth + 1, max_depth, doms, nodes);
    doms[j] = right_dom;
    let right = gen_node(rng, feats, k, depth + 1, max_depth, doms, nodes);
    doms[j] = saved;
    nodes[id] = Node::Internal { feature: j, split, left, right };
    id
}

pub fn random_tree(rng: &mut ChaCha8Rng, feats: &[FeatureSpec], k: usize, max_depth: usize) -> Tree {
    let mut doms: Vec<Dom> = feats
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Binary => Dom::Bin(None),
            FeatureKind::Ordinal => Dom::Ord(f64::NEG_INFINITY, f64::INFINITY),
            FeatureKind::Categorical => Dom::Cat((0..f.values.len()).collect()),
        })
        .collect();
    let mut nodes = Vec::new();
    gen_node(rng, feats, k, 0, max_depth, &mut doms, &mut nodes);
    Tree::from_nodes(nodes).unwrap()
}

pub fn random_forest(rng: &mut ChaCha8Rng, shape: Shape) -> Forest {
    let m = rng.gen_range(1..=shape.max_features);
    let feats = random_features(rng, m);
    let k = if rng.gen_bool(0.05) { 1 } else { rng.gen_range(2..=shape.max_classes.max(2)) };
    let n = rng.gen_range(1..=shape.max_trees);
    let depth = rng.gen_range(1..=shape.max_depth);
    let trees = (0..n).map(|_| random_tree(rng, &feats, k, depth)).collect();
    let classes = (0..k).map(|c| format!("k{c}")).collect();
    Forest::new(feats, classes, trees).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, forest: &Forest) -> Instance {
    let values = forest
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Binary => Value::Binary(rng.gen()),
            FeatureKind::Ordinal => {
                // Whole numbers land exactly on thresholds now and then.
                let x = rng.gen_range(0..=5) as f64;
                Value::Ordinal(if rng.gen_bool(0.3) { x + 0.5 } else { x })
            }
            FeatureKind::Categorical => Value::Categorical(rng.gen_range(0..f.values.len())),
        })
        .collect();
    Instance::new(forest.features(), values).unwrap()
}

/// Path walk written independently of `rfxp::model::predict_tree`.
pub fn walk(tree: &Tree, values: &[Value]) -> usize {
    let mut id = 0;
    loop {
        match tree.node(id) {
            Node::Leaf { class } => return *class,
            Node::Internal { feature, split, left, right } => {
                let go_left = match (split, values[*feature]) {
                    (Split::Binary, Value::Binary(b)) => !b,
                    (Split::Threshold(t), Value::Ordinal(x)) => !(x > *t),
                    (Split::Subset(s), Value::Categorical(v)) => s.contains(&v),
                    _ => panic!("kind mismatch"),
                };
                id = if go_left { *left } else { *right };
            }
        }
    }
}

/// Majority vote with ties to the lowest class index.
pub fn vote(forest: &Forest, values: &[Value]) -> usize {
    let mut counts = vec![0usize; forest.num_classes()];
    for t in forest.trees() {
        counts[walk(t, values)] += 1;
    }
    let best = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == best).unwrap()
}

/// Representative values of every cell, computed from the split thresholds
/// seen in the trees rather than from the abstraction module.
pub fn all_cells(forest: &Forest) -> Vec<Vec<Value>> {
    let mut axes: Vec<Vec<Value>> = Vec::new();
    for (j, f) in forest.features().iter().enumerate() {
        axes.push(match f.kind {
            FeatureKind::Binary => vec![Value::Binary(false), Value::Binary(true)],
            FeatureKind::Categorical => (0..f.values.len()).map(Value::Categorical).collect(),
            FeatureKind::Ordinal => {
                let mut ts: Vec<f64> = forest
                    .trees()
                    .iter()
                    .flat_map(|t| t.nodes().iter())
                    .filter_map(|n| match n {
                        Node::Internal { feature, split: Split::Threshold(t), .. } if *feature == j => Some(*t),
                        _ => None,
                    })
                    .collect();
                ts.sort_by(f64::total_cmp);
                ts.dedup();
                let mut pts: Vec<Value> = ts.iter().map(|&t| Value::Ordinal(t)).collect();
                pts.push(Value::Ordinal(ts.last().map_or(0.0, |t| t + 1.0)));
                pts
            }
        });
    }
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Value>| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Whether `a` and `b` fall in the same cell along feature `j`.
pub fn same_cell(forest: &Forest, j: usize, a: Value, b: Value) -> bool {
    match (a, b) {
        (Value::Ordinal(x), Value::Ordinal(y)) => forest.trees().iter().flat_map(|t| t.nodes().iter()).all(|n| match n {
            Node::Internal { feature, split: Split::Threshold(t), .. } if *feature == j => (x <= *t) == (y <= *t),
            _ => true,
        }),
        _ => a == b,
    }
}

/// Subsets of `universe`, each as a sorted vector.
pub fn subsets(universe: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0u32..1 << universe.len()).map(move |m| (0..universe.len()).filter(|i| m >> i & 1 == 1).map(|i| universe[i]).collect())
}

/// Counter-cells of an instance, computed from explicit cells.
pub struct Reference {
    pub relevant: Vec<usize>,
    /// Per counter-cell, whether each feature agrees with the instance.
    pub counters: Vec<Vec<bool>>,
}

impl Reference {
    pub fn new(forest: &Forest, instance: &Instance) -> Self {
        let target = vote(forest, instance.values());
        let relevant = (0..forest.num_features())
            .filter(|&j| {
                forest.trees().iter().any(|t| t.nodes().iter().any(|n| matches!(n, Node::Internal { feature, .. } if *feature == j)))
            })
            .collect();
        let counters = all_cells(forest)
            .into_iter()
            .filter(|c| vote(forest, c) != target)
            .map(|c| (0..forest.num_features()).map(|j| same_cell(forest, j, c[j], instance.value(j))).collect())
            .collect();
        Reference { relevant, counters }
    }

    /// Fixing `s` to the instance's values forces the prediction.
    pub fn sufficient(&self, s: &[usize]) -> bool {
        !self.counters.iter().any(|agree| s.iter().all(|&j| agree[j]))
    }

    /// Freeing `y` and fixing the rest allows another prediction.
    pub fn reaches(&self, y: &[usize]) -> bool {
        self.counters.iter().any(|agree| self.relevant.iter().all(|j| y.contains(j) || agree[*j]))
    }

    pub fn families(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut axps = Vec::new();
        let mut cxps = Vec::new();
        for s in subsets(&self.relevant) {
            let without = |f: usize| s.iter().copied().filter(|&g| g != f).collect::<Vec<_>>();
            if self.sufficient(&s) && s.iter().all(|&f| !self.sufficient(&without(f))) {
                axps.push(s.clone());
            }
            if self.reaches(&s) && s.iter().all(|&f| !self.reaches(&without(f))) {
                cxps.push(s);
            }
        }
        axps.sort();
        cxps.sort();
        (axps, cxps)
    }

    /// Greedy deletion over relevant features in `order`.
    pub fn greedy_axp(&self, order: &[usize]) -> Vec<usize> {
        let mut s = self.relevant.clone();
        for &f in order.iter().filter(|f| self.relevant.contains(f)) {
            let without: Vec<usize> = s.iter().copied().filter(|&g| g != f).collect();
            if self.sufficient(&without) {
                s = without;
            }
        }
        s
    }

    /// Greedy re-fixing over relevant features in reverse `order`.
    pub fn greedy_cxp(&self, order: &[usize]) -> Option<Vec<usize>> {
        let mut y = self.relevant.clone();
        if !self.reaches(&y) {
            return None;
        }
        for &f in order.iter().rev().filter(|f| self.relevant.contains(f)) {
            let without: Vec<usize> = y.iter().copied().filter(|&g| g != f).collect();
            if self.reaches(&without) {
                y = without;
            }
        }
        Some(y)
    }
}

/// Ground-truth AXps and CXps by lattice search over explicit cells.
pub fn reference_families(forest: &Forest, instance: &Instance) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    Reference::new(forest, instance).families()
}
