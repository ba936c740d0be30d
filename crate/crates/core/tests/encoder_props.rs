mod common;

use rand::Rng;
use rfxp::abstraction::Abstraction;
use rfxp::cnf::{Lit, Var};
use rfxp::encoder::card::CardEncoding;
use rfxp::encoder::{encode, encode_for_class, CnfEncoding, EncoderOptions};
use rfxp::model::{winner, FeatureSpec, Forest, Instance, Node, Split, Tree, Value};
use rfxp::oracle::{CdclSolver, SatOracle};

use common::{all_cells, random_forest, random_instance, rng, vote, walk, Shape};

fn all_options() -> Vec<EncoderOptions> {
    let mut out = Vec::new();
    for chaining in [true, false] {
        for selector_reduction in [true, false] {
            for card in [CardEncoding::Network, CardEncoding::Sequential] {
                out.push(EncoderOptions { chaining, selector_reduction, card });
            }
        }
    }
    out
}

fn forest_solver(enc: &CnfEncoding) -> CdclSolver {
    let mut s = CdclSolver::default();
    s.reserve_vars(enc.num_vars());
    for c in enc.forest_clauses() {
        s.add_clause(c).unwrap();
    }
    s
}

fn full_solver(enc: &CnfEncoding) -> CdclSolver {
    let mut s = CdclSolver::default();
    s.add_cnf(enc.cnf()).unwrap();
    s
}

#[test]
fn propagation_forces_exactly_the_predicted_votes() {
    for seed in 0..60 {
        let mut r = rng(seed);
        let forest = random_forest(&mut r, Shape::default());
        let abs = Abstraction::build(&forest);
        for opts in [EncoderOptions::default(), EncoderOptions { chaining: false, card: CardEncoding::Sequential, ..Default::default() }] {
            let enc = encode_for_class(&forest, &abs, 0, &opts);
            let mut s = forest_solver(&enc);
            for values in all_cells(&forest) {
                let v = Instance::new(forest.features(), values.clone()).unwrap();
                let lits = abs.cell_literals(&abs.cell_of(&v));
                let forced = s.propagate_under(&lits).unwrap().expect("no conflict on a valid cell");
                for (i, t) in forest.trees().iter().enumerate() {
                    let class = walk(t, &values);
                    for k in 0..forest.num_classes() {
                        let got = forced[enc.vote_var(i, k).index() as usize - 1];
                        assert_eq!(got, Some(k == class), "seed {seed} tree {i} class {k}");
                    }
                }
            }
        }
    }
}

#[test]
fn hard_clauses_satisfiable_iff_another_class_occurs() {
    for seed in 100..160 {
        let mut r = rng(seed);
        let forest = random_forest(&mut r, Shape::default());
        let abs = Abstraction::build(&forest);
        let preds: Vec<usize> = all_cells(&forest).iter().map(|c| vote(&forest, c)).collect();
        for target in 0..forest.num_classes() {
            let expected = preds.iter().any(|&p| p != target);
            for opts in all_options() {
                let enc = encode_for_class(&forest, &abs, target, &opts);
                assert_eq!(full_solver(&enc).solve(&[]).unwrap().is_sat(), expected, "seed {seed} target {target} {opts:?}");
            }
        }
    }
}

#[test]
fn options_agree_under_soft_literal_subsets() {
    for seed in 200..260 {
        let mut r = rng(seed);
        let forest = random_forest(&mut r, Shape::default());
        let abs = Abstraction::build(&forest);
        let v = random_instance(&mut r, &forest);
        let encs: Vec<CnfEncoding> = all_options().iter().map(|o| encode(&forest, &abs, &v, o)).collect();
        let mut solvers: Vec<CdclSolver> = encs.iter().map(full_solver).collect();
        let soft = encs[0].soft().literals();
        for _ in 0..20 {
            let subset: Vec<Lit> = soft.iter().copied().filter(|_| r.gen_bool(0.5)).collect();
            let verdicts: Vec<bool> = solvers.iter_mut().map(|s| s.solve(&subset).unwrap().is_sat()).collect();
            assert!(verdicts.iter().all(|&b| b == verdicts[0]), "seed {seed}: {verdicts:?}");
        }
    }
}

/// Five trees, each copying its own 4-valued feature into a class vote.
fn free_vote_forest() -> Forest {
    let feats = (0..5).map(|i| FeatureSpec::categorical(format!("c{i}"), ["a", "b", "c", "d"])).collect();
    let tree = |f: usize| {
        Tree::from_nodes(vec![
            Node::Internal { feature: f, split: Split::Subset(vec![0, 1]), left: 1, right: 4 },
            Node::Internal { feature: f, split: Split::Subset(vec![0]), left: 2, right: 3 },
            Node::Leaf { class: 0 },
            Node::Leaf { class: 1 },
            Node::Internal { feature: f, split: Split::Subset(vec![2]), left: 5, right: 6 },
            Node::Leaf { class: 2 },
            Node::Leaf { class: 3 },
        ])
        .unwrap()
    };
    Forest::new(feats, (0..4).map(|c| format!("k{c}")).collect(), (0..5).map(tree).collect()).unwrap()
}

#[test]
fn vote_table_four_classes_five_trees() {
    let forest = free_vote_forest();
    let abs = Abstraction::build(&forest);
    for target in 0..4 {
        for opts in all_options() {
            let enc = encode_for_class(&forest, &abs, target, &opts);
            let mut s = full_solver(&enc);
            for code in 0..4usize.pow(5) {
                let votes: Vec<usize> = (0..5).map(|i| code / 4usize.pow(i) % 4).collect();
                let mut counts = [0usize; 4];
                let mut assumptions = Vec::new();
                for (i, &c) in votes.iter().enumerate() {
                    counts[c] += 1;
                    for k in 0..4 {
                        assumptions.push(enc.vote_var(i, k).lit(k == c));
                    }
                }
                let expected = winner(&counts) != target;
                assert_eq!(s.solve(&assumptions).unwrap().is_sat(), expected, "votes {votes:?} target {target}");
            }
        }
    }
}

fn ordinal_forest(thresholds: &[f64]) -> Forest {
    let trees = thresholds
        .iter()
        .map(|&t| {
            Tree::from_nodes(vec![
                Node::Internal { feature: 0, split: Split::Threshold(t), left: 1, right: 2 },
                Node::Leaf { class: 0 },
                Node::Leaf { class: 1 },
            ])
            .unwrap()
        })
        .collect();
    Forest::new(vec![FeatureSpec::ordinal("w")], vec!["a".into(), "b".into()], trees).unwrap()
}

/// Satisfiable assignments of the interval variables under the forest part.
fn interval_models(forest: &Forest, opts: &EncoderOptions) -> Vec<u32> {
    let abs = Abstraction::build(forest);
    let enc = encode_for_class(forest, &abs, 0, opts);
    let mut s = forest_solver(&enc);
    let zs: Vec<Var> = abs.layout(0).one_hot_vars().to_vec();
    (0..1u32 << zs.len())
        .filter(|bits| {
            let a: Vec<Lit> = zs.iter().enumerate().map(|(i, z)| z.lit(bits >> i & 1 == 1)).collect();
            s.solve(&a).unwrap().is_sat()
        })
        .collect()
}

#[test]
fn four_intervals_have_four_models() {
    let forest = ordinal_forest(&[1.0, 2.0, 3.0]);
    for chaining in [true, false] {
        let models = interval_models(&forest, &EncoderOptions { chaining, ..Default::default() });
        assert_eq!(models, vec![0b0001, 0b0010, 0b0100, 0b1000]);
    }
}

#[test]
fn chaining_keeps_the_projection_on_intervals() {
    let forest = ordinal_forest(&[1.0, 2.0]);
    let chained = interval_models(&forest, &EncoderOptions { chaining: true, ..Default::default() });
    let plain = interval_models(&forest, &EncoderOptions { chaining: false, ..Default::default() });
    assert_eq!(chained, plain);
    assert_eq!(chained.len(), 3);
    // Both settings give the same prefix literal meaning for every interval.
    let abs = Abstraction::build(&forest);
    for chaining in [true, false] {
        let enc = encode_for_class(&forest, &abs, 0, &EncoderOptions { chaining, ..Default::default() });
        let mut s = forest_solver(&enc);
        for (cell, expect) in [(0usize, [0usize, 0]), (1, [1, 0]), (2, [1, 1])] {
            let forced = s.propagate_under(&abs.cell_literals(&[cell])).unwrap().unwrap();
            for (tree, &class) in expect.iter().enumerate() {
                assert_eq!(forced[enc.vote_var(tree, class).index() as usize - 1], Some(true));
            }
        }
    }
}

#[test]
fn size_grows_linearly_with_nodes() {
    let mut r = rng(9);
    let feats = common::random_features(&mut r, 8);
    let pool: Vec<Tree> = (0..80).map(|_| common::random_tree(&mut r, &feats, 3, 4)).collect();
    let mut ratios = Vec::new();
    let mut last = (0, 0);
    for n in [10, 20, 40, 80] {
        let forest = Forest::new(feats.clone(), vec!["a".into(), "b".into(), "c".into()], pool[..n].to_vec()).unwrap();
        let abs = Abstraction::build(&forest);
        let enc = encode_for_class(&forest, &abs, 0, &EncoderOptions::default());
        assert!(enc.num_vars() > last.0 && enc.num_clauses() > last.1);
        last = (enc.num_vars(), enc.num_clauses());
        ratios.push(enc.forest_clauses().len() as f64 / forest.total_nodes() as f64);
        // The vote comparison adds an n log^2 n sorting network on top.
        let lg = (n as f64).log2().ceil();
        assert!(enc.num_clauses() as f64 <= 4.0 * forest.total_nodes() as f64 + 20.0 * n as f64 * lg * lg);
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 2.0, "forest clauses per node drift: {ratios:?}");
}

#[test]
fn running_example_with_every_option() {
    let forest = rfxp::model::heart_disease_forest();
    let abs = Abstraction::build(&forest);
    let v = Instance::new(
        forest.features(),
        vec![Value::Binary(true), Value::Binary(false), Value::Binary(true), Value::Ordinal(70.0)],
    )
    .unwrap();
    for opts in all_options() {
        let enc = encode(&forest, &abs, &v, &opts);
        let mut s = full_solver(&enc);
        assert!(!s.solve(&enc.soft().literals()).unwrap().is_sat());
        assert!(s.solve(&[]).unwrap().is_sat());
    }
}
