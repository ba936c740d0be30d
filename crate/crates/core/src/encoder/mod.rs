//! Compilation of a forest into CNF.
//!
//! The clause database has two parts. The forest part ties abstraction
//! variables to per-tree vote variables `l[i][j]` ("tree `i` votes for class
//! `j`"): one clause per root-to-leaf path, exactly one vote per tree and
//! exactly one value or interval per feature. The misclassification part
//! then asserts that some class other than the target wins the majority
//! vote, with ties going to the class listed first.
//!
//! Under the soft literals of the instance the whole formula is
//! unsatisfiable, which is what the explainer works from.

pub mod card;

use std::collections::HashMap;
use std::io::{self, Write};

use crate::abstraction::{Abstraction, FeatureLayout, SoftLiterals};
use crate::cnf::{write_dimacs, Cnf, Lit, Var};
use crate::model::{ClassId, FeatureId, Forest, Instance, Node, Split, Tree};
use card::{add_wire_clause, at_least, at_least_output, exactly_one, CardEncoding, Wire};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderOptions {
    /// Define each interval prefix literal from the previous one.
    pub chaining: bool,
    /// Two comparators plus selectors instead of one comparator per rival.
    pub selector_reduction: bool,
    pub card: CardEncoding,
}

impl Default for EncoderOptions {
    fn default() -> Self {
        EncoderOptions { chaining: true, selector_reduction: true, card: CardEncoding::default() }
    }
}

/// The literal standing for one branch of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLit {
    True,
    False,
    Lit(Lit),
}

impl EdgeLit {
    fn negate(self) -> EdgeLit {
        match self {
            EdgeLit::True => EdgeLit::False,
            EdgeLit::False => EdgeLit::True,
            EdgeLit::Lit(l) => EdgeLit::Lit(!l),
        }
    }
}

/// Variables of the misclassification constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComparatorVars {
    /// Inputs of the comparator against lower-indexed rivals, one per tree.
    pub z_prec: Vec<Var>,
    /// Inputs of the comparator against higher-indexed rivals.
    pub z_succ: Vec<Var>,
    /// `p_0 ..= p_K`; `p_0` and `p_{j*+1}` are the two placeholders.
    pub selectors: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct CnfEncoding {
    cnf: Cnf,
    forest_clauses: usize,
    vote_vars: Vec<Vec<Var>>,
    comparators: ComparatorVars,
    soft: SoftLiterals,
    target: ClassId,
    roles: Vec<String>,
}

impl CnfEncoding {
    pub fn cnf(&self) -> &Cnf {
        &self.cnf
    }

    pub fn num_vars(&self) -> u32 {
        self.cnf.num_vars()
    }

    pub fn num_clauses(&self) -> usize {
        self.cnf.num_clauses()
    }

    /// Path, vote and domain clauses, without the misclassification part.
    pub fn forest_clauses(&self) -> &[Vec<Lit>] {
        &self.cnf.clauses()[..self.forest_clauses]
    }

    pub fn vote_var(&self, tree: usize, class: ClassId) -> Var {
        self.vote_vars[tree][class]
    }

    pub fn vote_vars(&self) -> &[Vec<Var>] {
        &self.vote_vars
    }

    pub fn comparators(&self) -> &ComparatorVars {
        &self.comparators
    }

    pub fn soft(&self) -> &SoftLiterals {
        &self.soft
    }

    pub fn target(&self) -> ClassId {
        self.target
    }

    /// Whether the hard clauses contain the empty clause (single class).
    pub fn is_vacuous(&self) -> bool {
        self.cnf.contains_empty_clause()
    }

    pub fn role(&self, var: Var) -> &str {
        &self.roles[var.index() as usize - 1]
    }

    /// DIMACS text with comment lines naming every variable and listing the
    /// soft literals.
    pub fn export_dimacs<W: Write>(&self, out: W, forest: &Forest) -> io::Result<()> {
        let mut comments = vec![
            format!("target {}", forest.classes()[self.target]),
            format!("#var {} #cl {}", self.num_vars(), self.num_clauses()),
        ];
        comments.extend(self.roles.iter().enumerate().map(|(i, r)| format!("var {} {r}", i + 1)));
        let soft: Vec<String> = self.soft.literals().iter().map(|l| l.to_string()).collect();
        comments.push(format!("soft {}", soft.join(" ")));
        write_dimacs(out, &self.cnf, &comments)
    }
}

struct Collector<'a> {
    forest: &'a Forest,
    abs: &'a Abstraction,
    opts: EncoderOptions,
    cnf: Cnf,
    roles: Vec<String>,
    ordinal_cache: HashMap<(FeatureId, usize), Lit>,
    subset_cache: HashMap<(FeatureId, Vec<usize>), Lit>,
}

impl<'a> Collector<'a> {
    fn new(forest: &'a Forest, abs: &'a Abstraction, opts: EncoderOptions) -> Self {
        let cnf = Cnf::with_vars(abs.num_vars());
        let roles = (1..=abs.num_vars())
            .map(|v| abs.describe_var(forest, Var::new(v)).unwrap_or_else(|| "aux".into()))
            .collect();
        Collector {
            forest,
            abs,
            opts,
            cnf,
            roles,
            ordinal_cache: HashMap::new(),
            subset_cache: HashMap::new(),
        }
    }

    fn fresh(&mut self, role: impl Into<String>) -> Var {
        let v = self.cnf.new_var();
        self.roles.push(role.into());
        v
    }

    fn sync_roles(&mut self) {
        let n = self.cnf.num_vars() as usize;
        while self.roles.len() < n {
            self.roles.push("aux".into());
        }
    }

    /// `a <-> (b_1 or ... or b_n)`.
    fn define_or(&mut self, a: Lit, disjuncts: &[Lit]) {
        let mut long = vec![!a];
        long.extend_from_slice(disjuncts);
        self.cnf.add_clause(long);
        for &b in disjuncts {
            self.cnf.add_clause([a, !b]);
        }
    }

    /// Literal for `x_f <= t_idx`, i.e. the union of intervals `0..=idx`.
    fn ordinal_prefix(&mut self, feature: FeatureId, idx: usize) -> Lit {
        if let Some(&l) = self.ordinal_cache.get(&(feature, idx)) {
            return l;
        }
        let FeatureLayout::Ordinal { intervals } = self.abs.layout(feature).clone() else {
            unreachable!("threshold split on a non-ordinal feature")
        };
        let lit = if idx == 0 {
            intervals[0].pos()
        } else {
            let name = &self.forest.features()[feature].name;
            let t = self.abs.thresholds().thresholds(feature)[idx];
            let a = self.fresh(format!("{name} <= {t}")).pos();
            if self.opts.chaining {
                let prev = self.ordinal_prefix(feature, idx - 1);
                self.define_or(a, &[prev, intervals[idx].pos()]);
            } else {
                let zs: Vec<Lit> = intervals[..=idx].iter().map(|v| v.pos()).collect();
                self.define_or(a, &zs);
            }
            a
        };
        self.ordinal_cache.insert((feature, idx), lit);
        lit
    }

    /// Literal for `x_f in subset`.
    fn categorical_member(&mut self, feature: FeatureId, subset: &[usize]) -> EdgeLit {
        let FeatureLayout::Categorical { values } = self.abs.layout(feature).clone() else {
            unreachable!("subset split on a non-categorical feature")
        };
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        if subset.is_empty() {
            return EdgeLit::False;
        }
        if subset.len() == values.len() {
            return EdgeLit::True;
        }
        if subset.len() == 1 {
            return EdgeLit::Lit(values[subset[0]].pos());
        }
        if subset.len() + 1 == values.len() {
            let out = (0..values.len()).find(|i| !subset.contains(i)).unwrap();
            return EdgeLit::Lit(values[out].neg());
        }
        if let Some(&l) = self.subset_cache.get(&(feature, subset.clone())) {
            return EdgeLit::Lit(l);
        }
        let spec = &self.forest.features()[feature];
        let names: Vec<&str> = subset.iter().map(|&i| spec.values[i].as_str()).collect();
        let a = self.fresh(format!("{} in {{{}}}", spec.name, names.join(", "))).pos();
        let zs: Vec<Lit> = subset.iter().map(|&i| values[i].pos()).collect();
        self.define_or(a, &zs);
        self.subset_cache.insert((feature, subset), a);
        EdgeLit::Lit(a)
    }

    /// Literal of the left branch of a split; the right branch is its negation.
    fn encode_edge_literal(&mut self, feature: FeatureId, split: &Split) -> EdgeLit {
        match (split, self.abs.layout(feature)) {
            (Split::Binary, FeatureLayout::Binary { var }) => EdgeLit::Lit(var.neg()),
            (Split::Threshold(t), _) => {
                let idx = self.abs.thresholds().index_of(feature, *t).expect("threshold in table");
                EdgeLit::Lit(self.ordinal_prefix(feature, idx))
            }
            (Split::Subset(s), _) => self.categorical_member(feature, s),
            _ => unreachable!("split kind checked by the model"),
        }
    }

    fn encode_tree_paths(&mut self, tree: &Tree, votes: &[Var]) {
        for (path, class) in tree.paths() {
            let mut clause = Vec::with_capacity(path.len() + 1);
            let mut feasible = true;
            for (node, went_left) in path {
                let Node::Internal { feature, split, .. } = tree.node(node) else { unreachable!() };
                let left = self.encode_edge_literal(*feature, split);
                match if went_left { left } else { left.negate() } {
                    EdgeLit::True => {}
                    EdgeLit::False => {
                        feasible = false;
                        break;
                    }
                    EdgeLit::Lit(l) => clause.push(!l),
                }
            }
            if feasible {
                clause.push(votes[class].pos());
                self.cnf.add_clause(clause);
            }
        }
    }

    fn encode_one_class_per_tree(&mut self, votes: &[Var]) {
        let wires: Vec<Wire> = votes.iter().map(|v| v.pos().into()).collect();
        exactly_one(&mut self.cnf, &wires, self.opts.card);
        self.sync_roles();
    }

    fn encode_domain_constraints(&mut self) {
        for layout in self.abs.layouts() {
            let zs = layout.one_hot_vars();
            if !zs.is_empty() {
                let wires: Vec<Wire> = zs.iter().map(|v| v.pos().into()).collect();
                exactly_one(&mut self.cnf, &wires, self.opts.card);
            }
        }
        self.sync_roles();
    }

    fn encode_misclassification(&mut self, votes: &[Vec<Var>], target: ClassId) -> ComparatorVars {
        let k = self.forest.num_classes();
        let m = votes.len();
        let mut cmp = ComparatorVars::default();
        if k == 1 {
            self.cnf.add_clause([]);
            return cmp;
        }
        let card = self.opts.card;
        let not_target: Vec<Wire> = votes.iter().map(|v| (!v[target].pos()).into()).collect();
        if !self.opts.selector_reduction {
            let mut choices = Vec::new();
            for rival in (0..k).filter(|&r| r != target) {
                let mut inputs: Vec<Wire> = votes.iter().map(|v| v[rival].pos().into()).collect();
                inputs.extend_from_slice(&not_target);
                let bound = if rival < target { m } else { m + 1 };
                let out = at_least_output(&mut self.cnf, &inputs, bound, card);
                self.sync_roles();
                let q = self.fresh(format!("rival {}", self.forest.classes()[rival]));
                if let Some(out) = out {
                    add_wire_clause(&mut self.cnf, &[Wire::Lit(q.neg()), out]);
                }
                choices.push(q.pos());
            }
            self.cnf.add_clause(choices);
            return cmp;
        }
        if k == 2 {
            let rival = 1 - target;
            let inputs: Vec<Wire> = votes.iter().map(|v| v[rival].pos().into()).collect();
            let bound = if rival < target { m.div_ceil(2) } else { m / 2 + 1 };
            at_least(&mut self.cnf, &inputs, bound, card);
            self.sync_roles();
            return cmp;
        }
        // Selector r stands for class r - 1, except r = 0 and r = target + 1.
        let dummy_succ = target + 1;
        cmp.selectors = (0..=k)
            .map(|r| {
                let role = if r == 0 || r == dummy_succ {
                    format!("selector p{r} (placeholder)")
                } else {
                    format!("selector p{r} {}", self.forest.classes()[r - 1])
                };
                self.fresh(role)
            })
            .collect();
        cmp.z_prec = (0..m).map(|i| self.fresh(format!("z_prec tree {i}"))).collect();
        cmp.z_succ = (0..m).map(|i| self.fresh(format!("z_succ tree {i}"))).collect();
        let p = cmp.selectors.clone();
        for r in 0..=k {
            let z = if r < dummy_succ { &cmp.z_prec } else { &cmp.z_succ };
            for i in 0..m {
                if r == 0 || r == dummy_succ {
                    self.cnf.add_clause([p[r].neg(), z[i].pos()]);
                } else {
                    let l = votes[i][r - 1].pos();
                    self.cnf.add_clause([p[r].neg(), z[i].neg(), l]);
                    self.cnf.add_clause([p[r].neg(), z[i].pos(), !l]);
                }
            }
        }
        self.cnf.add_clause([p[0].neg(), p[dummy_succ].neg()]);
        let low: Vec<Wire> = p[..dummy_succ].iter().map(|v| v.pos().into()).collect();
        let high: Vec<Wire> = p[dummy_succ..].iter().map(|v| v.pos().into()).collect();
        exactly_one(&mut self.cnf, &low, card);
        exactly_one(&mut self.cnf, &high, card);
        let mut prec: Vec<Wire> = cmp.z_prec.iter().map(|v| v.pos().into()).collect();
        prec.extend_from_slice(&not_target);
        at_least(&mut self.cnf, &prec, m, card);
        let mut succ: Vec<Wire> = cmp.z_succ.iter().map(|v| v.pos().into()).collect();
        succ.extend_from_slice(&not_target);
        at_least(&mut self.cnf, &succ, m + 1, card);
        self.sync_roles();
        cmp
    }
}

/// Encodes the forest with the claim "the prediction differs from `target`".
/// No soft literals are attached.
pub fn encode_for_class(forest: &Forest, abs: &Abstraction, target: ClassId, opts: &EncoderOptions) -> CnfEncoding {
    let mut c = Collector::new(forest, abs, *opts);
    let vote_vars: Vec<Vec<Var>> = (0..forest.num_trees())
        .map(|i| (0..forest.num_classes()).map(|j| c.fresh(format!("vote tree {i} {}", forest.classes()[j]))).collect())
        .collect();
    for (tree, votes) in forest.trees().iter().zip(&vote_vars) {
        c.encode_tree_paths(tree, votes);
    }
    for votes in &vote_vars {
        c.encode_one_class_per_tree(votes);
    }
    c.encode_domain_constraints();
    let forest_clauses = c.cnf.num_clauses();
    let comparators = c.encode_misclassification(&vote_vars, target);
    c.sync_roles();
    CnfEncoding {
        cnf: c.cnf,
        forest_clauses,
        vote_vars,
        comparators,
        soft: SoftLiterals::default(),
        target,
        roles: c.roles,
    }
}

/// Hard clauses for "the prediction differs from the one on `instance`" plus
/// the instance's soft literals.
pub fn encode(forest: &Forest, abs: &Abstraction, instance: &Instance, opts: &EncoderOptions) -> CnfEncoding {
    let mut enc = encode_for_class(forest, abs, forest.predict(instance), opts);
    enc.soft = abs.instance_literals(instance);
    enc
}
