//! In-process CDCL solver.
//!
//! MiniSat-style: two watched literals with blockers, first-UIP learning
//! with local clause minimisation, VSIDS over a binary heap, phase saving,
//! Luby restarts and activity-based learnt clause deletion. Assumptions are
//! placed as the first decisions; a failed assumption is traced back
//! through the implication graph to produce the core.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, OracleError, OracleStats, SatOracle, SolveOutcome};
use crate::cnf::{Lit, Var};

/// Internal literal code: `2 * var + negated`, with 0-based variables.
type ILit = u32;
type CRef = u32;

const NO_REASON: CRef = u32::MAX;
const RESTART_BASE: u64 = 100;

#[inline]
fn ilit(l: Lit) -> ILit {
    let v = l.var().index() - 1;
    2 * v + u32::from(!l.is_positive())
}

#[inline]
fn elit(l: ILit) -> Lit {
    Var::new((l >> 1) + 1).lit(l & 1 == 0)
}

#[inline]
fn ivar(l: ILit) -> usize {
    (l >> 1) as usize
}

/// Decision polarity for unassigned variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    /// Reuse the last value a variable had, starting from false.
    #[default]
    Saved,
    AlwaysTrue,
    AlwaysFalse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverConfig {
    /// Seeds the initial variable activities; equal seeds give equal runs.
    pub seed: u64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: ILit,
}

#[derive(Debug)]
struct Clause {
    lits: Vec<ILit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Debug)]
pub struct CdclSolver {
    config: SolverConfig,
    rng: ChaCha8Rng,
    ok: bool,
    clauses: Vec<Clause>,
    learnts: Vec<CRef>,
    watches: Vec<Vec<Watcher>>,
    /// Per variable: 1 true, -1 false, 0 unassigned.
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<CRef>,
    saved_phase: Vec<bool>,
    seen: Vec<bool>,
    trail: Vec<ILit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    heap: VarHeap,
    var_inc: f64,
    cla_inc: f64,
    max_learnts: f64,
    conflicts: u64,
    stats: OracleStats,
}

const VAR_DECAY: f64 = 0.95;
const CLA_DECAY: f64 = 0.999;

impl Default for CdclSolver {
    fn default() -> Self {
        Self::new(SolverConfig::default())
    }
}

impl CdclSolver {
    pub fn new(config: SolverConfig) -> Self {
        CdclSolver {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            ok: true,
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            saved_phase: Vec::new(),
            seen: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            heap: VarHeap::default(),
            var_inc: 1.0,
            cla_inc: 1.0,
            max_learnts: 0.0,
            conflicts: 0,
            stats: OracleStats::default(),
        }
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    fn n_vars(&self) -> usize {
        self.assigns.len()
    }

    #[inline]
    fn value(&self, l: ILit) -> i8 {
        let v = self.assigns[ivar(l)];
        if l & 1 == 0 {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: ILit, reason: CRef) {
        let v = ivar(l);
        debug_assert_eq!(self.assigns[v], 0);
        self.assigns[v] = if l & 1 == 0 { 1 } else { -1 };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn new_decision_level(&mut self) {
        self.trail_lim.push(self.trail.len());
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = ivar(l);
            self.saved_phase[v] = l & 1 == 0;
            self.assigns[v] = 0;
            self.reason[v] = NO_REASON;
            self.heap.insert(v);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl);
        self.qhead = start;
    }

    fn attach(&mut self, cref: CRef) {
        let c = &self.clauses[cref as usize];
        let (a, b) = (c.lits[0], c.lits[1]);
        self.watches[(a ^ 1) as usize].push(Watcher { cref, blocker: b });
        self.watches[(b ^ 1) as usize].push(Watcher { cref, blocker: a });
    }

    /// Returns a conflicting clause, if any.
    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut j = 0;
            'watch: while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                if self.clauses[cref as usize].deleted {
                    continue;
                }
                {
                    let c = &mut self.clauses[cref as usize];
                    if c.lits[0] == false_lit {
                        c.lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref as usize].lits[0];
                let nw = Watcher { cref, blocker: first };
                if first != w.blocker && self.value(first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref as usize].lits.len();
                for k in 2..len {
                    let lk = self.clauses[cref as usize].lits[k];
                    if self.value(lk) != -1 {
                        let c = &mut self.clauses[cref as usize];
                        c.lits.swap(1, k);
                        self.watches[(lk ^ 1) as usize].push(nw);
                        continue 'watch;
                    }
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == -1 {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, cref);
                }
            }
            ws.truncate(j);
            // Watchers pushed to this list during the loop (none can be, as
            // the new watch is never false) would be lost otherwise.
            debug_assert!(self.watches[p as usize].is_empty());
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.heap.activity[v] += self.var_inc;
        if self.heap.activity[v] > 1e100 {
            for a in &mut self.heap.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.decrease_key_of(v);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal
    /// first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<ILit>, usize) {
        let mut learnt: Vec<ILit> = vec![0];
        let mut path_c = 0usize;
        let mut p: Option<ILit> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level() as u32;
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let len = self.clauses[confl as usize].lits.len();
            for k in start..len {
                let q = self.clauses[confl as usize].lits[k];
                let v = ivar(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path_c += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[ivar(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            confl = self.reason[ivar(pl)];
            self.seen[ivar(pl)] = false;
            path_c -= 1;
            if path_c == 0 {
                break;
            }
        }
        learnt[0] = p.expect("conflict at positive level has a UIP") ^ 1;

        // Drop literals implied by the rest of the clause.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let r = self.reason[ivar(l)];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..].iter().all(|&q| {
                    let v = ivar(q);
                    self.seen[v] || self.level[v] == 0
                });
            if !redundant {
                keep.push(l);
            }
        }
        for &l in &learnt {
            self.seen[ivar(l)] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[ivar(learnt[i])] > self.level[ivar(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[ivar(learnt[1])] as usize
        };
        (learnt, bt)
    }

    /// Collects the assumptions responsible for `failed` being false.
    fn analyze_final(&mut self, failed: ILit) -> Vec<Lit> {
        let mut core = vec![elit(failed)];
        if self.decision_level() == 0 {
            return core;
        }
        self.seen[ivar(failed)] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let x = self.trail[i];
            let v = ivar(x);
            if !self.seen[v] {
                continue;
            }
            let r = self.reason[v];
            if r == NO_REASON {
                core.push(elit(x));
            } else {
                let len = self.clauses[r as usize].lits.len();
                for k in 1..len {
                    let q = self.clauses[r as usize].lits[k];
                    if self.level[ivar(q)] > 0 {
                        self.seen[ivar(q)] = true;
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[ivar(failed)] = false;
        core.sort();
        core.dedup();
        core
    }

    fn pick_branch_lit(&mut self) -> Option<ILit> {
        loop {
            let v = self.heap.pop()?;
            if self.assigns[v] == 0 {
                let positive = match self.config.phase {
                    Phase::Saved => self.saved_phase[v],
                    Phase::AlwaysTrue => true,
                    Phase::AlwaysFalse => false,
                };
                return Some(2 * v as u32 + u32::from(!positive));
            }
        }
    }

    fn locked(&self, cref: CRef) -> bool {
        let c = &self.clauses[cref as usize];
        let v = ivar(c.lits[0]);
        self.reason[v] == cref && self.value(c.lits[0]) == 1
    }

    fn reduce_db(&mut self) {
        let mut learnts = std::mem::take(&mut self.learnts);
        learnts.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            (ca.lits.len() <= 2)
                .cmp(&(cb.lits.len() <= 2))
                .then(ca.activity.total_cmp(&cb.activity))
        });
        let limit = self.cla_inc / learnts.len().max(1) as f64;
        let half = learnts.len() / 2;
        let mut kept = Vec::with_capacity(learnts.len());
        for (i, &cref) in learnts.iter().enumerate() {
            let c = &self.clauses[cref as usize];
            let removable = c.lits.len() > 2 && !self.locked(cref) && (i < half || c.activity < limit);
            if removable {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn search(&mut self, assumptions: &[ILit], budget: u64) -> Option<Result<(), Vec<Lit>>> {
        let mut local_conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local_conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(Err(Vec::new()));
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let cref = self.clauses.len() as CRef;
                    let first = learnt[0];
                    self.clauses.push(Clause { lits: learnt, learnt: true, deleted: false, activity: 0.0 });
                    self.attach(cref);
                    self.learnts.push(cref);
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                }
                self.var_inc /= VAR_DECAY;
                self.cla_inc /= CLA_DECAY;
            } else {
                if local_conflicts >= budget {
                    self.cancel_until(0);
                    return None;
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let a = assumptions[self.decision_level()];
                    match self.value(a) {
                        1 => self.new_decision_level(),
                        -1 => {
                            let core = self.analyze_final(a);
                            return Some(Err(core));
                        }
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => match self.pick_branch_lit() {
                        Some(l) => l,
                        None => return Some(Ok(())),
                    },
                };
                self.new_decision_level();
                self.enqueue(next, NO_REASON);
            }
        }
    }

    fn check_assumptions(&self, assumptions: &[Lit]) -> Result<Vec<ILit>, OracleError> {
        assumptions
            .iter()
            .map(|&a| {
                if a.var().index() as usize > self.n_vars() {
                    Err(OracleError::UnknownVariable(a))
                } else {
                    Ok(ilit(a))
                }
            })
            .collect()
    }

    fn solve_inner(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError> {
        let assumptions = self.check_assumptions(assumptions)?;
        if !self.ok {
            return Ok(SolveOutcome::Unsat(Vec::new()));
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Ok(SolveOutcome::Unsat(Vec::new()));
        }
        self.max_learnts = self.max_learnts.max(self.clauses.len() as f64 / 3.0).max(2000.0);
        let mut restarts = 0u32;
        let result = loop {
            let budget = luby(restarts) * RESTART_BASE;
            match self.search(&assumptions, budget) {
                Some(r) => break r,
                None => {
                    restarts += 1;
                    self.max_learnts *= 1.05;
                }
            }
        };
        let outcome = match result {
            Ok(()) => {
                let values = self.assigns.iter().map(|&a| a == 1).collect();
                SolveOutcome::Sat(Model::new(values))
            }
            Err(core) => SolveOutcome::Unsat(core),
        };
        self.cancel_until(0);
        Ok(outcome)
    }

    /// Unit propagation only: places the assumptions as decisions and
    /// returns the resulting partial assignment (indexed by `var - 1`), or
    /// `None` when propagation hits a conflict.
    pub fn propagate_under(&mut self, assumptions: &[Lit]) -> Result<Option<Vec<Option<bool>>>, OracleError> {
        let assumptions = self.check_assumptions(assumptions)?;
        if !self.ok {
            return Ok(None);
        }
        self.cancel_until(0);
        let mut result = self.propagate().is_none();
        for &a in &assumptions {
            if !result {
                break;
            }
            match self.value(a) {
                1 => continue,
                -1 => result = false,
                _ => {
                    self.new_decision_level();
                    self.enqueue(a, NO_REASON);
                    result = self.propagate().is_none();
                }
            }
        }
        let out = result.then(|| {
            self.assigns.iter().map(|&a| if a == 0 { None } else { Some(a == 1) }).collect()
        });
        self.cancel_until(0);
        Ok(out)
    }
}

impl SatOracle for CdclSolver {
    fn reserve_vars(&mut self, n: u32) {
        let n = n as usize;
        while self.n_vars() < n {
            let v = self.n_vars();
            self.assigns.push(0);
            self.level.push(0);
            self.reason.push(NO_REASON);
            self.saved_phase.push(false);
            self.seen.push(false);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            let jitter = self.rng.gen::<f64>() * 1e-5;
            self.heap.activity.push(jitter);
            self.heap.indices.push(usize::MAX);
            self.heap.insert(v);
        }
    }

    fn num_vars(&self) -> u32 {
        self.n_vars() as u32
    }

    fn add_clause(&mut self, clause: &[Lit]) -> Result<(), OracleError> {
        if let Some(max) = clause.iter().map(|l| l.var().index()).max() {
            self.reserve_vars(max);
        }
        if !self.ok {
            return Ok(());
        }
        self.cancel_until(0);
        let mut lits: Vec<ILit> = clause.iter().map(|&l| ilit(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return Ok(());
        }
        if lits.iter().any(|&l| self.value(l) == 1) {
            return Ok(());
        }
        lits.retain(|&l| self.value(l) == 0);
        match lits.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(lits[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.clauses.len() as CRef;
                self.clauses.push(Clause { lits, learnt: false, deleted: false, activity: 0.0 });
                self.attach(cref);
            }
        }
        Ok(())
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveOutcome, OracleError> {
        let start = Instant::now();
        let outcome = self.solve_inner(assumptions)?;
        self.stats.record(outcome.is_sat(), start.elapsed());
        Ok(outcome)
    }

    fn stats(&self) -> &OracleStats {
        &self.stats
    }
}

/// Luby sequence 1, 1, 2, 1, 1, 2, 4, ...
fn luby(mut i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != u64::from(i) {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size as u32;
    }
    1u64 << seq
}

/// Max-heap of variables ordered by activity.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<usize>,
    indices: Vec<usize>,
    activity: Vec<f64>,
}

impl VarHeap {
    fn contains(&self, v: usize) -> bool {
        self.indices[v] != usize::MAX
    }

    fn insert(&mut self, v: usize) {
        if self.contains(v) {
            return;
        }
        self.indices[v] = self.heap.len();
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1);
    }

    fn decrease_key_of(&mut self, v: usize) {
        if self.contains(v) {
            self.sift_up(self.indices[v]);
        }
    }

    fn pop(&mut self) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.indices[top] = usize::MAX;
        if !self.heap.is_empty() {
            self.indices[self.heap[0]] = 0;
            self.sift_down(0);
        }
        Some(top)
    }

    fn better(&self, a: usize, b: usize) -> bool {
        let (x, y) = (self.activity[a], self.activity[b]);
        x > y || (x == y && a < b)
    }

    fn sift_up(&mut self, mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.better(v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.indices[self.heap[i]] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.indices[v] = i;
    }

    fn sift_down(&mut self, mut i: usize) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && self.better(self.heap[r], self.heap[l]) { r } else { l };
            if !self.better(self.heap[child], v) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.indices[self.heap[i]] = i;
            i = child;
        }
        self.heap[i] = v;
        self.indices[v] = i;
    }
}
