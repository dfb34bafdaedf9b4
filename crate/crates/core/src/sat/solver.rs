//! Conflict-driven clause learning with incremental solving under assumptions.
//!
//! Two watched literals (binary clauses live in dedicated implication lists),
//! first-UIP learning with recursive clause minimisation, VSIDS branching,
//! phase saving, Luby restarts and LBD-based learnt clause reduction.
//! Assumptions are the first decisions; when one is refuted the final conflict
//! is traced back to the responsible assumptions.

use std::mem;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::heap::VarHeap;
use super::lit::{Lit, Var};

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Sat,
    Unsat,
    Timeout,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    #[serde(with = "crate::util::duration_secs")]
    pub wall_time: Duration,
}

impl SolveStats {
    pub fn accumulate(&mut self, other: &SolveStats) {
        self.conflicts += other.conflicts;
        self.decisions += other.decisions;
        self.propagations += other.propagations;
        self.restarts += other.restarts;
        self.wall_time += other.wall_time;
    }
}

/// Result of one `solve` call.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: Status,
    /// Total assignment indexed by variable; present iff `status == Sat`.
    pub model: Option<Vec<bool>>,
    /// Subset of the assumptions that is jointly refuted; meaningful iff `status == Unsat`.
    pub core: Vec<Lit>,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }

    pub fn is_unsat(&self) -> bool {
        self.status == Status::Unsat
    }

    pub fn value(&self, lit: Lit) -> Option<bool> {
        self.model.as_ref().map(|m| lit.eval(m))
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Zero keeps the initial variable order; any other value perturbs it deterministically.
    pub seed: u64,
    pub var_decay: f64,
    pub clause_decay: f64,
    pub restart_base: u64,
    pub first_reduce: u64,
    pub reduce_increment: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_base: 100,
            first_reduce: 2000,
            reduce_increment: 300,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reason {
    Decision,
    Clause(u32),
    /// Implied by the binary clause `(implied ∨ other)`; holds `other`.
    Binary(Lit),
}

#[derive(Clone, Copy, Debug)]
enum Conflict {
    Clause(u32),
    Binary(Lit, Lit),
}

#[derive(Clone, Copy, Debug)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

#[derive(Clone, Debug)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f64,
}

enum SearchResult {
    Sat,
    Unsat,
    Restart,
    Timeout,
}

pub struct Solver {
    config: SolverConfig,
    rng: ChaCha8Rng,
    ok: bool,

    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    heap: VarHeap,
    var_inc: f64,

    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    clauses: Vec<ClauseData>,
    free_slots: Vec<u32>,
    learnts: Vec<u32>,
    cla_inc: f64,
    watches: Vec<Vec<Watcher>>,
    binaries: Vec<Vec<Lit>>,
    binary_count: usize,

    seen: Vec<bool>,
    analyze_stack: Vec<Lit>,
    analyze_clear: Vec<Lit>,
    level_stamp: Vec<u64>,
    stamp: u64,

    assumptions: Vec<Lit>,
    core: Vec<Lit>,
    next_reduce: u64,

    total: SolveStats,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(SolverConfig::default())
    }
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let next_reduce = config.first_reduce;
        Solver {
            config,
            rng,
            ok: true,
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            heap: VarHeap::default(),
            var_inc: 1.0,
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            clauses: Vec::new(),
            free_slots: Vec::new(),
            learnts: Vec::new(),
            cla_inc: 1.0,
            watches: Vec::new(),
            binaries: Vec::new(),
            binary_count: 0,
            seen: Vec::new(),
            analyze_stack: Vec::new(),
            analyze_clear: Vec::new(),
            level_stamp: vec![0],
            stamp: 0,
            assumptions: Vec::new(),
            core: Vec::new(),
            next_reduce,
            total: SolveStats::default(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len() - self.free_slots.len() - self.learnts.len() + self.binary_count
    }

    pub fn num_learnts(&self) -> usize {
        self.learnts.len()
    }

    /// False once the clause set is known to be unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Cumulative statistics over every `solve` call on this handle.
    pub fn total_stats(&self) -> SolveStats {
        self.total
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len();
        self.ensure_vars(v + 1);
        Var::new(v as u32)
    }

    pub fn ensure_vars(&mut self, n: usize) {
        let old = self.assigns.len();
        if n <= old {
            return;
        }
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, Reason::Decision);
        self.polarity.resize(n, false);
        self.seen.resize(n, false);
        self.watches.resize_with(2 * n, Vec::new);
        self.binaries.resize_with(2 * n, Vec::new);
        self.heap.grow(n);
        for v in old..n {
            let act = if self.config.seed != 0 {
                self.rng.random::<f64>() * 1e-5
            } else {
                0.0
            };
            self.activity.push(act);
            self.heap.insert(v as u32, &self.activity);
        }
    }

    /// Preferred polarity for the first decision on `var` (later overridden by phase saving).
    pub fn set_phase(&mut self, var: Var, positive: bool) {
        self.ensure_vars(var.index() + 1);
        self.polarity[var.index()] = positive;
    }

    /// Adds a permanent clause. Returns `false` when the clause set became
    /// unsatisfiable at the root (an empty clause is accepted and flagged this way).
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return false;
        }
        if let Some(max) = lits.iter().map(|l| l.var().index()).max() {
            self.ensure_vars(max + 1);
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == !l {
                return true; // tautology
            }
            match self.value(l) {
                TRUE => return true,
                FALSE => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], Reason::Decision);
                self.ok = self.propagate().is_none();
                self.ok
            }
            2 => {
                self.attach_binary(out[0], out[1]);
                true
            }
            _ => {
                self.alloc_clause(out, false, 0);
                true
            }
        }
    }

    /// Solves under `assumptions` until `deadline`.
    pub fn solve(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> SolveOutcome {
        let start = Instant::now();
        let before = self.total;
        self.core.clear();
        if let Some(max) = assumptions.iter().map(|l| l.var().index()).max() {
            self.ensure_vars(max + 1);
        }
        let status = if !self.ok {
            Status::Unsat
        } else {
            self.assumptions = assumptions.to_vec();
            let mut restarts = 0u32;
            loop {
                let budget = luby(2.0, restarts) as u64 * self.config.restart_base;
                match self.search(budget, deadline) {
                    SearchResult::Restart => {
                        restarts += 1;
                        self.total.restarts += 1;
                    }
                    SearchResult::Sat => break Status::Sat,
                    SearchResult::Unsat => break Status::Unsat,
                    SearchResult::Timeout => break Status::Timeout,
                }
            }
        };
        let model = (status == Status::Sat).then(|| self.assigns.iter().map(|&a| a == TRUE).collect());
        self.cancel_until(0);
        self.assumptions.clear();
        let stats = SolveStats {
            conflicts: self.total.conflicts - before.conflicts,
            decisions: self.total.decisions - before.decisions,
            propagations: self.total.propagations - before.propagations,
            restarts: self.total.restarts - before.restarts,
            wall_time: start.elapsed(),
        };
        self.total.wall_time += stats.wall_time;
        let core = if status == Status::Unsat { mem::take(&mut self.core) } else { Vec::new() };
        SolveOutcome { status, model, core, stats }
    }

    // ---------------------------------------------------------------- internals

    #[inline]
    fn value(&self, l: Lit) -> i8 {
        let a = self.assigns[l.var().index()];
        if l.is_positive() {
            a
        } else {
            -a
        }
    }

    #[inline]
    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    #[inline]
    fn enqueue(&mut self, l: Lit, reason: Reason) {
        let v = l.var().index();
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = if l.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn attach_binary(&mut self, a: Lit, b: Lit) {
        self.binaries[a.code()].push(b);
        self.binaries[b.code()].push(a);
        self.binary_count += 1;
    }

    fn alloc_clause(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> u32 {
        let data = ClauseData { lits, learnt, deleted: false, lbd, activity: 0.0 };
        let cref = match self.free_slots.pop() {
            Some(slot) => {
                self.clauses[slot as usize] = data;
                slot
            }
            None => {
                self.clauses.push(data);
                (self.clauses.len() - 1) as u32
            }
        };
        let c = &self.clauses[cref as usize].lits;
        let (w0, w1) = (c[0], c[1]);
        self.watches[w0.code()].push(Watcher { cref, blocker: w1 });
        self.watches[w1.code()].push(Watcher { cref, blocker: w0 });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn propagate(&mut self) -> Option<Conflict> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.total.propagations += 1;
            let false_lit = !p;

            for k in 0..self.binaries[false_lit.code()].len() {
                let other = self.binaries[false_lit.code()][k];
                match self.value(other) {
                    TRUE => {}
                    FALSE => {
                        self.qhead = self.trail.len();
                        return Some(Conflict::Binary(false_lit, other));
                    }
                    _ => self.enqueue(other, Reason::Binary(false_lit)),
                }
            }

            let mut ws = mem::take(&mut self.watches[false_lit.code()]);
            let mut conflict = None;
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let first = {
                    let c = &mut self.clauses[cref as usize].lits;
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                    c[0]
                };
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = Watcher { cref, blocker: first };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                let len = self.clauses[cref as usize].lits.len();
                for k in 2..len {
                    let cand = self.clauses[cref as usize].lits[k];
                    if self.value(cand) != FALSE {
                        let c = &mut self.clauses[cref as usize].lits;
                        c.swap(1, k);
                        self.watches[cand.code()].push(Watcher { cref, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watcher { cref, blocker: first };
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(Conflict::Clause(cref));
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Reason::Clause(cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for idx in (lim..self.trail.len()).rev() {
            let l = self.trail[idx];
            let v = l.var().index();
            self.assigns[v] = UNDEF;
            self.polarity[v] = l.is_positive();
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = lim;
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// Literals of the reason for `v`, excluding the implied literal itself.
    fn for_each_antecedent(&self, v: usize, mut f: impl FnMut(Lit)) {
        match self.reason[v] {
            Reason::Decision => {}
            Reason::Binary(other) => f(other),
            Reason::Clause(cref) => {
                for &q in &self.clauses[cref as usize].lits[1..] {
                    f(q);
                }
            }
        }
    }

    fn analyze(&mut self, confl: Conflict) -> (Vec<Lit>, usize, u32) {
        let mut learnt = vec![Lit::from_dimacs(1)];
        let mut path_count = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let current = self.decision_level() as u32;
        let mut confl = Some(confl);

        loop {
            let mut lits: [Lit; 2] = [Lit::from_dimacs(1); 2];
            let slice: &[Lit];
            let mut buffer = Vec::new();
            match confl.take() {
                Some(Conflict::Binary(a, b)) => {
                    lits = [a, b];
                    slice = &lits;
                }
                Some(Conflict::Clause(cref)) => {
                    if self.clauses[cref as usize].learnt {
                        self.bump_clause(cref);
                    }
                    buffer.extend_from_slice(&self.clauses[cref as usize].lits);
                    slice = &buffer;
                }
                None => {
                    let v = p.expect("implied literal").var().index();
                    match self.reason[v] {
                        Reason::Binary(o) => {
                            lits[0] = o;
                            slice = &lits[..1];
                        }
                        Reason::Clause(cref) => {
                            if self.clauses[cref as usize].learnt {
                                self.bump_clause(cref);
                            }
                            buffer.extend_from_slice(&self.clauses[cref as usize].lits[1..]);
                            slice = &buffer;
                        }
                        Reason::Decision => unreachable!("decision reached before UIP"),
                    }
                }
            }
            for &q in slice {
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path_count += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[lit.var().index()] = false;
            path_count -= 1;
            if path_count == 0 {
                break;
            }
        }
        learnt[0] = !p.expect("uip");

        // Recursive minimisation.
        self.analyze_clear.clear();
        self.analyze_clear.extend_from_slice(&learnt);
        let mut abstract_levels = 0u32;
        for &l in &learnt[1..] {
            abstract_levels |= 1 << (self.level[l.var().index()] & 31);
        }
        let mut kept = 1;
        for i in 1..learnt.len() {
            let l = learnt[i];
            let keep = self.reason[l.var().index()] == Reason::Decision || !self.lit_redundant(l, abstract_levels);
            if keep {
                learnt[kept] = l;
                kept += 1;
            }
        }
        learnt.truncate(kept);
        for k in 0..self.analyze_clear.len() {
            let v = self.analyze_clear[k].var().index();
            self.seen[v] = false;
        }

        let backtrack = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().index()] as usize
        };
        let lbd = self.compute_lbd(&learnt);
        (learnt, backtrack, lbd)
    }

    fn lit_redundant(&mut self, p: Lit, abstract_levels: u32) -> bool {
        self.analyze_stack.clear();
        self.analyze_stack.push(p);
        let top = self.analyze_clear.len();
        while let Some(q) = self.analyze_stack.pop() {
            let mut antecedents = Vec::new();
            self.for_each_antecedent(q.var().index(), |a| antecedents.push(a));
            for a in antecedents {
                let v = a.var().index();
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                if self.reason[v] != Reason::Decision && (abstract_levels & (1 << (self.level[v] & 31))) != 0 {
                    self.seen[v] = true;
                    self.analyze_stack.push(a);
                    self.analyze_clear.push(a);
                } else {
                    for k in top..self.analyze_clear.len() {
                        let w = self.analyze_clear[k].var().index();
                        self.seen[w] = false;
                    }
                    self.analyze_clear.truncate(top);
                    return false;
                }
            }
        }
        true
    }

    fn compute_lbd(&mut self, lits: &[Lit]) -> u32 {
        self.stamp += 1;
        let needed = self.decision_level() + 1;
        if self.level_stamp.len() < needed {
            self.level_stamp.resize(needed, 0);
        }
        let mut n = 0;
        for &l in lits {
            let lv = self.level[l.var().index()] as usize;
            if self.level_stamp[lv] != self.stamp {
                self.level_stamp[lv] = self.stamp;
                n += 1;
            }
        }
        n
    }

    /// Collects the assumptions responsible for `p` being true, where `!p` is an assumption.
    fn analyze_final(&mut self, p: Lit) {
        self.core.clear();
        self.core.push(!p);
        if self.decision_level() == 0 {
            return;
        }
        self.seen[p.var().index()] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            if !self.seen[v] {
                continue;
            }
            if self.reason[v] == Reason::Decision {
                // Below the assumption levels every decision is an assumption.
                self.core.push(l);
            } else {
                let mut ante = Vec::new();
                self.for_each_antecedent(v, |a| ante.push(a));
                for a in ante {
                    if self.level[a.var().index()] > 0 {
                        self.seen[a.var().index()] = true;
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var().index()] = false;
        self.core.sort_unstable();
        self.core.dedup();
        let core = mem::take(&mut self.core);
        // Report literals exactly as they were assumed, in assumption order.
        self.core = self.assumptions.iter().copied().filter(|a| core.binary_search(a).is_ok()).collect();
        self.core.dedup();
    }

    fn locked(&self, cref: u32) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.value(first) == TRUE && self.reason[first.var().index()] == Reason::Clause(cref)
    }

    fn reduce_db(&mut self) {
        let mut order: Vec<u32> = self.learnts.clone();
        order.sort_by(|&a, &b| {
            let ca = &self.clauses[a as usize];
            let cb = &self.clauses[b as usize];
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.partial_cmp(&cb.activity).unwrap_or(std::cmp::Ordering::Equal))
        });
        let target = order.len() / 2;
        let mut removed = 0;
        for &cref in &order {
            if removed >= target {
                break;
            }
            let c = &self.clauses[cref as usize];
            if c.lbd <= 2 || self.locked(cref) {
                continue;
            }
            self.clauses[cref as usize].deleted = true;
            removed += 1;
        }
        if removed == 0 {
            return;
        }
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !self.clauses[w.cref as usize].deleted);
        }
        let clauses = &mut self.clauses;
        let free = &mut self.free_slots;
        self.learnts.retain(|&cref| {
            if clauses[cref as usize].deleted {
                clauses[cref as usize].lits = Vec::new();
                free.push(cref);
                false
            } else {
                true
            }
        });
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop_max(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(Var::new(v).lit(self.polarity[v as usize]));
            }
        }
        None
    }

    fn search(&mut self, conflict_budget: u64, deadline: Option<Instant>) -> SearchResult {
        let mut conflicts_here = 0u64;
        let mut steps = 0u32;
        loop {
            if let Some(confl) = self.propagate() {
                self.total.conflicts += 1;
                conflicts_here += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SearchResult::Unsat;
                }
                let (learnt, backtrack, lbd) = self.analyze(confl);
                self.cancel_until(backtrack);
                match learnt.len() {
                    1 => self.enqueue(learnt[0], Reason::Decision),
                    2 => {
                        self.attach_binary(learnt[0], learnt[1]);
                        self.enqueue(learnt[0], Reason::Binary(learnt[1]));
                    }
                    _ => {
                        let first = learnt[0];
                        let cref = self.alloc_clause(learnt, true, lbd);
                        self.bump_clause(cref);
                        self.enqueue(first, Reason::Clause(cref));
                    }
                }
                self.var_inc /= self.config.var_decay;
                self.cla_inc /= self.config.clause_decay;
                if self.total.conflicts % 128 == 0 && timed_out(deadline) {
                    return SearchResult::Timeout;
                }
            } else {
                steps = steps.wrapping_add(1);
                if steps % 1024 == 0 && timed_out(deadline) {
                    return SearchResult::Timeout;
                }
                if conflicts_here >= conflict_budget {
                    self.cancel_until(0);
                    return SearchResult::Restart;
                }
                if self.total.conflicts >= self.next_reduce {
                    self.next_reduce = self.total.conflicts + self.config.first_reduce
                        + self.config.reduce_increment * (self.total.restarts + 1);
                    self.reduce_db();
                }

                let mut next = None;
                while self.decision_level() < self.assumptions.len() {
                    let a = self.assumptions[self.decision_level()];
                    match self.value(a) {
                        TRUE => self.trail_lim.push(self.trail.len()),
                        FALSE => {
                            self.analyze_final(!a);
                            return SearchResult::Unsat;
                        }
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => {
                        self.total.decisions += 1;
                        match self.pick_branch() {
                            Some(l) => l,
                            None => return SearchResult::Sat,
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, Reason::Decision);
            }
        }
    }
}

fn timed_out(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// The Luby sequence scaled by `y`: 1, 1, 2, 1, 1, 2, 4, ...
fn luby(y: f64, mut x: u32) -> f64 {
    let mut size = 1u32;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}
