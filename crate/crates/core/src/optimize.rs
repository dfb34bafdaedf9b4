//! Objectives on top of the solver: fewest used teams, and the weighted
//! maximum number of allocated tasks when some tasks may stay unset.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::card::WeightedCounter;
use crate::encode::{ConstraintKind, ConstraintLabel, EncodeError, LabeledFormula};
use crate::sat::{self, Budget, Lit, SatError, SolveStats, Solver, SolverConfig, Status, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("weight for {0} must be a positive integer")]
    NonPositiveWeight(String),
    #[error("weight given for unknown activity {0}")]
    UnknownActivity(String),
    #[error("task allocation constraints are hard; the weighted objective needs them soft")]
    TaskAllocationHard,
    #[error("budget exhausted before any solution was found")]
    BudgetExhausted,
    #[error("hard constraints conflict: {}", keys(.0))]
    HardConflict(Vec<ConstraintLabel>),
}

fn keys(labels: &[ConstraintLabel]) -> String {
    labels.iter().map(|l| l.key()).collect::<Vec<_>>().join(", ")
}

/// How optimality of an objective value was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// The next tighter bound was refuted.
    Refutation,
    /// The value meets a clique lower bound.
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub allocation: BTreeMap<String, String>,
    /// Tasks left without a team; only relaxed tasks can appear here.
    pub unallocated: Vec<String>,
    /// Teams performing at least one task, in instance order.
    pub used_teams: Vec<String>,
    pub objective: usize,
    pub proven_optimal: bool,
    pub certificate: Option<Certificate>,
    pub lower_bound: usize,
    pub stats: Vec<SolveStats>,
    #[serde(skip)]
    pub model: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Minimized {
    Solved(OptimalSolution),
    /// Unsatisfiable with the labels of the refuted soft groups (not minimised).
    Infeasible { core: Vec<ConstraintLabel>, stats: Vec<SolveStats> },
    /// Budget ran out; carries the incumbent when one was found.
    Timeout { incumbent: Option<OptimalSolution>, stats: Vec<SolveStats> },
}

impl Minimized {
    pub fn solution(&self) -> Option<&OptimalSolution> {
        match self {
            Minimized::Solved(s) => Some(s),
            Minimized::Timeout { incumbent, .. } => incumbent.as_ref(),
            Minimized::Infeasible { .. } => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Minimized::Infeasible { .. })
    }

    pub fn stats(&self) -> &[SolveStats] {
        match self {
            Minimized::Solved(s) => &s.stats,
            Minimized::Infeasible { stats, .. } | Minimized::Timeout { stats, .. } => stats,
        }
    }
}

/// Positive integer priority per activity; absent activities weigh 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorityWeights(pub BTreeMap<String, u64>);

impl PriorityWeights {
    pub fn get(&self, activity: &str) -> u64 {
        self.0.get(activity).copied().unwrap_or(1)
    }

    pub fn set(&mut self, activity: impl Into<String>, weight: u64) {
        self.0.insert(activity.into(), weight);
    }

    pub fn validate(&self, formula: &LabeledFormula) -> Result<(), OptimizeError> {
        for (id, &w) in &self.0 {
            if !formula.var_map.activities.contains(id) {
                return Err(OptimizeError::UnknownActivity(id.clone()));
            }
            if w == 0 {
                return Err(OptimizeError::NonPositiveWeight(id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution {
    pub allocation: BTreeMap<String, String>,
    pub unallocated: Vec<String>,
    pub allocated_weight: u64,
    pub total_weight: u64,
    pub proven_optimal: bool,
    pub stats: Vec<SolveStats>,
    #[serde(skip)]
    pub model: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    pub solver: SolverConfig,
    /// Accept an incumbent equal to the clique lower bound without a refutation.
    pub use_lower_bound: bool,
    /// Seed decision phases from [`greedy_allocation`].
    pub greedy_phases: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { solver: SolverConfig::default(), use_lower_bound: true, greedy_phases: true }
    }
}

pub(crate) fn decode_allocation(formula: &LabeledFormula, model: &[bool]) -> (BTreeMap<String, String>, Vec<String>) {
    let vm = &formula.var_map;
    let mut allocation = BTreeMap::new();
    let mut unallocated = Vec::new();
    for (a, id) in vm.activities.iter().enumerate() {
        match vm.allocated_team(model, a) {
            Some(w) => {
                allocation.insert(id.clone(), vm.teams[w].clone());
            }
            None => unallocated.push(id.clone()),
        }
    }
    (allocation, unallocated)
}

fn image_teams(formula: &LabeledFormula, model: &[bool]) -> Vec<usize> {
    let vm = &formula.var_map;
    (0..vm.teams.len())
        .filter(|&w| (0..vm.activities.len()).any(|a| model[vm.alloc(a, w).index()]))
        .collect()
}

/// Largest number of enforced tasks that pairwise conflict at one instant;
/// cliques touching a non-enforced overlap are skipped.
pub fn clique_lower_bound(formula: &LabeledFormula, assumptions: &[Lit]) -> usize {
    let enforced_sel: BTreeSet<Lit> = assumptions.iter().copied().collect();
    let enforced = |gid: usize| formula.groups[gid].selector.is_none_or(|s| enforced_sel.contains(&s));
    let task_enforced: Vec<bool> = formula.task_groups.iter().map(|&g| enforced(g)).collect();
    let mut best = 0;
    'cliques: for clique in &formula.conflict_cliques {
        let members: Vec<usize> = clique.iter().copied().filter(|&a| task_enforced[a]).collect();
        if members.len() <= best {
            continue;
        }
        for (i, &x) in members.iter().enumerate() {
            for &y in &members[i + 1..] {
                match formula.overlap_groups.get(&(x.min(y), x.max(y))) {
                    Some(&g) if enforced(g) => {}
                    _ => continue 'cliques,
                }
            }
        }
        best = members.len();
    }
    best
}

fn labels_of_core(formula: &LabeledFormula, core: &[Lit]) -> Vec<ConstraintLabel> {
    core.iter()
        .filter_map(|&l| formula.group_of_selector(l))
        .map(|g| formula.label(g).clone())
        .collect()
}

/// Greedy allocation by start time: each task goes to the used team that became
/// free most recently, else to the first free team. Tasks with no free team stay unset.
pub fn greedy_allocation(formula: &LabeledFormula) -> Vec<Option<usize>> {
    let vm = &formula.var_map;
    let (n, m) = (vm.activities.len(), vm.teams.len());
    let forbidden = |a: usize, w: usize| {
        let label = ConstraintLabel::new(ConstraintKind::Compatibility, vec![vm.activities[a].clone(), vm.teams[w].clone()]);
        formula.group_of(&label).is_some_and(|g| !formula.groups[g].is_soft())
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&a| (vm.windows[a].0, vm.windows[a].1, a));
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut out = vec![None; n];
    for a in order {
        let free = |w: usize| {
            assigned[w].iter().all(|&b| !formula.overlap_groups.contains_key(&(a.min(b), a.max(b))))
        };
        let last_end = |w: usize| assigned[w].iter().map(|&b| vm.windows[b].1).max();
        let best_used = (0..m)
            .filter(|&w| !assigned[w].is_empty() && !forbidden(a, w) && free(w))
            .max_by_key(|&w| (last_end(w), std::cmp::Reverse(w)));
        let pick = best_used.or_else(|| (0..m).find(|&w| assigned[w].is_empty() && !forbidden(a, w)));
        if let Some(w) = pick {
            assigned[w].push(a);
            out[a] = Some(w);
        }
    }
    out
}

fn prepare(formula: &LabeledFormula, options: &OptimizeOptions) -> Result<Solver, OptimizeError> {
    let mut solver = sat::load(formula, options.solver.clone())?;
    let vm = &formula.var_map;
    let hint = if options.greedy_phases { greedy_allocation(formula) } else { vec![None; vm.activities.len()] };
    let mut used = vec![false; vm.teams.len()];
    for (a, choice) in hint.iter().enumerate() {
        if let Some(w) = *choice {
            solver.set_phase(vm.alloc(a, w), true);
            used[w] = true;
        }
    }
    for (w, &u) in used.iter().enumerate() {
        solver.set_phase(vm.used(w), u);
    }
    Ok(solver)
}

/// Minimises used teams with every soft group enforced.
pub fn minimize_used_teams(formula: &LabeledFormula, budget: Budget) -> Result<Minimized, OptimizeError> {
    let assumptions = formula.relax([])?;
    minimize_used_teams_with(formula, &assumptions, budget, &OptimizeOptions::default())
}

/// Descending linear search on the number of used teams under `assumptions`.
pub fn minimize_used_teams_with(
    formula: &LabeledFormula,
    assumptions: &[Lit],
    budget: Budget,
    options: &OptimizeOptions,
) -> Result<Minimized, OptimizeError> {
    let mut solver = prepare(formula, options)?;
    let lower_bound = if options.use_lower_bound { clique_lower_bound(formula, assumptions) } else { 0 };
    let mut stats = Vec::new();
    let mut incumbent: Option<OptimalSolution> = None;
    let mut counter: Option<WeightedCounter> = None;

    loop {
        let out = solver.solve(assumptions, budget.deadline());
        stats.push(out.stats);
        match out.status {
            Status::Timeout => {
                return Ok(Minimized::Timeout { incumbent: incumbent.map(|s| OptimalSolution { stats: stats.clone(), ..s }), stats });
            }
            Status::Unsat => {
                return Ok(match incumbent {
                    None => Minimized::Infeasible { core: labels_of_core(formula, &out.core), stats },
                    Some(s) => Minimized::Solved(OptimalSolution {
                        proven_optimal: true,
                        certificate: Some(Certificate::Refutation),
                        stats,
                        ..s
                    }),
                });
            }
            Status::Sat => {
                let mut model = out.model.expect("sat outcome has a model");
                model.truncate(formula.var_count);
                let image = image_teams(formula, &model);
                let objective = image.len();
                let (allocation, unallocated) = decode_allocation(formula, &model);
                let at_bound = objective == 0 || (options.use_lower_bound && objective <= lower_bound);
                let sol = OptimalSolution {
                    allocation,
                    unallocated,
                    used_teams: image.iter().map(|&w| formula.var_map.teams[w].clone()).collect(),
                    objective,
                    proven_optimal: at_bound,
                    certificate: at_bound.then_some(if objective == 0 { Certificate::Refutation } else { Certificate::LowerBound }),
                    lower_bound,
                    stats: Vec::new(),
                    model,
                };
                if at_bound {
                    return Ok(Minimized::Solved(OptimalSolution { stats, ..sol }));
                }
                let c = counter.get_or_insert_with(|| {
                    let inputs: Vec<(Lit, u64)> =
                        (0..formula.num_teams()).map(|w| (formula.var_map.used(w).pos(), 1)).collect();
                    let mut clauses = Vec::new();
                    let mut fresh = || solver.new_var();
                    let c = WeightedCounter::build(&inputs, objective as u64 - 1, &mut fresh, &mut clauses);
                    for cl in &clauses {
                        solver.add_clause(cl);
                    }
                    c
                });
                let unit = c.at_most(objective as u64 - 1).expect("bound within counter range");
                incumbent = Some(sol);
                solver.add_clause(&[unit]);
            }
        }
    }
}

/// Maximises the total weight of allocated tasks. Soft groups other than
/// `TaskAllocated` are enforced unless listed in `relaxed`.
pub fn maximize_weighted_allocation(
    formula: &LabeledFormula,
    weights: &PriorityWeights,
    relaxed: &[ConstraintLabel],
    budget: Budget,
    options: &OptimizeOptions,
) -> Result<RelaxedSolution, OptimizeError> {
    weights.validate(formula)?;
    if formula.task_groups.iter().any(|&g| !formula.groups[g].is_soft()) {
        return Err(OptimizeError::TaskAllocationHard);
    }
    let skip: BTreeSet<usize> = formula.soft_group_ids(relaxed)?.into_iter().collect();
    let assumptions: Vec<Lit> = formula
        .soft_groups()
        .filter(|g| !skip.contains(g) && formula.groups[*g].label.kind != ConstraintKind::TaskAllocated)
        .filter_map(|g| formula.groups[g].selector)
        .collect();
    let task_weights: Vec<u64> = formula.var_map.activities.iter().map(|id| weights.get(id)).collect();
    let total_weight: u64 = task_weights.iter().sum();

    let mut solver = prepare(formula, options)?;
    let mut stats = Vec::new();
    let mut best: Option<RelaxedSolution> = None;
    let mut counter: Option<WeightedCounter> = None;

    loop {
        let out = solver.solve(&assumptions, budget.deadline());
        stats.push(out.stats);
        match out.status {
            Status::Timeout => {
                return match best {
                    Some(b) => Ok(RelaxedSolution { stats, ..b }),
                    None => Err(OptimizeError::BudgetExhausted),
                };
            }
            Status::Unsat => {
                return match best {
                    Some(b) => Ok(RelaxedSolution { proven_optimal: true, stats, ..b }),
                    None => Err(OptimizeError::HardConflict(labels_of_core(formula, &out.core))),
                };
            }
            Status::Sat => {
                let mut model = out.model.expect("sat outcome has a model");
                model.truncate(formula.var_count);
                let (allocation, unallocated) = decode_allocation(formula, &model);
                let cost: u64 = formula
                    .var_map
                    .activities
                    .iter()
                    .zip(&task_weights)
                    .filter(|(id, _)| !allocation.contains_key(*id))
                    .map(|(_, &w)| w)
                    .sum();
                let sol = RelaxedSolution {
                    allocation,
                    unallocated,
                    allocated_weight: total_weight - cost,
                    total_weight,
                    proven_optimal: cost == 0,
                    stats: Vec::new(),
                    model,
                };
                if cost == 0 {
                    return Ok(RelaxedSolution { stats, ..sol });
                }
                let c = counter.get_or_insert_with(|| {
                    let inputs: Vec<(Lit, u64)> = formula
                        .task_groups
                        .iter()
                        .zip(&task_weights)
                        .map(|(&g, &w)| (!formula.groups[g].selector.expect("soft task group"), w))
                        .collect();
                    let mut clauses = Vec::new();
                    let mut fresh = || -> Var { solver.new_var() };
                    let c = WeightedCounter::build(&inputs, cost - 1, &mut fresh, &mut clauses);
                    for cl in &clauses {
                        solver.add_clause(cl);
                    }
                    c
                });
                let unit = c.at_most(cost - 1).expect("bound within counter range");
                best = Some(sol);
                solver.add_clause(&[unit]);
            }
        }
    }
}

/// Size-maximal set of allocated tasks (unit weights).
pub fn max_allocated_tasks(
    formula: &LabeledFormula,
    relaxed: &[ConstraintLabel],
    budget: Budget,
) -> Result<RelaxedSolution, OptimizeError> {
    maximize_weighted_allocation(formula, &PriorityWeights::default(), relaxed, budget, &OptimizeOptions::default())
}
