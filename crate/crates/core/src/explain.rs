//! Infeasibility explanations over soft constraint labels.
//!
//! A MUS is extracted by deletion with core shrinking, an MCS by growing a
//! satisfiable subset. Labels are always tried in creation order, so results
//! are reproducible.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{ConstraintKind, ConstraintLabel, EncodeError, LabeledFormula};
use crate::model::Instance;
use crate::optimize::{maximize_weighted_allocation, OptimizeOptions, PriorityWeights};
use crate::sat::{self, Budget, Lit, SatError, Solver, SolverConfig, Status};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("the constraints are satisfiable; there is no conflict to explain")]
    InputSatisfiable,
    #[error("hard constraints alone are unsatisfiable")]
    HardCoreConflict,
    #[error("budget exhausted before the conflict could be confirmed")]
    BudgetExceeded,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sat(#[from] SatError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplainStats {
    pub solver_calls: u64,
    #[serde(with = "crate::util::duration_secs")]
    pub wall_time: Duration,
}

/// A minimal unsatisfiable subset of soft labels, jointly with the hard constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mus {
    pub labels: Vec<ConstraintLabel>,
    /// False when the budget ran out: the set is unsatisfiable but possibly not minimal.
    pub minimal: bool,
    pub stats: ExplainStats,
}

/// A minimal correction subset: removing it restores satisfiability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mcs {
    pub labels: Vec<ConstraintLabel>,
    /// False when the budget ran out: removing the set restores satisfiability,
    /// but a smaller set may do.
    pub minimal: bool,
    pub stats: ExplainStats,
}

#[derive(Clone, Debug)]
pub struct ExplainOptions {
    pub solver: SolverConfig,
    /// Start the MCS grow phase from a maximum allocation.
    pub seed_mcs: bool,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions { solver: SolverConfig::default(), seed_mcs: true }
    }
}

struct Runner<'a> {
    formula: &'a LabeledFormula,
    solver: Solver,
    budget: Budget,
    calls: u64,
    started: Instant,
}

impl<'a> Runner<'a> {
    fn new(formula: &'a LabeledFormula, budget: Budget, config: &SolverConfig) -> Result<Self, ExplainError> {
        let started = Instant::now();
        Ok(Runner { formula, solver: sat::load(formula, config.clone())?, budget, calls: 0, started })
    }

    fn solve(&mut self, assumptions: &[Lit]) -> sat::SolveOutcome {
        self.calls += 1;
        self.solver.solve(assumptions, self.budget.deadline())
    }

    fn stats(&self) -> ExplainStats {
        ExplainStats { solver_calls: self.calls, wall_time: self.started.elapsed() }
    }

    fn labels(&self, gids: impl IntoIterator<Item = usize>) -> Vec<ConstraintLabel> {
        gids.into_iter().map(|g| self.formula.label(g).clone()).collect()
    }

    fn selector(&self, gid: usize) -> Lit {
        self.formula.groups[gid].selector.expect("soft group")
    }
}

fn ordered_soft(formula: &LabeledFormula, soft: &[ConstraintLabel]) -> Result<Vec<usize>, ExplainError> {
    let mut gids = formula.soft_group_ids(soft)?;
    gids.sort_unstable();
    gids.dedup();
    Ok(gids)
}

/// Deletion-based MUS of `soft` (all other soft groups are relaxed).
pub fn find_mus(
    formula: &LabeledFormula,
    soft: &[ConstraintLabel],
    budget: Budget,
    options: &ExplainOptions,
) -> Result<Mus, ExplainError> {
    let gids = ordered_soft(formula, soft)?;
    let mut run = Runner::new(formula, budget, &options.solver)?;
    let all: Vec<Lit> = gids.iter().map(|&g| run.selector(g)).collect();
    let first = run.solve(&all);
    let core: BTreeSet<Lit> = match first.status {
        Status::Sat => return Err(ExplainError::InputSatisfiable),
        Status::Timeout => return Err(ExplainError::BudgetExceeded),
        Status::Unsat => first.core.iter().copied().collect(),
    };
    let mut rest: Vec<usize> = gids.into_iter().filter(|&g| core.contains(&run.selector(g))).collect();
    let mut critical: Vec<usize> = Vec::new();
    let mut minimal = true;
    rest.reverse();
    while let Some(candidate) = rest.pop() {
        let assumptions: Vec<Lit> = critical.iter().chain(rest.iter().rev()).map(|&g| run.selector(g)).collect();
        let out = run.solve(&assumptions);
        match out.status {
            Status::Unsat => {
                let core: BTreeSet<Lit> = out.core.iter().copied().collect();
                rest.retain(|&g| core.contains(&run.selector(g)));
            }
            Status::Sat => critical.push(candidate),
            Status::Timeout => {
                critical.push(candidate);
                critical.append(&mut rest);
                minimal = false;
            }
        }
    }
    critical.sort_unstable();
    Ok(Mus { labels: run.labels(critical), minimal, stats: run.stats() })
}

/// Grow-based MCS of `soft` (all other soft groups are relaxed).
pub fn find_mcs(
    formula: &LabeledFormula,
    soft: &[ConstraintLabel],
    budget: Budget,
    options: &ExplainOptions,
) -> Result<Mcs, ExplainError> {
    let gids = ordered_soft(formula, soft)?;
    let mut run = Runner::new(formula, budget, &options.solver)?;
    let base = run.solve(&[]);
    let mut model = match base.status {
        Status::Unsat => return Err(ExplainError::HardCoreConflict),
        Status::Timeout => return Err(ExplainError::BudgetExceeded),
        Status::Sat => base.model.expect("model"),
    };
    if options.seed_mcs {
        if let Some(seed) = seed_model(formula, &gids, budget) {
            model = seed;
        }
    }
    let mut satisfied: BTreeSet<usize> = BTreeSet::new();
    let absorb = |model: &[bool], satisfied: &mut BTreeSet<usize>| {
        for &g in &gids {
            if formula.group_satisfied(g, model) {
                satisfied.insert(g);
            }
        }
    };
    absorb(&model, &mut satisfied);
    let mut minimal = true;
    for &g in &gids {
        if satisfied.contains(&g) {
            continue;
        }
        let mut assumptions: Vec<Lit> = satisfied.iter().map(|&s| run.selector(s)).collect();
        assumptions.push(run.selector(g));
        let out = run.solve(&assumptions);
        match out.status {
            Status::Sat => absorb(out.model.as_deref().expect("model"), &mut satisfied),
            Status::Unsat => {}
            Status::Timeout => {
                minimal = false;
                break;
            }
        }
    }
    let labels = run.labels(gids.iter().copied().filter(|g| !satisfied.contains(g)));
    Ok(Mcs { labels, minimal, stats: run.stats() })
}

/// Model of a maximum allocation with every non-task group of `gids` enforced.
fn seed_model(formula: &LabeledFormula, gids: &[usize], budget: Budget) -> Option<Vec<bool>> {
    let in_scope: BTreeSet<usize> = gids.iter().copied().collect();
    let relaxed: Vec<ConstraintLabel> = formula
        .soft_groups()
        .filter(|g| !in_scope.contains(g) && formula.label(*g).kind != ConstraintKind::TaskAllocated)
        .map(|g| formula.label(g).clone())
        .collect();
    let relaxed_tasks: BTreeSet<usize> = formula.task_groups.iter().copied().filter(|g| !in_scope.contains(g)).collect();
    if !relaxed_tasks.is_empty() {
        // Out-of-scope tasks would be counted as objective terms; skip seeding.
        return None;
    }
    maximize_weighted_allocation(formula, &PriorityWeights::default(), &relaxed, budget, &OptimizeOptions::default())
        .ok()
        .map(|r| r.model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExplanationKind {
    Mus,
    Mcs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDescription {
    pub key: String,
    pub label: ConstraintLabel,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Involved {
    pub activities: Vec<String>,
    pub teams: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictExplanation {
    pub kind: ExplanationKind,
    pub labels: Vec<LabelDescription>,
    pub involved: Involved,
}

impl ConflictExplanation {
    pub fn label_set(&self) -> Vec<ConstraintLabel> {
        self.labels.iter().map(|d| d.label.clone()).collect()
    }

    pub fn contains(&self, label: &ConstraintLabel) -> bool {
        self.labels.iter().any(|d| &d.label == label)
    }
}

/// Renders labels with their formula text and collects the activities and
/// teams they touch, in instance order. A task-allocation label also involves
/// the teams that could take the task.
pub fn describe_conflict(
    kind: ExplanationKind,
    labels: &[ConstraintLabel],
    formula: &LabeledFormula,
    instance: &Instance,
) -> Result<ConflictExplanation, ExplainError> {
    let mut activities = BTreeSet::new();
    let mut teams = BTreeSet::new();
    let mut described = Vec::with_capacity(labels.len());
    for l in labels {
        let gid = formula.group_of(l).ok_or_else(|| EncodeError::UnknownLabel(l.key()))?;
        let full = formula.label(gid).clone();
        for s in &full.subject {
            if let Some(a) = instance.activity_index(s) {
                activities.insert(a);
                if full.kind == ConstraintKind::TaskAllocated {
                    teams.extend(instance.compatible_teams(a));
                }
            } else if let Some(w) = instance.team_index(s) {
                teams.insert(w);
            }
        }
        described.push(LabelDescription { key: full.key(), text: full.text.clone(), label: full });
    }
    Ok(ConflictExplanation {
        kind,
        labels: described,
        involved: Involved {
            activities: activities.into_iter().map(|a| instance.activities[a].id.clone()).collect(),
            teams: teams.into_iter().map(|w| instance.teams[w].id.clone()).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode, EncodeConfig};
    use crate::model::fixtures::*;
    use crate::model::{Activity, Team};

    fn mus_of(inst: &Instance) -> (LabeledFormula, Mus) {
        let f = encode(inst, &EncodeConfig::default()).unwrap();
        let mus = find_mus(&f, &f.soft_labels(), Budget::unlimited(), &ExplainOptions::default()).unwrap();
        (f, mus)
    }

    fn keys(labels: &[ConstraintLabel]) -> Vec<String> {
        labels.iter().map(|l| l.key()).collect()
    }

    #[test]
    fn tiny2_mus_is_all_three() {
        let (_, mus) = mus_of(&tiny2());
        assert!(mus.minimal);
        assert_eq!(keys(&mus.labels), ["TaskAllocated(a1)", "TaskAllocated(a2)", "TaskAllocated(a3)"]);
    }

    #[test]
    fn independent_task_excluded() {
        let mut inst = tiny2();
        inst.activities.push(Activity::new("a4", 50, 60));
        inst.compat.extend([true, true]);
        let (_, mus) = mus_of(&inst);
        assert_eq!(mus.labels.len(), 3);
        assert!(!mus.labels.contains(&ConstraintLabel::task("a4")));
    }

    #[test]
    fn task_without_teams_is_singleton_mus() {
        let mut inst = tiny1();
        inst.set_compatible(2, 0, false);
        inst.set_compatible(2, 1, false);
        let (_, mus) = mus_of(&inst);
        assert_eq!(keys(&mus.labels), ["TaskAllocated(a3)"]);
    }

    #[test]
    fn satisfiable_input_rejected() {
        let f = encode(&tiny1(), &EncodeConfig::default()).unwrap();
        let e = find_mus(&f, &f.soft_labels(), Budget::unlimited(), &ExplainOptions::default()).unwrap_err();
        assert_eq!(e, ExplainError::InputSatisfiable);
        let mcs = find_mcs(&f, &f.soft_labels(), Budget::unlimited(), &ExplainOptions::default()).unwrap();
        assert!(mcs.labels.is_empty());
    }

    #[test]
    fn mcs_sizes() {
        for (inst, size) in [(tiny2(), 1), (copies(5, 2), 3)] {
            let f = encode(&inst, &EncodeConfig::default()).unwrap();
            for seed_mcs in [true, false] {
                let opts = ExplainOptions { seed_mcs, ..ExplainOptions::default() };
                let mcs = find_mcs(&f, &f.soft_labels(), Budget::unlimited(), &opts).unwrap();
                assert_eq!(mcs.labels.len(), size);
                assert!(mcs.minimal);
            }
        }
    }

    #[test]
    fn hard_conflict_detected() {
        let cfg = EncodeConfig { soft_kinds: BTreeSet::new(), ..EncodeConfig::default() };
        let f = encode(&tiny2(), &cfg).unwrap();
        assert_eq!(find_mcs(&f, &[], Budget::unlimited(), &ExplainOptions::default()).unwrap_err(), ExplainError::HardCoreConflict);
    }

    #[test]
    fn descriptions() {
        let inst = tiny1();
        let cfg = EncodeConfig {
            soft_kinds: [ConstraintKind::TaskAllocated, ConstraintKind::Overlap].into(),
            ..EncodeConfig::default()
        };
        let mut inst2 = inst.clone();
        inst2.set_compatible(0, 1, false);
        let f = encode(&inst2, &cfg).unwrap();
        let d = describe_conflict(ExplanationKind::Mus, &[ConstraintLabel::task("a1")], &f, &inst2).unwrap();
        assert!(d.labels[0].text.contains("a1") && d.labels[0].text.contains("[00:00–00:10]"));
        assert_eq!(d.involved.activities, ["a1"]);
        assert_eq!(d.involved.teams, ["t1"]);

        let f = encode(&inst, &cfg).unwrap();
        let d = describe_conflict(ExplanationKind::Mus, &[ConstraintLabel::task("a1")], &f, &inst).unwrap();
        assert_eq!(d.involved.teams, ["t1", "t2"]);
        let pair = ConstraintLabel::new(ConstraintKind::Overlap, vec!["a1".into(), "a2".into()]);
        let d = describe_conflict(ExplanationKind::Mus, &[pair], &f, &inst).unwrap();
        let text = &d.labels[0].text;
        assert!(text.contains("a1") && text.contains("a2") && text.contains("[00:05–00:10)"), "{text}");
        assert_eq!(d.involved.activities, ["a1", "a2"]);

        let f = encode(&inst2, &EncodeConfig::default()).unwrap();
        let c = ConstraintLabel::new(ConstraintKind::Compatibility, vec!["a1".into(), "t2".into()]);
        let d = describe_conflict(ExplanationKind::Mcs, &[c], &f, &inst2).unwrap();
        assert_eq!(d.labels[0].text, "t2 cannot perform a1");
        assert_eq!((d.involved.activities.clone(), d.involved.teams.clone()), (vec!["a1".to_string()], vec!["t2".to_string()]));
        assert!(describe_conflict(ExplanationKind::Mus, &[ConstraintLabel::task("zz")], &f, &inst2).is_err());
    }

    #[test]
    fn deterministic_results() {
        let mut inst = copies(4, 2);
        inst.teams.push(Team::new("t3"));
        inst.compat = vec![true, true, false, true, true, false, true, true, false, true, true, false];
        let (_, a) = mus_of(&inst);
        let (_, b) = mus_of(&inst);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.labels.len(), 3);
    }
}
