//! Satisfiability substrate: literals, the CDCL solver, and glue for solving
//! a [`LabeledFormula`] under a time budget.

mod heap;
mod lit;
mod solver;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use lit::{Lit, Var};
pub use solver::{SolveOutcome, SolveStats, Solver, SolverConfig, Status};

use crate::encode::LabeledFormula;

/// The budget every interactive operation gets unless told otherwise.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Wall-clock budget shared by a sequence of solver calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget { deadline: None }
    }

    pub fn new(limit: Duration) -> Self {
        Budget { deadline: Instant::now().checked_add(limit) }
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Budget::new(Duration::from_secs_f64(secs.max(0.0)))
    }

    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.deadline.map(|d| d.saturating_duration_since(Instant::now()))
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_TIMEOUT)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("malformed formula: {0}")]
    Malformed(String),
}

fn check_well_formed(formula: &LabeledFormula) -> Result<(), SatError> {
    if formula.clauses.len() != formula.clause_group.len() {
        return Err(SatError::Malformed("clause/group tables differ in length".into()));
    }
    let n = formula.var_count;
    for (i, c) in formula.clauses.iter().enumerate() {
        if let Some(l) = c.iter().find(|l| l.var().index() >= n) {
            return Err(SatError::Malformed(format!("clause {i} uses undeclared variable {}", l.var().index() + 1)));
        }
        if formula.clause_group[i] as usize >= formula.groups.len() {
            return Err(SatError::Malformed(format!("clause {i} belongs to no group")));
        }
    }
    for (i, card) in formula.cardinality.iter().enumerate() {
        if card.group >= formula.groups.len() || card.lits.iter().any(|l| l.var().index() >= n) {
            return Err(SatError::Malformed(format!("cardinality constraint {i} is out of range")));
        }
    }
    Ok(())
}

/// A fresh solver holding every clause of `formula`, cardinality entries
/// lowered to clauses. Selectors default to the enforcing phase.
pub fn load(formula: &LabeledFormula, config: SolverConfig) -> Result<Solver, SatError> {
    check_well_formed(formula)?;
    let (vars, clauses) = formula.lowered_clauses();
    let mut solver = Solver::new(config);
    solver.ensure_vars(vars);
    for g in &formula.groups {
        if let Some(s) = g.selector {
            solver.set_phase(s.var(), true);
        }
    }
    for c in &clauses {
        solver.add_clause(c);
    }
    Ok(solver)
}

/// One-shot solve of `formula` under `assumptions`.
pub fn solve(formula: &LabeledFormula, assumptions: &[Lit], budget: Budget) -> Result<SolveOutcome, SatError> {
    if let Some(l) = assumptions.iter().find(|l| l.var().index() >= formula.var_count) {
        return Err(SatError::Malformed(format!("assumption {l} is not a declared variable")));
    }
    let mut solver = load(formula, SolverConfig::default())?;
    let mut out = solver.solve(assumptions, budget.deadline());
    if let Some(m) = out.model.as_mut() {
        m.truncate(formula.var_count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Clauses as (positive mask, negative mask) over at most 20 variables.
    fn masks(clauses: &[Vec<Lit>]) -> Vec<(u32, u32)> {
        clauses
            .iter()
            .map(|c| {
                c.iter().fold((0, 0), |(p, n), l| {
                    let bit = 1u32 << l.var().index();
                    if l.is_positive() {
                        (p | bit, n)
                    } else {
                        (p, n | bit)
                    }
                })
            })
            .collect()
    }

    fn brute_force_sat(n: usize, clauses: &[(u32, u32)], fixed: (u32, u32)) -> bool {
        (0u32..1 << n).any(|m| {
            m & fixed.0 == fixed.0 && !m & fixed.1 == fixed.1 && clauses.iter().all(|&(p, q)| m & p != 0 || !m & q != 0)
        })
    }

    fn arb_cnf() -> impl Strategy<Value = (usize, Vec<Vec<Lit>>, Vec<Lit>)> {
        (1usize..=20).prop_flat_map(|n| {
            let lit = (0..n as u32, any::<bool>()).prop_map(|(v, s)| Var::new(v).lit(s));
            let clause = prop::collection::vec(lit.clone(), 1..=4);
            let ratio = (n * 5).max(2);
            (Just(n), prop::collection::vec(clause, 0..ratio), prop::collection::vec(lit, 0..4))
        })
    }

    fn solver_for(n: usize, clauses: &[Vec<Lit>]) -> Solver {
        let mut s = Solver::default();
        s.ensure_vars(n);
        for c in clauses {
            s.add_clause(c);
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1200))]

        #[test]
        fn agrees_with_brute_force((n, clauses, assumptions) in arb_cnf()) {
            let m = masks(&clauses);
            let mut solver = solver_for(n, &clauses);
            let plain = solver.solve(&[], None);
            prop_assert_eq!(plain.is_sat(), brute_force_sat(n, &m, (0, 0)));
            if let Some(model) = &plain.model {
                prop_assert!(clauses.iter().all(|c| c.iter().any(|l| l.eval(model))));
            }

            let out = solver.solve(&assumptions, None);
            let fixed = masks(std::slice::from_ref(&assumptions));
            let consistent = !assumptions.iter().any(|&a| assumptions.contains(&!a));
            let expected = consistent && brute_force_sat(n, &m, fixed[0]);
            prop_assert_eq!(out.is_sat(), expected);
            match &out.model {
                Some(model) => {
                    prop_assert!(clauses.iter().all(|c| c.iter().any(|l| l.eval(model))));
                    prop_assert!(assumptions.iter().all(|l| l.eval(model)));
                }
                None => {
                    prop_assert!(out.core.iter().all(|l| assumptions.contains(l)));
                    let again = solver_for(n, &clauses).solve(&out.core, None);
                    prop_assert!(again.is_unsat(), "core {:?} is not refuted", out.core);
                }
            }
        }

        #[test]
        fn deterministic((n, clauses, assumptions) in arb_cnf()) {
            let a = solver_for(n, &clauses).solve(&assumptions, None);
            let b = solver_for(n, &clauses).solve(&assumptions, None);
            prop_assert_eq!(a.status, b.status);
            prop_assert_eq!(a.model, b.model);
            prop_assert_eq!(a.core, b.core);
            prop_assert_eq!(
                (a.stats.conflicts, a.stats.decisions, a.stats.propagations),
                (b.stats.conflicts, b.stats.decisions, b.stats.propagations)
            );
        }
    }

    #[test]
    fn tightening_excludes_models() {
        // Three free variables; count models before and after adding at-most-1.
        let count = |extra: &[Vec<Lit>]| {
            let mut total = 0;
            for m in 0u32..8 {
                let mut s = Solver::default();
                s.ensure_vars(3);
                for c in extra {
                    s.add_clause(c);
                }
                let assumptions: Vec<Lit> = (0..3).map(|v| Var::new(v).lit(m >> v & 1 == 1)).collect();
                if s.solve(&assumptions, None).is_sat() {
                    total += 1;
                }
            }
            total
        };
        let lits: Vec<Lit> = (0..3).map(|v| Var::new(v).pos()).collect();
        assert_eq!(count(&[]), 8);
        assert_eq!(count(&crate::card::pairwise_at_most_one(&lits)), 4);
    }

    #[test]
    fn malformed_assumption_rejected() {
        let inst = crate::model::fixtures::tiny1();
        let f = crate::encode::encode(&inst, &Default::default()).unwrap();
        let bad = Var::new(f.var_count as u32 + 5).pos();
        assert!(matches!(solve(&f, &[bad], Budget::unlimited()), Err(SatError::Malformed(_))));
    }

    #[test]
    fn tiny2_unsat_core_within_selectors() {
        let f = crate::encode::encode(&crate::model::fixtures::tiny2(), &Default::default()).unwrap();
        let all = f.relax([]).unwrap();
        let out = solve(&f, &all, Budget::unlimited()).unwrap();
        assert!(out.is_unsat());
        assert!(!out.core.is_empty() && out.core.iter().all(|l| all.contains(l)));
        let tiny1 = crate::encode::encode(&crate::model::fixtures::tiny1(), &Default::default()).unwrap();
        let out = solve(&tiny1, &tiny1.relax([]).unwrap(), Budget::unlimited()).unwrap();
        assert!(out.is_sat());
        tiny1.check_model(out.model.as_ref().unwrap()).unwrap();
    }
}
