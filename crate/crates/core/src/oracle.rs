//! Exhaustive reference answers for small instances.
//!
//! Nothing here goes through the encoding or the solver: allocations are
//! enumerated depth-first (task by task, each to a team or unset) and checked
//! against the constraints evaluated directly on the instance.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::encode::{ConstraintKind, ConstraintLabel, EncodeConfig, Override, OverrideMode};
use crate::model::Instance;

pub const MAX_ORACLE_ACTIVITIES: usize = 10;
pub const MAX_ORACLE_TEAMS: usize = 4;
pub const MAX_ENUMERATED_LABELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search ({activities} activities, {teams} teams)")]
    TooLarge { activities: usize, teams: usize },
    #[error("too many soft labels to enumerate subsets ({0})")]
    TooManyLabels(usize),
    #[error("unknown id {0}")]
    UnknownId(String),
}

/// Optimal used-team count over allocations satisfying constraints 1 to 4,
/// `None` when no allocation exists.
pub fn brute_force_optimal(instance: &Instance) -> Result<Option<usize>, OracleError> {
    check_size(instance)?;
    let oracle = Oracle::new(instance, &EncodeConfig::default(), &[])?;
    Ok(oracle.min_used(&oracle.all_enforced()))
}

fn check_size(instance: &Instance) -> Result<(), OracleError> {
    if instance.activities.len() > MAX_ORACLE_ACTIVITIES || instance.teams.len() > MAX_ORACLE_TEAMS {
        return Err(OracleError::TooLarge { activities: instance.activities.len(), teams: instance.teams.len() });
    }
    Ok(())
}

/// Neighbour predicate, written out again so the oracle shares no code with the model.
fn clash(s1: i64, e1: i64, s2: i64, e2: i64, strict: bool) -> bool {
    let fwd = e2 > s1 && if strict { e1 > s2 } else { e1 >= s2 };
    let bwd = e1 > s2 && if strict { e2 > s1 } else { e2 >= s1 };
    fwd || bwd
}

/// Constraint requirements after choosing which soft labels are enforced.
struct Req {
    must_allocate: Vec<bool>,
    /// `apart[i][j]`: i and j may not share a team.
    apart: Vec<Vec<bool>>,
    forbidden: Vec<Vec<bool>>,
    forced: Vec<Option<usize>>,
    /// Forced pairs that can never both hold (same task, two teams).
    contradictory: bool,
    same: Vec<(usize, usize)>,
}

/// One soft label with what it stands for.
#[derive(Clone, Debug)]
enum Item {
    Task(usize),
    Apart(usize, usize),
    Compat(usize, usize),
    Same(usize, usize),
    Force(usize, usize),
    Forbid(usize, usize),
}

pub struct Oracle<'a> {
    instance: &'a Instance,
    items: Vec<(Item, bool)>,
    labels: Vec<ConstraintLabel>,
}

impl<'a> Oracle<'a> {
    pub fn new(instance: &'a Instance, cfg: &EncodeConfig, overrides: &[Override]) -> Result<Self, OracleError> {
        let n = instance.activities.len();
        let id = |a: usize| instance.activities[a].id.clone();
        let tid = |w: usize| instance.teams[w].id.clone();
        let soft = |k: ConstraintKind| cfg.soft_kinds.contains(&k);
        let mut items: Vec<(Item, bool)> = Vec::new();
        let mut labels: Vec<ConstraintLabel> = Vec::new();
        let mut push = |item: Item, kind: ConstraintKind, subject: Vec<String>| {
            let is_soft = soft(kind);
            if is_soft {
                labels.push(ConstraintLabel::new(kind, subject));
            }
            items.push((item, is_soft));
        };
        for a in 0..n {
            push(Item::Task(a), ConstraintKind::TaskAllocated, vec![id(a)]);
        }
        for i in 0..n {
            for j in i + 1..n {
                let (x, y) = (&instance.activities[i], &instance.activities[j]);
                if clash(x.start, x.end, y.start, y.end, cfg.strict_touch) {
                    push(Item::Apart(i, j), ConstraintKind::Overlap, vec![id(i), id(j)]);
                }
            }
        }
        for a in 0..n {
            for w in 0..instance.teams.len() {
                if !instance.compat[a * instance.teams.len() + w] {
                    push(Item::Compat(a, w), ConstraintKind::Compatibility, vec![id(a), tid(w)]);
                }
            }
        }
        let index = |s: &str| instance.activities.iter().position(|a| a.id == s).ok_or_else(|| OracleError::UnknownId(s.into()));
        let team_index = |s: &str| instance.teams.iter().position(|t| t.id == s).ok_or_else(|| OracleError::UnknownId(s.into()));
        let mut seen = BTreeSet::new();
        for (x, y) in &instance.same_pairs {
            let (i, j) = (index(x)?, index(y)?);
            if i != j && seen.insert((i.min(j), i.max(j))) {
                push(Item::Same(i, j), ConstraintKind::SamePair, vec![x.clone(), y.clone()]);
            }
        }
        let mut last: Vec<(usize, usize, OverrideMode)> = Vec::new();
        for o in overrides {
            let (a, w) = (index(&o.activity)?, team_index(&o.team)?);
            last.retain(|&(a2, w2, _)| (a2, w2) != (a, w));
            last.push((a, w, o.mode));
        }
        for (a, w, mode) in last {
            let item = match mode {
                OverrideMode::Force => Item::Force(a, w),
                OverrideMode::Forbid => Item::Forbid(a, w),
            };
            push(item, ConstraintKind::Override, vec![id(a), tid(w)]);
        }
        Ok(Oracle { instance, items, labels })
    }

    /// Soft labels in creation order.
    pub fn soft_labels(&self) -> &[ConstraintLabel] {
        &self.labels
    }

    pub fn all_enforced(&self) -> Vec<bool> {
        vec![true; self.labels.len()]
    }

    /// Enforcement mask from a set of enforced labels.
    pub fn mask(&self, enforced: &[ConstraintLabel]) -> Vec<bool> {
        self.labels.iter().map(|l| enforced.contains(l)).collect()
    }

    fn req(&self, enforced: &[bool]) -> Req {
        let n = self.instance.activities.len();
        let m = self.instance.teams.len();
        let mut r = Req {
            must_allocate: vec![false; n],
            apart: vec![vec![false; n]; n],
            forbidden: vec![vec![false; m]; n],
            forced: vec![None; n],
            contradictory: false,
            same: Vec::new(),
        };
        let mut soft_idx = 0;
        for (item, is_soft) in &self.items {
            let on = if *is_soft {
                soft_idx += 1;
                enforced[soft_idx - 1]
            } else {
                true
            };
            if !on {
                continue;
            }
            match *item {
                Item::Task(a) => r.must_allocate[a] = true,
                Item::Apart(i, j) => {
                    r.apart[i][j] = true;
                    r.apart[j][i] = true;
                }
                Item::Compat(a, w) | Item::Forbid(a, w) => r.forbidden[a][w] = true,
                Item::Same(i, j) => r.same.push((i, j)),
                Item::Force(a, w) => match r.forced[a] {
                    Some(other) if other != w => r.contradictory = true,
                    _ => r.forced[a] = Some(w),
                },
            }
        }
        r
    }

    fn consistent(&self, r: &Req, alloc: &[Option<usize>], a: usize, choice: Option<usize>) -> bool {
        match choice {
            None => {
                if r.must_allocate[a] || r.forced[a].is_some() {
                    return false;
                }
            }
            Some(w) => {
                if r.forbidden[a][w] || r.forced[a].is_some_and(|f| f != w) {
                    return false;
                }
                if (0..a).any(|b| r.apart[a][b] && alloc[b] == Some(w)) {
                    return false;
                }
            }
        }
        r.same.iter().all(|&(i, j)| {
            let (lo, hi) = (i.min(j), i.max(j));
            hi != a || alloc[lo] == choice
        })
    }

    fn search(&self, r: &Req, alloc: &mut Vec<Option<usize>>, used: &mut Vec<usize>, best: &mut Option<usize>, stop_first: bool) {
        let a = alloc.len();
        if let Some(b) = *best {
            if used.iter().filter(|&&c| c > 0).count() >= b || (stop_first && b < usize::MAX) {
                return;
            }
        }
        if a == self.instance.activities.len() {
            let used_now = used.iter().filter(|&&c| c > 0).count();
            *best = Some(best.map_or(used_now, |b| b.min(used_now)));
            return;
        }
        let m = self.instance.teams.len();
        let mut choices: Vec<Option<usize>> = (0..m).map(Some).collect();
        choices.push(None);
        for choice in choices {
            if !self.consistent(r, alloc, a, choice) {
                continue;
            }
            if let Some(w) = choice {
                used[w] += 1;
            }
            alloc.push(choice);
            self.search(r, alloc, used, best, stop_first);
            alloc.pop();
            if let Some(w) = choice {
                used[w] -= 1;
            }
        }
    }

    /// Smallest number of teams over allocations meeting the enforced labels and all hard ones.
    pub fn min_used(&self, enforced: &[bool]) -> Option<usize> {
        let r = self.req(enforced);
        if r.contradictory {
            return None;
        }
        let mut best = None;
        self.search(&r, &mut Vec::new(), &mut vec![0; self.instance.teams.len()], &mut best, false);
        best
    }

    pub fn feasible(&self, enforced: &[bool]) -> bool {
        let r = self.req(enforced);
        if r.contradictory {
            return false;
        }
        let mut best = None;
        self.search(&r, &mut Vec::new(), &mut vec![0; self.instance.teams.len()], &mut best, true);
        best.is_some()
    }

    fn check_labels(&self) -> Result<(), OracleError> {
        if self.labels.len() > MAX_ENUMERATED_LABELS {
            return Err(OracleError::TooManyLabels(self.labels.len()));
        }
        Ok(())
    }

    fn subsets(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        let k = self.labels.len();
        (0u32..1 << k).map(move |bits| (0..k).map(|i| bits >> i & 1 == 1).collect())
    }

    /// Every minimal unsatisfiable subset of the soft labels.
    pub fn all_muses(&self) -> Result<Vec<BTreeSet<ConstraintLabel>>, OracleError> {
        self.check_labels()?;
        let unsat: Vec<Vec<bool>> = self.subsets().filter(|s| !self.feasible(s)).collect();
        let is_subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !*x || *y);
        Ok(unsat
            .iter()
            .filter(|s| !unsat.iter().any(|t| t != *s && is_subset(t, s)))
            .map(|s| self.to_labels(s))
            .collect())
    }

    /// Every minimal correction subset of the soft labels.
    pub fn all_mcses(&self) -> Result<Vec<BTreeSet<ConstraintLabel>>, OracleError> {
        self.check_labels()?;
        let sat: Vec<Vec<bool>> = self.subsets().filter(|s| self.feasible(s)).collect();
        let is_subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !*x || *y);
        Ok(sat
            .iter()
            .filter(|s| !sat.iter().any(|t| t != *s && is_subset(s, t)))
            .map(|s| self.to_labels(&s.iter().map(|x| !x).collect::<Vec<_>>()))
            .collect())
    }

    fn to_labels(&self, mask: &[bool]) -> BTreeSet<ConstraintLabel> {
        self.labels.iter().zip(mask).filter(|(_, &m)| m).map(|(l, _)| l.clone()).collect()
    }

    /// Best total weight of a set of simultaneously allocated tasks, with every
    /// other soft label enforced, and all task sets reaching it.
    pub fn max_weight(&self, weights: &[u64]) -> (u64, Vec<BTreeSet<usize>>) {
        let n = self.instance.activities.len();
        let task_pos: Vec<usize> = (0..n)
            .map(|a| {
                self.labels
                    .iter()
                    .position(|l| l.kind == ConstraintKind::TaskAllocated && l.subject[0] == self.instance.activities[a].id)
                    .expect("task labels soft")
            })
            .collect();
        let mut best = 0;
        let mut sets = Vec::new();
        for bits in 0u32..1 << n {
            let mut mask = vec![true; self.labels.len()];
            for (a, &p) in task_pos.iter().enumerate() {
                mask[p] = bits >> a & 1 == 1;
            }
            let w: u64 = (0..n).filter(|a| bits >> a & 1 == 1).map(|a| weights[a]).sum();
            if w < best || !self.feasible(&mask) {
                continue;
            }
            if w > best {
                best = w;
                sets.clear();
            }
            sets.push((0..n).filter(|a| bits >> a & 1 == 1).collect());
        }
        (best, sets)
    }
}

/// Standalone check of one team row: no two entries conflict under the
/// neighbourhood predicate. Returns the offending pairs.
pub fn row_violations(entries: &[(String, i64, i64)], strict_touch: bool) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if clash(a.1, a.2, b.1, b.2, strict_touch) {
                out.push((a.0.clone(), b.0.clone()));
            }
        }
    }
    out
}
