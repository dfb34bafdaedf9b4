//! Problem instances: pre-scheduled activities, worker teams, compatibility and
//! same-team requirements, plus the interval structure the encoding relies on.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A task with a fixed time window `[start, end)` in minutes from the horizon origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Activity {
    pub id: String,
    pub start: i64,
    pub end: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Activity {
    pub fn new(id: impl Into<String>, start: i64, end: i64) -> Self {
        Activity { id: id.into(), start, end, label: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Team {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Team {
    pub fn new(id: impl Into<String>) -> Self {
        Team { id: id.into(), label: None }
    }
}

/// An allocation problem.
///
/// `compat` is dense and row-major: entry `a * teams.len() + w` tells whether
/// team `w` may perform activity `a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "crate::io::InstanceFile", try_from = "crate::io::InstanceFile")]
pub struct Instance {
    pub activities: Vec<Activity>,
    pub teams: Vec<Team>,
    pub compat: Vec<bool>,
    pub same_pairs: Vec<(String, String)>,
    pub horizon_hours: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown activity {0}")]
    UnknownActivity(String),
    #[error("unknown team {0}")]
    UnknownTeam(String),
}

impl Instance {
    /// Instance where every team is compatible with every activity.
    pub fn fully_compatible(activities: Vec<Activity>, teams: Vec<Team>) -> Self {
        let compat = vec![true; activities.len() * teams.len()];
        Instance { activities, teams, compat, same_pairs: Vec::new(), horizon_hours: 0 }
    }

    pub fn num_activities(&self) -> usize {
        self.activities.len()
    }

    pub fn num_teams(&self) -> usize {
        self.teams.len()
    }

    #[inline]
    pub fn compatible(&self, activity: usize, team: usize) -> bool {
        self.compat[activity * self.teams.len() + team]
    }

    pub fn set_compatible(&mut self, activity: usize, team: usize, value: bool) {
        let n = self.teams.len();
        self.compat[activity * n + team] = value;
    }

    pub fn activity_index(&self, id: &str) -> Option<usize> {
        self.activities.iter().position(|a| a.id == id)
    }

    pub fn team_index(&self, id: &str) -> Option<usize> {
        self.teams.iter().position(|t| t.id == id)
    }

    pub fn require_activity(&self, id: &str) -> Result<usize, ModelError> {
        self.activity_index(id).ok_or_else(|| ModelError::UnknownActivity(id.to_string()))
    }

    pub fn require_team(&self, id: &str) -> Result<usize, ModelError> {
        self.team_index(id).ok_or_else(|| ModelError::UnknownTeam(id.to_string()))
    }

    /// Team indices compatible with activity `a`, in declaration order.
    pub fn compatible_teams(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.teams.len()).filter(move |&w| self.compatible(a, w))
    }

    /// Activity id to index lookup table.
    pub fn activity_lookup(&self) -> HashMap<&str, usize> {
        self.activities.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect()
    }
}

/// One broken instance invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("activity {id}: start < end violated (start={start}, end={end})")]
    EmptyInterval { id: String, start: i64, end: i64 },
    #[error("activity {id}: start must be non-negative (start={start})")]
    NegativeStart { id: String, start: i64 },
    #[error("duplicate activity id {id}")]
    DuplicateActivity { id: String },
    #[error("duplicate team id {id}")]
    DuplicateTeam { id: String },
    #[error("unknown activity {id}")]
    UnknownActivity { id: String },
    #[error("unknown team {id}")]
    UnknownTeam { id: String },
    #[error("compatibility matrix has {actual} entries, expected {expected}")]
    CompatSize { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ValidationReport> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for a in &instance.activities {
        if !seen.insert(a.id.as_str()) {
            violations.push(Violation::DuplicateActivity { id: a.id.clone() });
        }
        if a.start < 0 {
            violations.push(Violation::NegativeStart { id: a.id.clone(), start: a.start });
        }
        if a.start >= a.end {
            violations.push(Violation::EmptyInterval { id: a.id.clone(), start: a.start, end: a.end });
        }
    }
    let mut seen_teams = HashSet::new();
    for t in &instance.teams {
        if !seen_teams.insert(t.id.as_str()) {
            violations.push(Violation::DuplicateTeam { id: t.id.clone() });
        }
    }
    let expected = instance.activities.len() * instance.teams.len();
    if instance.compat.len() != expected {
        violations.push(Violation::CompatSize { expected, actual: instance.compat.len() });
    }
    for (x, y) in &instance.same_pairs {
        for id in [x, y] {
            if !seen.contains(id.as_str()) {
                violations.push(Violation::UnknownActivity { id: id.clone() });
            }
        }
    }
    ValidationReport { violations }
}

/// Whether `other` belongs to the overlap neighbourhood of `a`:
/// `end(other) > start(a)` and `end(a) >= start(other)` (strict `>` with `strict_touch`).
///
/// The relation is not symmetric when one activity ends exactly where the other starts.
#[inline]
pub fn in_neighborhood(a: &Activity, other: &Activity, strict_touch: bool) -> bool {
    let tail = if strict_touch { a.end > other.start } else { a.end >= other.start };
    other.end > a.start && tail
}

/// Symmetric closure of [`in_neighborhood`]: the two activities can never share a team.
#[inline]
pub fn conflicting(a: &Activity, b: &Activity, strict_touch: bool) -> bool {
    in_neighborhood(a, b, strict_touch) || in_neighborhood(b, a, strict_touch)
}

pub fn neighbor_indices(instance: &Instance, a: usize, strict_touch: bool) -> Vec<usize> {
    let act = &instance.activities[a];
    instance
        .activities
        .iter()
        .enumerate()
        .filter(|&(i, other)| i != a && in_neighborhood(act, other, strict_touch))
        .map(|(i, _)| i)
        .collect()
}

/// Ids of the activities overlapping `id`, in instance order.
pub fn neighbors(instance: &Instance, id: &str, strict_touch: bool) -> Result<Vec<String>, ModelError> {
    let a = instance.require_activity(id)?;
    Ok(neighbor_indices(instance, a, strict_touch)
        .into_iter()
        .map(|i| instance.activities[i].id.clone())
        .collect())
}

/// Unordered conflicting pairs `(i, j)` with `i < j`, sorted.
pub fn conflict_pairs(instance: &Instance, strict_touch: bool) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..instance.activities.len()).collect();
    order.sort_by_key(|&i| (instance.activities[i].start, i));
    let mut pairs = Vec::new();
    // Sweep by start time: once `b` starts after `a` ends (touching included) no later one conflicts.
    for (pos, &i) in order.iter().enumerate() {
        let a = &instance.activities[i];
        for &j in &order[pos + 1..] {
            let b = &instance.activities[j];
            if b.start > a.end {
                break;
            }
            if conflicting(a, b, strict_touch) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Activities running at the start time of `anchor`: `start(a') <= start(anchor) < end(a')`.
pub fn start_clique(instance: &Instance, anchor: usize) -> Vec<usize> {
    let t = instance.activities[anchor].start;
    instance
        .activities
        .iter()
        .enumerate()
        .filter(|(_, a)| a.start <= t && t < a.end)
        .map(|(i, _)| i)
        .collect()
}

/// One entry per activity: the anchor id and the ids of activities running at its start.
pub fn start_cliques(instance: &Instance) -> Vec<(String, BTreeSet<String>)> {
    (0..instance.activities.len())
        .map(|a| {
            let members = start_clique(instance, a).into_iter().map(|i| instance.activities[i].id.clone()).collect();
            (instance.activities[a].id.clone(), members)
        })
        .collect()
}

/// Distinct start cliques as sorted index sets, in order of first anchor.
pub fn dedup_start_cliques(instance: &Instance) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in 0..instance.activities.len() {
        let c = start_clique(instance, a);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Maximal sets of pairwise [`conflicting`] activities found at every start time.
///
/// Without `strict_touch` an activity ending exactly at the anchor's start is
/// included, since touching activities conflict too.
pub fn conflict_cliques(instance: &Instance, strict_touch: bool) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for anchor in &instance.activities {
        let t = anchor.start;
        let members: Vec<usize> = instance
            .activities
            .iter()
            .enumerate()
            .filter(|(_, a)| a.start <= t && if strict_touch { t < a.end } else { t <= a.end })
            .map(|(i, _)| i)
            .collect();
        if seen.insert(members.clone()) {
            out.push(members);
        }
    }
    out
}

/// Partition of teams by identical compatibility columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceClasses {
    /// Each class lists team ids in instance declaration order; classes are
    /// ordered by their first member.
    pub classes: Vec<Vec<String>>,
}

impl EquivalenceClasses {
    pub fn class_of(&self, team: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.iter().any(|t| t == team))
    }
}

/// Groups team indices by an arbitrary per-team signature, preserving declaration order.
pub fn classes_by_signature<S: Eq + std::hash::Hash>(num_teams: usize, signature: impl Fn(usize) -> S) -> Vec<Vec<usize>> {
    let mut index: HashMap<S, usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for w in 0..num_teams {
        let sig = signature(w);
        match index.get(&sig) {
            Some(&c) => classes[c].push(w),
            None => {
                index.insert(sig, classes.len());
                classes.push(vec![w]);
            }
        }
    }
    classes
}

pub fn team_equivalence_classes(instance: &Instance) -> EquivalenceClasses {
    let n_act = instance.activities.len();
    let classes = classes_by_signature(instance.teams.len(), |w| {
        (0..n_act).map(|a| instance.compatible(a, w)).collect::<Vec<bool>>()
    });
    EquivalenceClasses {
        classes: classes
            .into_iter()
            .map(|c| c.into_iter().map(|w| instance.teams[w].id.clone()).collect())
            .collect(),
    }
}

/// Formats minutes from the horizon origin as `HH:MM`.
pub fn format_minutes(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let t = t.abs();
    format!("{sign}{:02}:{:02}", t / 60, t % 60)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// a1=[0,10), a2=[5,15), a3=[20,30); teams t1,t2; all compatible.
    pub fn tiny1() -> Instance {
        Instance::fully_compatible(
            vec![Activity::new("a1", 0, 10), Activity::new("a2", 5, 15), Activity::new("a3", 20, 30)],
            vec![Team::new("t1"), Team::new("t2")],
        )
    }

    /// Three copies of [0,10) on two teams.
    pub fn tiny2() -> Instance {
        copies(3, 2)
    }

    pub fn copies(n: usize, teams: usize) -> Instance {
        Instance::fully_compatible(
            (1..=n).map(|i| Activity::new(format!("a{i}"), 0, 10)).collect(),
            (1..=teams).map(|i| Team::new(format!("t{i}"))).collect(),
        )
    }
}
