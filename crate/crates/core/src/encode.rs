//! Boolean encoding of an allocation instance.
//!
//! Variables: `alloc(a, w)` for every activity/team pair, `used(w)` per team,
//! then one selector per soft constraint group. Every constraint instance a
//! planner can reason about carries a [`ConstraintLabel`]; soft groups have
//! each clause extended by `¬selector`, so asserting the selector enforces the
//! group and leaving it out relaxes it.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::card::{encode_at_most_k, pairwise_at_most_one};
use crate::model::{self, format_minutes, validate_instance, Instance, ValidationReport};
use crate::sat::{Lit, Var};

pub use crate::card::WeightedCounter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Each task is allocated to some team.
    TaskAllocated,
    /// A task is allocated to at most one team.
    SingleTeam,
    /// Two overlapping tasks never share a team.
    Overlap,
    /// A team only performs tasks it is compatible with.
    Compatibility,
    /// Paired tasks go to the same team.
    SamePair,
    /// Allocation implies the team is used.
    UsedLink,
    /// Redundant at-most-one over tasks running at a common start time.
    Clique,
    /// Ordering on the used flags of interchangeable teams.
    Symmetry,
    /// A planner's forced or forbidden allocation.
    Override,
    /// Objective bound on the number of used teams.
    Bound,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 10] = [
        ConstraintKind::TaskAllocated,
        ConstraintKind::SingleTeam,
        ConstraintKind::Overlap,
        ConstraintKind::Compatibility,
        ConstraintKind::SamePair,
        ConstraintKind::UsedLink,
        ConstraintKind::Clique,
        ConstraintKind::Symmetry,
        ConstraintKind::Override,
        ConstraintKind::Bound,
    ];

    pub fn can_be_soft(self) -> bool {
        matches!(
            self,
            ConstraintKind::TaskAllocated
                | ConstraintKind::Overlap
                | ConstraintKind::Compatibility
                | ConstraintKind::SamePair
                | ConstraintKind::Override
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::TaskAllocated => "TaskAllocated",
            ConstraintKind::SingleTeam => "SingleTeam",
            ConstraintKind::Overlap => "Overlap",
            ConstraintKind::Compatibility => "Compatibility",
            ConstraintKind::SamePair => "SamePair",
            ConstraintKind::UsedLink => "UsedLink",
            ConstraintKind::Clique => "Clique",
            ConstraintKind::Symmetry => "Symmetry",
            ConstraintKind::Override => "Override",
            ConstraintKind::Bound => "Bound",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintKind {
    type Err = EncodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EncodeError::UnknownKind(s.to_string()))
    }
}

/// Identifies one constraint instance. Equality, ordering and hashing use
/// `(kind, subject)` only; `text` is a rendering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintLabel {
    pub kind: ConstraintKind,
    pub subject: Vec<String>,
    #[serde(default)]
    pub text: String,
}

impl ConstraintLabel {
    pub fn new(kind: ConstraintKind, subject: Vec<String>) -> Self {
        ConstraintLabel { kind, subject, text: String::new() }
    }

    pub fn task(activity: &str) -> Self {
        ConstraintLabel::new(ConstraintKind::TaskAllocated, vec![activity.to_string()])
    }

    /// Stable textual key, e.g. `TaskAllocated(a1)` or `Overlap(a1,a2)`.
    pub fn key(&self) -> String {
        format!("{}({})", self.kind, self.subject.join(","))
    }

    pub fn parse_key(key: &str) -> Result<Self, EncodeError> {
        let key = key.trim();
        let open = key.find('(').ok_or_else(|| EncodeError::MalformedKey(key.to_string()))?;
        if !key.ends_with(')') {
            return Err(EncodeError::MalformedKey(key.to_string()));
        }
        let kind: ConstraintKind = key[..open].parse()?;
        let inner = &key[open + 1..key.len() - 1];
        let subject = if inner.is_empty() { Vec::new() } else { inner.split(',').map(|s| s.trim().to_string()).collect() };
        Ok(ConstraintLabel::new(kind, subject))
    }
}

impl PartialEq for ConstraintLabel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.subject == other.subject
    }
}

impl Eq for ConstraintLabel {}

impl std::hash::Hash for ConstraintLabel {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        self.subject.hash(state);
    }
}

impl PartialOrd for ConstraintLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConstraintLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.kind, &self.subject).cmp(&(other.kind, &other.subject))
    }
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverrideMode {
    Force,
    Forbid,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Override {
    pub activity: String,
    pub team: String,
    pub mode: OverrideMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeConfig {
    pub clique: bool,
    pub symmetry: bool,
    pub soft_kinds: BTreeSet<ConstraintKind>,
    pub strict_touch: bool,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            clique: true,
            symmetry: true,
            soft_kinds: [ConstraintKind::TaskAllocated].into_iter().collect(),
            strict_touch: false,
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        match self.soft_kinds.iter().find(|k| !k.can_be_soft()) {
            Some(&k) => Err(EncodeError::KindCannotBeSoft(k)),
            None => Ok(()),
        }
    }

    pub fn is_soft(&self, kind: ConstraintKind) -> bool {
        self.soft_kinds.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),
    #[error("constraint kind {0} cannot be soft")]
    KindCannotBeSoft(ConstraintKind),
    #[error("unknown constraint kind {0:?}")]
    UnknownKind(String),
    #[error("malformed constraint key {0:?}")]
    MalformedKey(String),
    #[error("unknown constraint {0}")]
    UnknownLabel(String),
    #[error("constraint {0} is hard and cannot be relaxed")]
    HardLabel(String),
    #[error("override references unknown activity {0}")]
    UnknownActivity(String),
    #[error("override references unknown team {0}")]
    UnknownTeam(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardinalitySense {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CardinalityConstraint {
    pub lits: Vec<Lit>,
    pub bound: usize,
    pub sense: CardinalitySense,
    pub group: usize,
}

impl CardinalityConstraint {
    pub fn holds(&self, model: &[bool]) -> bool {
        let n = self.lits.iter().filter(|l| l.eval(model)).count();
        match self.sense {
            CardinalitySense::AtMost => n <= self.bound,
            CardinalitySense::AtLeast => n >= self.bound,
        }
    }

    /// Clauses equivalent to this constraint (modulo fresh auxiliaries), each
    /// guarded by `¬selector` when given.
    pub fn lower(&self, selector: Option<Lit>, fresh: &mut dyn FnMut() -> Var) -> Vec<Vec<Lit>> {
        let mut clauses = match self.sense {
            CardinalitySense::AtMost if self.bound == 1 => pairwise_at_most_one(&self.lits),
            CardinalitySense::AtMost => encode_at_most_k(&self.lits, self.bound, fresh),
            CardinalitySense::AtLeast if self.bound == 0 => Vec::new(),
            CardinalitySense::AtLeast if self.bound == 1 => vec![self.lits.clone()],
            CardinalitySense::AtLeast => {
                if self.bound > self.lits.len() {
                    vec![Vec::new()]
                } else {
                    let neg: Vec<Lit> = self.lits.iter().map(|&l| !l).collect();
                    encode_at_most_k(&neg, self.lits.len() - self.bound, fresh)
                }
            }
        };
        if let Some(s) = selector {
            for c in clauses.iter_mut() {
                c.push(!s);
            }
        }
        clauses
    }
}

/// A labeled constraint group: its clauses and cardinality entries, and the
/// selector guarding them when soft.
#[derive(Clone, Debug)]
pub struct Group {
    pub label: ConstraintLabel,
    pub selector: Option<Lit>,
    pub clauses: Vec<u32>,
    pub cardinality: Vec<u32>,
}

impl Group {
    pub fn is_soft(&self) -> bool {
        self.selector.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarMap {
    pub activities: Vec<String>,
    pub teams: Vec<String>,
    /// `[start, end)` of each activity.
    pub windows: Vec<(i64, i64)>,
}

impl VarMap {
    #[inline]
    pub fn alloc(&self, a: usize, w: usize) -> Var {
        Var::new((a * self.teams.len() + w) as u32)
    }

    #[inline]
    pub fn used(&self, w: usize) -> Var {
        Var::new((self.activities.len() * self.teams.len() + w) as u32)
    }

    pub fn num_base_vars(&self) -> usize {
        self.activities.len() * self.teams.len() + self.teams.len()
    }

    /// The team `a` is allocated to under `model`, if any (lowest index first).
    pub fn allocated_team(&self, model: &[bool], a: usize) -> Option<usize> {
        (0..self.teams.len()).find(|&w| model[self.alloc(a, w).index()])
    }

    pub fn used_teams(&self, model: &[bool]) -> Vec<usize> {
        (0..self.teams.len()).filter(|&w| model[self.used(w).index()]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model violates {label}: clause {detail}")]
pub struct ModelViolation {
    pub label: String,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct LabeledFormula {
    pub var_count: usize,
    pub clauses: Vec<Vec<Lit>>,
    pub clause_group: Vec<u32>,
    pub cardinality: Vec<CardinalityConstraint>,
    pub groups: Vec<Group>,
    pub var_map: VarMap,
    /// Group of each activity's `TaskAllocated` label.
    pub task_groups: Vec<usize>,
    /// Group of each conflicting pair's `Overlap` label.
    pub overlap_groups: HashMap<(usize, usize), usize>,
    /// Sets of pairwise conflicting activities, for objective lower bounds.
    pub conflict_cliques: Vec<Vec<usize>>,
    /// Team classes that received ordering constraints (team indices), empty without symmetry.
    pub symmetry_classes: Vec<Vec<usize>>,
    label_index: HashMap<ConstraintLabel, usize>,
    selector_index: HashMap<Lit, usize>,
}

impl LabeledFormula {
    fn empty(var_map: VarMap) -> Self {
        LabeledFormula {
            var_count: var_map.num_base_vars(),
            clauses: Vec::new(),
            clause_group: Vec::new(),
            cardinality: Vec::new(),
            groups: Vec::new(),
            var_map,
            task_groups: Vec::new(),
            overlap_groups: HashMap::new(),
            conflict_cliques: Vec::new(),
            symmetry_classes: Vec::new(),
            label_index: HashMap::new(),
            selector_index: HashMap::new(),
        }
    }

    fn fresh_var(&mut self) -> Var {
        let v = Var::new(self.var_count as u32);
        self.var_count += 1;
        v
    }

    fn open_group(&mut self, label: ConstraintLabel, soft: bool) -> usize {
        debug_assert!(!self.label_index.contains_key(&label), "duplicate label {label}");
        let gid = self.groups.len();
        let selector = soft.then(|| self.fresh_var().pos());
        if let Some(s) = selector {
            self.selector_index.insert(s, gid);
        }
        self.label_index.insert(label.clone(), gid);
        self.groups.push(Group { label, selector, clauses: Vec::new(), cardinality: Vec::new() });
        gid
    }

    fn push_clause(&mut self, gid: usize, mut lits: Vec<Lit>) {
        if let Some(s) = self.groups[gid].selector {
            lits.push(!s);
        }
        self.groups[gid].clauses.push(self.clauses.len() as u32);
        self.clauses.push(lits);
        self.clause_group.push(gid as u32);
    }

    fn push_cardinality(&mut self, gid: usize, lits: Vec<Lit>, bound: usize, sense: CardinalitySense) {
        self.groups[gid].cardinality.push(self.cardinality.len() as u32);
        self.cardinality.push(CardinalityConstraint { lits, bound, sense, group: gid });
    }

    pub fn num_activities(&self) -> usize {
        self.var_map.activities.len()
    }

    pub fn num_teams(&self) -> usize {
        self.var_map.teams.len()
    }

    pub fn group_of(&self, label: &ConstraintLabel) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn group_of_selector(&self, selector: Lit) -> Option<usize> {
        self.selector_index.get(&selector).copied()
    }

    pub fn label(&self, gid: usize) -> &ConstraintLabel {
        &self.groups[gid].label
    }

    /// Soft group ids in creation order.
    pub fn soft_groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().enumerate().filter(|(_, g)| g.is_soft()).map(|(i, _)| i)
    }

    pub fn soft_labels(&self) -> Vec<ConstraintLabel> {
        self.soft_groups().map(|g| self.groups[g].label.clone()).collect()
    }

    /// Resolves labels to soft group ids, rejecting unknown and hard ones.
    pub fn soft_group_ids<'a>(
        &self,
        labels: impl IntoIterator<Item = &'a ConstraintLabel>,
    ) -> Result<Vec<usize>, EncodeError> {
        labels
            .into_iter()
            .map(|l| {
                let gid = self.group_of(l).ok_or_else(|| EncodeError::UnknownLabel(l.key()))?;
                if !self.groups[gid].is_soft() {
                    return Err(EncodeError::HardLabel(l.key()));
                }
                Ok(gid)
            })
            .collect()
    }

    /// Assumptions activating every soft group except `relaxed`.
    pub fn relax<'a>(&self, relaxed: impl IntoIterator<Item = &'a ConstraintLabel>) -> Result<Vec<Lit>, EncodeError> {
        let skip: BTreeSet<usize> = self.soft_group_ids(relaxed)?.into_iter().collect();
        Ok(self.soft_groups().filter(|g| !skip.contains(g)).filter_map(|g| self.groups[g].selector).collect())
    }

    /// Selector assumptions for exactly the given soft groups.
    pub fn assumptions_for(&self, gids: impl IntoIterator<Item = usize>) -> Vec<Lit> {
        gids.into_iter().filter_map(|g| self.groups[g].selector).collect()
    }

    /// Evaluates every clause and cardinality constraint directly under `model`.
    /// Guarded cardinality entries are skipped when their selector is false.
    pub fn check_model(&self, model: &[bool]) -> Result<(), ModelViolation> {
        if model.len() < self.var_count {
            return Err(ModelViolation { label: "model".into(), detail: format!("has {} of {} variables", model.len(), self.var_count) });
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if !c.iter().any(|l| l.eval(model)) {
                let gid = self.clause_group[i] as usize;
                return Err(ModelViolation { label: self.groups[gid].label.key(), detail: format!("{c:?}") });
            }
        }
        for card in &self.cardinality {
            let active = self.groups[card.group].selector.is_none_or(|s| s.eval(model));
            if active && !card.holds(model) {
                return Err(ModelViolation { label: self.groups[card.group].label.key(), detail: format!("{card:?}") });
            }
        }
        Ok(())
    }

    /// Whether `model` satisfies the group as if its selector were asserted.
    pub fn group_satisfied(&self, gid: usize, model: &[bool]) -> bool {
        let g = &self.groups[gid];
        let guard = g.selector.map(|s| !s);
        let clauses_ok = g.clauses.iter().all(|&ci| {
            self.clauses[ci as usize].iter().any(|&l| Some(l) != guard && l.eval(model))
        });
        clauses_ok && g.cardinality.iter().all(|&ci| self.cardinality[ci as usize].holds(model))
    }

    /// Appends a hard `Bound` group limiting the number of used teams to `k`.
    pub fn add_used_bound(&mut self, k: usize) -> usize {
        let label = ConstraintLabel {
            kind: ConstraintKind::Bound,
            subject: vec![k.to_string()],
            text: format!("At most {k} teams are used"),
        };
        if let Some(g) = self.group_of(&label) {
            return g;
        }
        let gid = self.open_group(label, false);
        let used: Vec<Lit> = (0..self.num_teams()).map(|w| self.var_map.used(w).pos()).collect();
        self.push_cardinality(gid, used, k, CardinalitySense::AtMost);
        gid
    }

    /// All constraints lowered to plain clauses, with fresh auxiliaries numbered
    /// from `var_count`. Returns the total number of variables and the clauses.
    pub fn lowered_clauses(&self) -> (usize, Vec<Vec<Lit>>) {
        let mut next = self.var_count as u32;
        let mut fresh = || {
            let v = Var::new(next);
            next += 1;
            v
        };
        let mut out = self.clauses.clone();
        for card in &self.cardinality {
            out.extend(card.lower(self.groups[card.group].selector, &mut fresh));
        }
        (next as usize, out)
    }

    /// DIMACS CNF with one comment line per group (`c group <id> <key> hard|soft <selector>`).
    pub fn to_dimacs(&self) -> String {
        use std::fmt::Write;
        let (vars, clauses) = self.lowered_clauses();
        let mut out = String::new();
        let _ = writeln!(out, "c crewplan formula: {} activities, {} teams", self.num_activities(), self.num_teams());
        for (gid, g) in self.groups.iter().enumerate() {
            match g.selector {
                Some(s) => {
                    let _ = writeln!(out, "c group {gid} {} soft {s}", g.label.key());
                }
                None => {
                    let _ = writeln!(out, "c group {gid} {} hard", g.label.key());
                }
            }
        }
        let _ = writeln!(out, "p cnf {vars} {}", clauses.len());
        for c in &clauses {
            for l in c {
                let _ = write!(out, "{l} ");
            }
            out.push_str("0\n");
        }
        out
    }
}

fn interval(instance: &Instance, a: usize) -> String {
    let act = &instance.activities[a];
    format!("[{}–{}]", format_minutes(act.start), format_minutes(act.end))
}

fn team_list(instance: &Instance, teams: impl Iterator<Item = usize>) -> String {
    let ids: Vec<&str> = teams.map(|w| instance.teams[w].id.as_str()).collect();
    format!("{{{}}}", ids.join(","))
}

pub(crate) fn overlap_text(instance: &Instance, i: usize, j: usize) -> String {
    let (a, b) = (&instance.activities[i], &instance.activities[j]);
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if lo < hi {
        format!(
            "Tasks {} {} and {} {} overlap during [{}–{}) and cannot share a team",
            a.id,
            interval(instance, i),
            b.id,
            interval(instance, j),
            format_minutes(lo),
            format_minutes(hi)
        )
    } else {
        format!(
            "Tasks {} {} and {} {} are back-to-back at {} and cannot share a team",
            a.id,
            interval(instance, i),
            b.id,
            interval(instance, j),
            format_minutes(lo)
        )
    }
}

/// Encodes `instance` without planner overrides.
pub fn encode(instance: &Instance, cfg: &EncodeConfig) -> Result<LabeledFormula, EncodeError> {
    encode_with_overrides(instance, cfg, &[])
}

pub fn encode_with_overrides(
    instance: &Instance,
    cfg: &EncodeConfig,
    overrides: &[Override],
) -> Result<LabeledFormula, EncodeError> {
    cfg.validate()?;
    validate_instance(instance).into_result().map_err(EncodeError::InvalidInstance)?;
    let n_act = instance.num_activities();
    let n_team = instance.num_teams();
    let lookup = instance.activity_lookup();
    let mut resolved = Vec::with_capacity(overrides.len());
    for o in overrides {
        let a = *lookup.get(o.activity.as_str()).ok_or_else(|| EncodeError::UnknownActivity(o.activity.clone()))?;
        let w = instance.team_index(&o.team).ok_or_else(|| EncodeError::UnknownTeam(o.team.clone()))?;
        resolved.push((a, w, o.mode));
    }

    let var_map = VarMap {
        activities: instance.activities.iter().map(|a| a.id.clone()).collect(),
        teams: instance.teams.iter().map(|t| t.id.clone()).collect(),
        windows: instance.activities.iter().map(|a| (a.start, a.end)).collect(),
    };
    let mut f = LabeledFormula::empty(var_map);
    let vm = f.var_map.clone();
    let act_id = |a: usize| instance.activities[a].id.clone();
    let team_id = |w: usize| instance.teams[w].id.clone();

    // (1) every task is allocated to one of the teams
    for a in 0..n_act {
        let text = format!(
            "Task {} {} must be assigned to one of {}",
            instance.activities[a].id,
            interval(instance, a),
            team_list(instance, instance.compatible_teams(a))
        );
        let label = ConstraintLabel { kind: ConstraintKind::TaskAllocated, subject: vec![act_id(a)], text };
        let gid = f.open_group(label, cfg.is_soft(ConstraintKind::TaskAllocated));
        f.push_clause(gid, (0..n_team).map(|w| vm.alloc(a, w).pos()).collect());
        f.task_groups.push(gid);
    }
    for a in 0..n_act {
        let label = ConstraintLabel {
            kind: ConstraintKind::SingleTeam,
            subject: vec![act_id(a)],
            text: format!("Task {} is performed by at most one team", instance.activities[a].id),
        };
        let gid = f.open_group(label, false);
        let lits: Vec<Lit> = (0..n_team).map(|w| vm.alloc(a, w).pos()).collect();
        for c in pairwise_at_most_one(&lits) {
            f.push_clause(gid, c);
        }
    }

    // (2) overlapping tasks, symmetrised over the neighbourhood relation
    let pairs = model::conflict_pairs(instance, cfg.strict_touch);
    let overlap_soft = cfg.is_soft(ConstraintKind::Overlap);
    for &(i, j) in &pairs {
        let label = ConstraintLabel {
            kind: ConstraintKind::Overlap,
            subject: vec![act_id(i), act_id(j)],
            text: overlap_text(instance, i, j),
        };
        let gid = f.open_group(label, overlap_soft);
        for w in 0..n_team {
            f.push_clause(gid, vec![vm.alloc(i, w).neg(), vm.alloc(j, w).neg()]);
        }
        f.overlap_groups.insert((i, j), gid);
    }

    // (3) compatibility
    let compat_soft = cfg.is_soft(ConstraintKind::Compatibility);
    for a in 0..n_act {
        for w in 0..n_team {
            if !instance.compatible(a, w) {
                let label = ConstraintLabel {
                    kind: ConstraintKind::Compatibility,
                    subject: vec![act_id(a), team_id(w)],
                    text: format!("{} cannot perform {}", instance.teams[w].id, instance.activities[a].id),
                };
                let gid = f.open_group(label, compat_soft);
                f.push_clause(gid, vec![vm.alloc(a, w).neg()]);
            }
        }
    }

    // (4) same-team pairs
    let mut seen_pairs = BTreeSet::new();
    for (x, y) in &instance.same_pairs {
        let (i, j) = (lookup[x.as_str()], lookup[y.as_str()]);
        if i == j || !seen_pairs.insert((i.min(j), i.max(j))) {
            continue;
        }
        let label = ConstraintLabel {
            kind: ConstraintKind::SamePair,
            subject: vec![x.clone(), y.clone()],
            text: format!("Tasks {x} and {y} must be assigned to the same team"),
        };
        let gid = f.open_group(label, cfg.is_soft(ConstraintKind::SamePair));
        for w in 0..n_team {
            f.push_clause(gid, vec![vm.alloc(i, w).neg(), vm.alloc(j, w).pos()]);
            f.push_clause(gid, vec![vm.alloc(i, w).pos(), vm.alloc(j, w).neg()]);
        }
    }

    // planner overrides; a later override on the same pair replaces an earlier one
    let override_soft = cfg.is_soft(ConstraintKind::Override);
    let mut effective: Vec<(usize, usize, OverrideMode)> = Vec::new();
    for &(a, w, mode) in &resolved {
        effective.retain(|&(a2, w2, _)| (a2, w2) != (a, w));
        effective.push((a, w, mode));
    }
    for &(a, w, mode) in &effective {
        let (aid, tid) = (&instance.activities[a].id, &instance.teams[w].id);
        let text = match mode {
            OverrideMode::Force => format!("Planner override: {aid} must be assigned to {tid}"),
            OverrideMode::Forbid => format!("Planner override: {aid} must not be assigned to {tid}"),
        };
        let label = ConstraintLabel { kind: ConstraintKind::Override, subject: vec![act_id(a), team_id(w)], text };
        let gid = f.open_group(label, override_soft);
        let lit = vm.alloc(a, w).lit(mode == OverrideMode::Force);
        f.push_clause(gid, vec![lit]);
    }

    // (5) allocation implies use
    for w in 0..n_team {
        let label = ConstraintLabel {
            kind: ConstraintKind::UsedLink,
            subject: vec![team_id(w)],
            text: format!("Team {} counts as used when it performs a task", instance.teams[w].id),
        };
        let gid = f.open_group(label, false);
        for a in 0..n_act {
            f.push_clause(gid, vec![vm.alloc(a, w).neg(), vm.used(w).pos()]);
        }
    }

    // (6a) redundant start-time cliques; only redundant while overlaps are hard
    if cfg.clique && !overlap_soft {
        for members in model::dedup_start_cliques(instance) {
            if members.len() < 2 {
                continue;
            }
            let ids: Vec<String> = members.iter().map(|&a| act_id(a)).collect();
            let text = format!("Tasks {} run concurrently; each team performs at most one of them", ids.join(", "));
            let gid = f.open_group(ConstraintLabel { kind: ConstraintKind::Clique, subject: ids, text }, false);
            for w in 0..n_team {
                let lits = members.iter().map(|&a| vm.alloc(a, w).pos()).collect();
                f.push_cardinality(gid, lits, 1, CardinalitySense::AtMost);
            }
        }
    }

    // (6b) order used flags within classes of interchangeable teams
    if cfg.symmetry {
        let classes = symmetry_classes(instance, cfg, &effective);
        for class in &classes {
            for pair in class.windows(2) {
                let (w1, w2) = (pair[0], pair[1]);
                let label = ConstraintLabel {
                    kind: ConstraintKind::Symmetry,
                    subject: vec![team_id(w1), team_id(w2)],
                    text: format!(
                        "Team {} is used before interchangeable team {}",
                        instance.teams[w1].id, instance.teams[w2].id
                    ),
                };
                let gid = f.open_group(label, false);
                f.push_clause(gid, vec![vm.used(w1).pos(), vm.used(w2).neg()]);
            }
        }
        f.symmetry_classes = classes;
    }

    f.conflict_cliques = model::conflict_cliques(instance, cfg.strict_touch);
    Ok(f)
}

/// Classes of teams that stay interchangeable under every relaxation the
/// configuration allows: identical hard compatibility columns, and no
/// team-specific soft constraint or forcing override.
fn symmetry_classes(instance: &Instance, cfg: &EncodeConfig, overrides: &[(usize, usize, OverrideMode)]) -> Vec<Vec<usize>> {
    let n_act = instance.num_activities();
    let compat_soft = cfg.is_soft(ConstraintKind::Compatibility);
    let override_soft = cfg.is_soft(ConstraintKind::Override);
    model::classes_by_signature(instance.num_teams(), |w| {
        let mut column: Vec<bool> = (0..n_act).map(|a| instance.compatible(a, w)).collect();
        let mut pinned = compat_soft && column.iter().any(|&c| !c);
        for &(a, ow, mode) in overrides {
            if ow != w {
                continue;
            }
            match (mode, override_soft) {
                (OverrideMode::Forbid, false) => column[a] = false,
                _ => pinned = true,
            }
        }
        (pinned.then_some(w), column)
    })
    .into_iter()
    .filter(|c| c.len() > 1)
    .collect()
}
