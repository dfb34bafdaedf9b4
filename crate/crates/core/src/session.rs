//! Interactive planning session: a state machine over an evolving problem
//! (relaxations, overrides, priorities) that drives the optimizer and the
//! explainers and renders Gantt views.
//!
//! Every operation runs on a copy of the state and commits only on success,
//! so a rejected operation leaves the session untouched. Successful
//! operations are appended to the history; replaying it on a fresh session
//! reproduces the final state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::encode::{
    encode_with_overrides, ConstraintKind, ConstraintLabel, EncodeConfig, EncodeError, LabeledFormula, Override,
    OverrideMode,
};
use crate::explain::{
    describe_conflict, find_mcs, find_mus, ConflictExplanation, ExplainError, ExplainOptions, ExplainStats,
    ExplanationKind,
};
use crate::io::SolutionFile;
use crate::model::{validate_instance, Instance, ValidationReport};
use crate::optimize::{
    maximize_weighted_allocation, minimize_used_teams_with, Minimized, OptimizeError, OptimizeOptions,
    PriorityWeights, RelaxedSolution,
};
use crate::oracle::row_violations;
use crate::sat::{Budget, SolverConfig, DEFAULT_TIMEOUT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Idle,
    Feasible,
    Infeasible,
    LocalResolution,
    GlobalResolution,
    PriorityTuning,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub encode: EncodeConfig,
    /// Budget of every operation, in seconds.
    pub timeout_secs: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { encode: EncodeConfig::default(), timeout_secs: DEFAULT_TIMEOUT.as_secs_f64(), seed: 0 }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(SessionError::Config(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        self.encode.validate()?;
        Ok(())
    }

    fn budget(&self) -> Budget {
        Budget::from_secs_f64(self.timeout_secs)
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, ..SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{op} is not allowed in mode {mode}")]
    WrongMode { op: &'static str, mode: Mode },
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown activity {0}")]
    UnknownActivity(String),
    #[error("unknown team {0}")]
    UnknownTeam(String),
    #[error("{team} cannot perform {activity}; a force override needs a compatible team")]
    IncompatibleForce { activity: String, team: String },
    #[error("{0} is not part of the current conflict")]
    NotInConflict(String),
    #[error("{0} is already relaxed")]
    AlreadyRelaxed(String),
    #[error("the conflict involves hard constraints only; widen the soft kinds to resolve it")]
    HardConflict,
    #[error("no solution is available for this view")]
    NoSolution,
    #[error("budget exhausted")]
    BudgetExceeded,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Optimize(OptimizeError),
    #[error(transparent)]
    Explain(ExplainError),
}

impl From<OptimizeError> for SessionError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::BudgetExhausted => SessionError::BudgetExceeded,
            OptimizeError::Encode(e) => SessionError::Encode(e),
            e => SessionError::Optimize(e),
        }
    }
}

impl From<ExplainError> for SessionError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::BudgetExceeded => SessionError::BudgetExceeded,
            ExplainError::HardCoreConflict => SessionError::HardConflict,
            ExplainError::Encode(e) => SessionError::Encode(e),
            e => SessionError::Explain(e),
        }
    }
}

/// A replayable user action. Labels travel as keys such as `TaskAllocated(a1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Start,
    Solve,
    ApplyOverride { activity: String, team: String, mode: OverrideMode },
    BeginLocalResolution,
    ResolveLocal { label: String },
    BeginGlobalResolution,
    AcceptCorrections { labels: Vec<String> },
    TunePriorities { weights: BTreeMap<String, u64> },
    AcceptRelaxedSolution,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Start => "start",
            Event::Solve => "solve",
            Event::ApplyOverride { .. } => "apply_override",
            Event::BeginLocalResolution => "begin_local_resolution",
            Event::ResolveLocal { .. } => "resolve_local",
            Event::BeginGlobalResolution => "begin_global_resolution",
            Event::AcceptCorrections { .. } => "accept_corrections",
            Event::TunePriorities { .. } => "tune_priorities",
            Event::AcceptRelaxedSolution => "accept_relaxed_solution",
        }
    }
}

/// What an operation led to, recorded next to the event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub objective: Option<usize>,
    pub unallocated: Vec<String>,
    /// Keys of the conflict presented after the operation, if any.
    pub conflict: Vec<String>,
    /// A new correction set was computed on the reduced problem.
    pub recomputed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: usize,
    pub event: Event,
    pub mode: Mode,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingConflict {
    pub explanation: ConflictExplanation,
    pub minimal: bool,
    pub stats: ExplainStats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttEntry {
    pub activity: String,
    pub start: i64,
    pub end: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttRow {
    /// `None` for the Unset row.
    pub team: Option<String>,
    pub name: String,
    pub entries: Vec<GanttEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttData {
    /// Unset row first, then one row per team in instance order.
    pub rows: Vec<GanttRow>,
    pub conflict_highlight: Vec<String>,
}

pub const UNSET_ROW: &str = "Unset";

impl GanttData {
    pub fn build(instance: &Instance, allocation: &BTreeMap<String, String>, highlight: Vec<String>) -> Self {
        let mut rows: Vec<GanttRow> = std::iter::once(GanttRow { team: None, name: UNSET_ROW.into(), entries: Vec::new() })
            .chain(
                instance
                    .teams
                    .iter()
                    .map(|t| GanttRow { team: Some(t.id.clone()), name: t.id.clone(), entries: Vec::new() }),
            )
            .collect();
        for act in &instance.activities {
            let row = match allocation.get(&act.id).and_then(|t| instance.team_index(t)) {
                Some(w) => w + 1,
                None => 0,
            };
            rows[row].entries.push(GanttEntry { activity: act.id.clone(), start: act.start, end: act.end });
        }
        for row in &mut rows {
            row.entries.sort_by(|a, b| (a.start, a.end, &a.activity).cmp(&(b.start, b.end, &b.activity)));
        }
        GanttData { rows, conflict_highlight: highlight }
    }

    pub fn unset(&self) -> &[GanttEntry] {
        self.rows.iter().find(|r| r.team.is_none()).map(|r| r.entries.as_slice()).unwrap_or(&[])
    }
}

/// Independent soundness check of a Gantt view: no two entries of a team row
/// overlap, every activity appears exactly once with its own window, and the
/// Unset row comes first.
pub fn check_gantt(gantt: &GanttData, instance: &Instance, strict_touch: bool) -> Vec<String> {
    let mut problems = Vec::new();
    if gantt.rows.first().is_none_or(|r| r.team.is_some()) {
        problems.push("the first row is not the Unset row".to_string());
    }
    if gantt.rows.iter().filter(|r| r.team.is_none()).count() != 1 {
        problems.push("there must be exactly one Unset row".to_string());
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &gantt.rows {
        if let Some(t) = &row.team {
            if instance.team_index(t).is_none() {
                problems.push(format!("row for unknown team {t}"));
            }
            let entries: Vec<(String, i64, i64)> =
                row.entries.iter().map(|e| (e.activity.clone(), e.start, e.end)).collect();
            for (a, b) in row_violations(&entries, strict_touch) {
                problems.push(format!("{a} and {b} overlap in row {t}"));
            }
        }
        for e in &row.entries {
            *seen.entry(e.activity.as_str()).or_default() += 1;
            match instance.activity_index(&e.activity) {
                Some(a) => {
                    let act = &instance.activities[a];
                    if (act.start, act.end) != (e.start, e.end) {
                        problems.push(format!("{} is drawn at the wrong time", e.activity));
                    }
                }
                None => problems.push(format!("unknown activity {}", e.activity)),
            }
        }
    }
    for act in &instance.activities {
        match seen.get(act.id.as_str()).copied().unwrap_or(0) {
            1 => {}
            n => problems.push(format!("{} appears {n} times", act.id)),
        }
    }
    problems
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub instance: Instance,
    pub config: SessionConfig,
    pub mode: Mode,
    pub relaxed_labels: BTreeSet<ConstraintLabel>,
    pub overrides: Vec<Override>,
    pub priorities: PriorityWeights,
    /// Set once an override led to infeasibility; Override labels are soft from then on.
    pub soft_overrides: bool,
    pub last_solution: Option<SolutionFile>,
    pub last_relaxed: Option<RelaxedSolution>,
    pub last_conflict: Option<PendingConflict>,
    pub history: Vec<HistoryEntry>,
    #[serde(skip)]
    preview: Option<RelaxedSolution>,
}

impl Session {
    /// Validates, encodes and solves `instance`.
    pub fn start(instance: Instance, config: SessionConfig) -> Result<Self, SessionError> {
        validate_instance(&instance).into_result().map_err(SessionError::Invalid)?;
        config.validate()?;
        let mut s = Session {
            instance,
            config,
            mode: Mode::Idle,
            relaxed_labels: BTreeSet::new(),
            overrides: Vec::new(),
            priorities: PriorityWeights::default(),
            soft_overrides: false,
            last_solution: None,
            last_relaxed: None,
            last_conflict: None,
            history: Vec::new(),
            preview: None,
        };
        s.apply(Event::Start)?;
        Ok(s)
    }

    /// Rebuilds a session by replaying `events` (a leading `Start` is implied and skipped).
    pub fn replay(instance: Instance, config: SessionConfig, events: &[Event]) -> Result<Self, SessionError> {
        let mut s = Session::start(instance, config)?;
        for e in events.iter().skip_while(|e| **e == Event::Start) {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn events(&self) -> Vec<Event> {
        self.history.iter().map(|h| h.event.clone()).collect()
    }

    /// Snapshot JSON with every `stats` block removed, for equality checks.
    pub fn canonical(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("session serializes");
        strip_stats(&mut v);
        v
    }

    pub fn effective_encode_config(&self) -> EncodeConfig {
        let mut cfg = self.config.encode.clone();
        if self.soft_overrides {
            cfg.soft_kinds.insert(ConstraintKind::Override);
        }
        cfg
    }

    pub fn formula(&self) -> Result<LabeledFormula, SessionError> {
        Ok(encode_with_overrides(&self.instance, &self.effective_encode_config(), &self.overrides)?)
    }

    /// Applies one event transactionally.
    pub fn apply(&mut self, event: Event) -> Result<(), SessionError> {
        let mut next = self.clone();
        next.preview = None;
        let outcome = next.run(&event)?;
        next.history.push(HistoryEntry { seq: next.history.len(), event, mode: next.mode, outcome });
        *self = next;
        Ok(())
    }

    pub fn solve(&mut self) -> Result<(), SessionError> {
        self.apply(Event::Solve)
    }

    pub fn apply_override(&mut self, activity: &str, team: &str, mode: OverrideMode) -> Result<(), SessionError> {
        self.apply(Event::ApplyOverride { activity: activity.into(), team: team.into(), mode })
    }

    pub fn begin_local_resolution(&mut self) -> Result<&PendingConflict, SessionError> {
        self.apply(Event::BeginLocalResolution)?;
        Ok(self.last_conflict.as_ref().expect("conflict after begin"))
    }

    pub fn resolve_local(&mut self, label: &ConstraintLabel) -> Result<(), SessionError> {
        self.apply(Event::ResolveLocal { label: label.key() })
    }

    pub fn begin_global_resolution(&mut self) -> Result<&PendingConflict, SessionError> {
        self.apply(Event::BeginGlobalResolution)?;
        Ok(self.last_conflict.as_ref().expect("conflict after begin"))
    }

    pub fn accept_corrections(&mut self, labels: &[ConstraintLabel]) -> Result<(), SessionError> {
        self.apply(Event::AcceptCorrections { labels: labels.iter().map(|l| l.key()).collect() })
    }

    pub fn tune_priorities(&mut self, weights: BTreeMap<String, u64>) -> Result<&RelaxedSolution, SessionError> {
        self.apply(Event::TunePriorities { weights })?;
        Ok(self.last_relaxed.as_ref().expect("relaxed solution after tuning"))
    }

    pub fn accept_relaxed_solution(&mut self) -> Result<(), SessionError> {
        self.apply(Event::AcceptRelaxedSolution)
    }

    /// Gantt rows of the current solution. In an infeasible state without a
    /// solution, a maximum allocation under the current relaxations is drawn
    /// and cached until the next operation.
    pub fn gantt_view(&mut self) -> Result<GanttData, SessionError> {
        let highlight = self
            .last_conflict
            .as_ref()
            .map(|c| c.explanation.involved.activities.clone())
            .unwrap_or_default();
        if self.mode == Mode::PriorityTuning {
            if let Some(r) = &self.last_relaxed {
                return Ok(GanttData::build(&self.instance, &r.allocation, highlight));
            }
        }
        if let Some(sol) = &self.last_solution {
            return Ok(GanttData::build(&self.instance, &sol.allocation, highlight));
        }
        if self.mode == Mode::Idle {
            return Err(SessionError::NoSolution);
        }
        if self.preview.is_none() {
            let f = self.formula()?;
            let relaxed: Vec<ConstraintLabel> = self.relaxed_labels.iter().cloned().collect();
            let options = self.optimize_options();
            let weights = PriorityWeights::default();
            let budget = self.config.budget();
            // Enforced soft labels such as conflicting overrides can leave no
            // allocation at all; the view then ignores every soft label.
            let r = match maximize_weighted_allocation(&f, &weights, &relaxed, budget, &options) {
                Err(OptimizeError::HardConflict(_)) => {
                    let all: Vec<ConstraintLabel> =
                        f.soft_labels().into_iter().filter(|l| l.kind != ConstraintKind::TaskAllocated).collect();
                    maximize_weighted_allocation(&f, &weights, &all, budget, &options)
                }
                r => r,
            }
            .map_err(|e| match e {
                OptimizeError::TaskAllocationHard | OptimizeError::HardConflict(_) => SessionError::NoSolution,
                e => e.into(),
            })?;
            self.preview = Some(r);
        }
        let r = self.preview.as_ref().expect("preview computed");
        Ok(GanttData::build(&self.instance, &r.allocation, highlight))
    }

    fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions { solver: self.config.solver(), ..OptimizeOptions::default() }
    }

    fn explain_options(&self) -> ExplainOptions {
        ExplainOptions { solver: self.config.solver(), ..ExplainOptions::default() }
    }

    fn require(&self, op: &'static str, allowed: &[Mode]) -> Result<(), SessionError> {
        if allowed.contains(&self.mode) {
            Ok(())
        } else {
            Err(SessionError::WrongMode { op, mode: self.mode })
        }
    }

    fn run(&mut self, event: &Event) -> Result<Outcome, SessionError> {
        use Mode::*;
        let op = event.name();
        match event {
            Event::Start => {
                self.require(op, &[Idle])?;
                self.optimize()?;
                Ok(self.solution_outcome())
            }
            Event::Solve => {
                self.last_conflict = None;
                self.last_relaxed = None;
                self.optimize()?;
                Ok(self.solution_outcome())
            }
            Event::ApplyOverride { activity, team, mode } => {
                self.require(op, &[Feasible, Infeasible])?;
                let a = self.instance.activity_index(activity).ok_or_else(|| SessionError::UnknownActivity(activity.clone()))?;
                let w = self.instance.team_index(team).ok_or_else(|| SessionError::UnknownTeam(team.clone()))?;
                if *mode == OverrideMode::Force && !self.instance.compatible(a, w) {
                    return Err(SessionError::IncompatibleForce { activity: activity.clone(), team: team.clone() });
                }
                self.overrides.retain(|o| !(o.activity == *activity && o.team == *team));
                self.overrides.push(Override { activity: activity.clone(), team: team.clone(), mode: *mode });
                self.last_conflict = None;
                if !self.optimize()? && !self.config.encode.is_soft(ConstraintKind::Override) {
                    self.soft_overrides = true;
                }
                Ok(self.solution_outcome())
            }
            Event::BeginLocalResolution => {
                self.require(op, &[Infeasible])?;
                self.present_mus()?;
                self.mode = LocalResolution;
                Ok(self.conflict_outcome(false))
            }
            Event::ResolveLocal { label } => {
                self.require(op, &[LocalResolution])?;
                let f = self.formula()?;
                let label = self.conflict_label(&f, label)?;
                self.relaxed_labels.insert(label);
                if self.optimize()? {
                    self.last_conflict = None;
                    Ok(self.solution_outcome())
                } else {
                    self.present_mus()?;
                    self.mode = LocalResolution;
                    Ok(self.conflict_outcome(false))
                }
            }
            Event::BeginGlobalResolution => {
                self.require(op, &[Infeasible])?;
                self.present_mcs()?;
                self.mode = GlobalResolution;
                Ok(self.conflict_outcome(false))
            }
            Event::AcceptCorrections { labels } => {
                self.require(op, &[GlobalResolution])?;
                if labels.is_empty() {
                    return Ok(self.conflict_outcome(false));
                }
                let f = self.formula()?;
                let mut accepted = Vec::with_capacity(labels.len());
                for key in labels {
                    accepted.push(self.conflict_label(&f, key)?);
                }
                self.relaxed_labels.extend(accepted);
                if self.optimize()? {
                    self.last_conflict = None;
                    Ok(self.solution_outcome())
                } else {
                    self.present_mcs()?;
                    self.mode = GlobalResolution;
                    Ok(self.conflict_outcome(true))
                }
            }
            Event::TunePriorities { weights } => {
                self.require(op, &[Infeasible, PriorityTuning])?;
                for (id, &w) in weights {
                    self.priorities.set(id.clone(), w);
                }
                let f = self.formula()?;
                let relaxed: Vec<ConstraintLabel> = self.relaxed_labels.iter().cloned().collect();
                let r = maximize_weighted_allocation(
                    &f,
                    &self.priorities,
                    &relaxed,
                    self.config.budget(),
                    &self.optimize_options(),
                )?;
                let outcome = Outcome {
                    objective: None,
                    unallocated: r.unallocated.clone(),
                    conflict: Vec::new(),
                    recomputed: false,
                };
                self.last_relaxed = Some(r);
                self.mode = PriorityTuning;
                Ok(outcome)
            }
            Event::AcceptRelaxedSolution => {
                self.require(op, &[PriorityTuning])?;
                let r = self.last_relaxed.take().expect("tuning mode holds a relaxed solution");
                let f = self.formula()?;
                for id in &r.unallocated {
                    let gid = f.group_of(&ConstraintLabel::task(id)).expect("task label exists");
                    self.relaxed_labels.insert(f.label(gid).clone());
                }
                if !self.optimize()? {
                    // The relaxed solution witnesses feasibility; only a budget
                    // cut-off can land here.
                    return Err(SessionError::BudgetExceeded);
                }
                Ok(self.solution_outcome())
            }
        }
    }

    /// Minimises used teams under the current relaxations. Returns whether the
    /// problem is feasible and sets the mode accordingly.
    fn optimize(&mut self) -> Result<bool, SessionError> {
        let f = self.formula()?;
        let assumptions = f.relax(&self.relaxed_labels)?;
        let relaxed: Vec<ConstraintLabel> = self.relaxed_labels.iter().cloned().collect();
        let result = minimize_used_teams_with(&f, &assumptions, self.config.budget(), &self.optimize_options())?;
        match result {
            Minimized::Solved(s) | Minimized::Timeout { incumbent: Some(s), .. } => {
                self.last_solution = Some(SolutionFile::optimal(&s, &relaxed));
                self.mode = Mode::Feasible;
                Ok(true)
            }
            Minimized::Timeout { incumbent: None, .. } => Err(SessionError::BudgetExceeded),
            Minimized::Infeasible { .. } => {
                self.last_solution = None;
                self.mode = Mode::Infeasible;
                Ok(false)
            }
        }
    }

    fn scope(&self, f: &LabeledFormula) -> Vec<ConstraintLabel> {
        f.soft_labels().into_iter().filter(|l| !self.relaxed_labels.contains(l)).collect()
    }

    fn present_mus(&mut self) -> Result<(), SessionError> {
        let f = self.formula()?;
        let mus = find_mus(&f, &self.scope(&f), self.config.budget(), &self.explain_options())?;
        if mus.labels.is_empty() {
            return Err(SessionError::HardConflict);
        }
        let explanation = describe_conflict(ExplanationKind::Mus, &mus.labels, &f, &self.instance)?;
        self.last_conflict = Some(PendingConflict { explanation, minimal: mus.minimal, stats: mus.stats });
        Ok(())
    }

    fn present_mcs(&mut self) -> Result<(), SessionError> {
        let f = self.formula()?;
        let scope = self.scope(&f);
        let mcs = find_mcs(&f, &scope, self.config.budget(), &self.explain_options())?;
        if mcs.labels.is_empty() {
            // Everything in scope fits, so the conflict is among hard constraints.
            return Err(SessionError::HardConflict);
        }
        let explanation = describe_conflict(ExplanationKind::Mcs, &mcs.labels, &f, &self.instance)?;
        self.last_conflict = Some(PendingConflict { explanation, minimal: mcs.minimal, stats: mcs.stats });
        Ok(())
    }

    /// Resolves `key` to its full label, requiring it to be part of the pending conflict.
    fn conflict_label(&self, f: &LabeledFormula, key: &str) -> Result<ConstraintLabel, SessionError> {
        let label = ConstraintLabel::parse_key(key)?;
        if self.relaxed_labels.contains(&label) {
            return Err(SessionError::AlreadyRelaxed(label.key()));
        }
        let pending = self.last_conflict.as_ref().map(|c| c.explanation.contains(&label)).unwrap_or(false);
        if !pending {
            return Err(SessionError::NotInConflict(label.key()));
        }
        let gid = f.group_of(&label).ok_or_else(|| EncodeError::UnknownLabel(label.key()))?;
        Ok(f.label(gid).clone())
    }

    fn solution_outcome(&self) -> Outcome {
        match &self.last_solution {
            Some(s) => Outcome {
                objective: s.objective,
                unallocated: s.unallocated.clone(),
                conflict: Vec::new(),
                recomputed: false,
            },
            None => Outcome::default(),
        }
    }

    fn conflict_outcome(&self, recomputed: bool) -> Outcome {
        let conflict = self
            .last_conflict
            .as_ref()
            .map(|c| c.explanation.labels.iter().map(|d| d.key.clone()).collect())
            .unwrap_or_default();
        Outcome { objective: None, unallocated: Vec::new(), conflict, recomputed }
    }
}

fn strip_stats(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("stats");
            map.values_mut().for_each(strip_stats);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_stats),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::independent_pigeonholes;
    use crate::model::fixtures::*;
    use crate::model::Activity;
    use crate::oracle::Oracle;

    fn start(inst: Instance) -> Session {
        Session::start(inst, SessionConfig::default()).unwrap()
    }

    fn objective(s: &Session) -> Option<usize> {
        s.last_solution.as_ref().and_then(|x| x.objective)
    }

    fn assert_gantt_sound(s: &mut Session) -> GanttData {
        let g = s.gantt_view().unwrap();
        let problems = check_gantt(&g, &s.instance, s.config.encode.strict_touch);
        assert!(problems.is_empty(), "{problems:?}");
        g
    }

    #[test]
    fn start_modes() {
        let s = start(tiny1());
        assert_eq!(s.mode, Mode::Feasible);
        assert_eq!(objective(&s), Some(2));
        assert_eq!(start(tiny2()).mode, Mode::Infeasible);
        let empty = start(Instance::fully_compatible(vec![], vec![]));
        assert_eq!((empty.mode, objective(&empty)), (Mode::Feasible, Some(0)));
    }

    #[test]
    fn start_rejects_invalid_input() {
        let mut inst = tiny1();
        inst.activities[0].end = -1;
        assert!(matches!(Session::start(inst, SessionConfig::default()), Err(SessionError::Invalid(_))));
        let cfg = SessionConfig { timeout_secs: 0.0, ..SessionConfig::default() };
        assert!(matches!(Session::start(tiny1(), cfg), Err(SessionError::Config(_))));
    }

    #[test]
    fn overrides() {
        let mut s = start(tiny1());
        s.apply_override("a3", "t1", OverrideMode::Force).unwrap();
        assert_eq!((s.mode, objective(&s)), (Mode::Feasible, Some(2)));
        assert_eq!(s.last_solution.as_ref().unwrap().allocation["a3"], "t1");

        let mut s = start(tiny1());
        s.apply_override("a1", "t1", OverrideMode::Forbid).unwrap();
        assert_eq!(s.mode, Mode::Feasible);
        assert_eq!(s.last_solution.as_ref().unwrap().allocation["a1"], "t2");

        let mut s = start(tiny1());
        s.apply_override("a1", "t1", OverrideMode::Force).unwrap();
        s.apply_override("a2", "t1", OverrideMode::Force).unwrap();
        assert_eq!(s.mode, Mode::Infeasible);
        assert!(s.soft_overrides);
        let mus = s.begin_local_resolution().unwrap();
        let keys: Vec<&str> = mus.explanation.labels.iter().map(|d| d.key.as_str()).collect();
        assert!(keys.iter().any(|k| k.starts_with("Override")), "{keys:?}");
    }

    #[test]
    fn incompatible_force_rejected_untouched() {
        let mut inst = tiny1();
        inst.set_compatible(0, 1, false);
        let mut s = start(inst);
        let before = s.clone();
        let err = s.apply_override("a1", "t2", OverrideMode::Force).unwrap_err();
        assert!(matches!(err, SessionError::IncompatibleForce { .. }));
        assert_eq!(s, before);
        assert!(matches!(s.apply_override("zz", "t2", OverrideMode::Force), Err(SessionError::UnknownActivity(_))));
    }

    #[test]
    fn wrong_mode_leaves_state() {
        let mut s = start(tiny1());
        let before = s.clone();
        assert!(matches!(s.begin_local_resolution(), Err(SessionError::WrongMode { .. })));
        assert!(matches!(s.begin_global_resolution(), Err(SessionError::WrongMode { .. })));
        assert!(matches!(s.tune_priorities(BTreeMap::new()), Err(SessionError::WrongMode { .. })));
        assert_eq!(s, before);
    }

    #[test]
    fn local_resolution_tiny2() {
        let mut s = start(tiny2());
        let g = assert_gantt_sound(&mut s);
        assert_eq!(g.unset().len(), 1);
        let mus = s.begin_local_resolution().unwrap().clone();
        assert_eq!(mus.explanation.labels.len(), 3);
        s.resolve_local(&ConstraintLabel::task("a3")).unwrap();
        assert_eq!(s.mode, Mode::Feasible);
        let g = assert_gantt_sound(&mut s);
        assert_eq!(g.unset().iter().map(|e| e.activity.as_str()).collect::<Vec<_>>(), ["a3"]);
        assert!(matches!(s.resolve_local(&ConstraintLabel::task("a3")), Err(SessionError::WrongMode { .. })));
    }

    #[test]
    fn local_resolution_two_conflicts() {
        let mut s = start(independent_pigeonholes(2, 2));
        let first = s.begin_local_resolution().unwrap().explanation.label_set();
        assert_eq!(first.len(), 3);
        s.resolve_local(&first[0]).unwrap();
        assert_eq!(s.mode, Mode::LocalResolution);
        let second = s.last_conflict.as_ref().unwrap().explanation.label_set();
        assert!(second.iter().all(|l| !first.contains(l)));
        assert!(matches!(s.resolve_local(&first[0]), Err(SessionError::AlreadyRelaxed(_))));
        assert!(matches!(s.resolve_local(&first[1]), Err(SessionError::NotInConflict(_))));
        s.resolve_local(&second[0]).unwrap();
        assert_eq!(s.mode, Mode::Feasible);
        assert_eq!(s.history.iter().filter(|h| matches!(h.event, Event::ResolveLocal { .. })).count(), 2);
    }

    #[test]
    fn global_resolution() {
        let mut s = start(tiny2());
        let mcs = s.begin_global_resolution().unwrap().explanation.label_set();
        assert_eq!(mcs.len(), 1);
        s.accept_corrections(&mcs).unwrap();
        assert_eq!(s.mode, Mode::Feasible);

        let mut s = start(copies(5, 2));
        let mcs = s.begin_global_resolution().unwrap().explanation.label_set();
        assert_eq!(mcs.len(), 3);
        let len = s.history.len();
        s.accept_corrections(&[]).unwrap();
        assert_eq!(s.history.len(), len + 1);
        assert_eq!(s.last_conflict.as_ref().unwrap().explanation.label_set(), mcs);
        s.accept_corrections(&mcs[..1]).unwrap();
        assert_eq!(s.mode, Mode::GlobalResolution);
        assert!(s.history.last().unwrap().outcome.recomputed);
        let next = s.last_conflict.as_ref().unwrap().explanation.label_set();
        assert_eq!(next.len(), 2);
        assert!(matches!(s.accept_corrections(&mcs[..1]), Err(SessionError::AlreadyRelaxed(_))));
        s.accept_corrections(&next).unwrap();
        assert_eq!(s.mode, Mode::Feasible);
        assert_gantt_sound(&mut s);
    }

    #[test]
    fn priority_tuning() {
        let mut s = start(tiny2());
        let r = s.tune_priorities(BTreeMap::new()).unwrap().clone();
        assert_eq!((r.allocation.len(), r.unallocated.len()), (2, 1));
        let unset = r.unallocated[0].clone();
        let r2 = s.tune_priorities([(unset.clone(), 10)].into()).unwrap().clone();
        assert!(r2.allocation.contains_key(&unset));
        assert_eq!(r2.unallocated.len(), 1);

        let f = s.formula().unwrap();
        let o = Oracle::new(&s.instance, &s.effective_encode_config(), &[]).unwrap();
        let weights: Vec<u64> = f.var_map.activities.iter().map(|a| s.priorities.get(a)).collect();
        assert_eq!(o.max_weight(&weights).0, r2.allocated_weight);

        let before = s.clone();
        assert!(matches!(s.tune_priorities([("a1".into(), 0)].into()), Err(SessionError::Optimize(_))));
        assert_eq!(s, before);

        assert_gantt_sound(&mut s);
        s.accept_relaxed_solution().unwrap();
        assert_eq!(s.mode, Mode::Feasible);
        let g = assert_gantt_sound(&mut s);
        assert_eq!(g.unset().len(), 1);
    }

    #[test]
    fn gantt_rows() {
        let mut s = start(tiny1());
        let g = assert_gantt_sound(&mut s);
        assert_eq!(g.rows.len(), 3);
        assert!(g.rows[0].team.is_none() && g.rows[0].entries.is_empty());
        let mut empty = start(Instance::fully_compatible(vec![], vec![]));
        let g = empty.gantt_view().unwrap();
        assert!(g.rows.iter().all(|r| r.entries.is_empty()));
    }

    #[test]
    fn checker_catches_overlap() {
        let inst = tiny1();
        let alloc: BTreeMap<String, String> =
            [("a1", "t1"), ("a2", "t1"), ("a3", "t2")].iter().map(|(a, t)| (a.to_string(), t.to_string())).collect();
        let g = GanttData::build(&inst, &alloc, vec![]);
        assert_eq!(check_gantt(&g, &inst, false).len(), 1);
        let mut g2 = g.clone();
        g2.rows[0].entries.push(GanttEntry { activity: "a3".into(), start: 20, end: 30 });
        assert!(check_gantt(&g2, &inst, false).iter().any(|p| p.contains("a3 appears 2")));
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = start(copies(5, 2));
        let mcs = s.begin_global_resolution().unwrap().explanation.label_set();
        s.accept_corrections(&mcs[..1]).unwrap();
        let rest = s.last_conflict.as_ref().unwrap().explanation.label_set();
        s.accept_corrections(&rest).unwrap();
        s.apply_override("a1", "t2", OverrideMode::Force).unwrap();
        let again = Session::replay(s.instance.clone(), s.config.clone(), &s.events()).unwrap();
        assert_eq!(again.canonical(), s.canonical());

        let json = serde_json::to_string(&s).unwrap();
        let back: Session = serde_json::from_str(&json).unwrap();
        assert_eq!(back.canonical(), s.canonical());
    }

    #[test]
    fn solve_restarts_episode() {
        let mut inst = tiny2();
        inst.activities.push(Activity::new("a4", 40, 50));
        inst.compat.extend([true, true]);
        let mut s = start(inst);
        s.begin_local_resolution().unwrap();
        s.solve().unwrap();
        assert_eq!(s.mode, Mode::Infeasible);
        assert!(s.last_conflict.is_none());
        s.begin_global_resolution().unwrap();
        assert_eq!(s.mode, Mode::GlobalResolution);
    }
}
