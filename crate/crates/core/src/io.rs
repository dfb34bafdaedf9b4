//! JSON documents exchanged with the outside: instance files, solution files
//! and explanation reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::ConstraintLabel;
use crate::explain::{ConflictExplanation, ExplainStats, Involved, LabelDescription};
use crate::model::{validate_instance, Activity, Instance, Team, ValidationReport};
use crate::optimize::{OptimalSolution, RelaxedSolution};
use crate::sat::SolveStats;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("compat lists unknown activity {0}")]
    UnknownCompatActivity(String),
    #[error("compat for {activity} lists unknown team {team}")]
    UnknownCompatTeam { activity: String, team: String },
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
}

/// On-disk instance. `compat` is an allow-list per activity; an activity
/// without an entry may be performed by every team.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub horizon_hours: u32,
    pub activities: Vec<Activity>,
    pub teams: Vec<Team>,
    #[serde(default)]
    pub compat: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub same_pairs: Vec<(String, String)>,
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> Self {
        InstanceFile::from(&inst)
    }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let compat = (0..inst.activities.len())
            .map(|a| {
                let teams = inst.compatible_teams(a).map(|w| inst.teams[w].id.clone()).collect();
                (inst.activities[a].id.clone(), teams)
            })
            .collect();
        InstanceFile {
            horizon_hours: inst.horizon_hours,
            activities: inst.activities.clone(),
            teams: inst.teams.clone(),
            compat,
            same_pairs: inst.same_pairs.clone(),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = IoError;

    fn try_from(file: InstanceFile) -> Result<Self, IoError> {
        let n_team = file.teams.len();
        let team_pos: BTreeMap<&str, usize> = file.teams.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
        let act_pos: BTreeMap<&str, usize> =
            file.activities.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let mut compat = vec![true; file.activities.len() * n_team];
        for (act, teams) in &file.compat {
            let &a = act_pos.get(act.as_str()).ok_or_else(|| IoError::UnknownCompatActivity(act.clone()))?;
            let row = &mut compat[a * n_team..(a + 1) * n_team];
            row.fill(false);
            for t in teams {
                let &w = team_pos
                    .get(t.as_str())
                    .ok_or_else(|| IoError::UnknownCompatTeam { activity: act.clone(), team: t.clone() })?;
                row[w] = true;
            }
        }
        let inst = Instance {
            activities: file.activities,
            teams: file.teams,
            compat,
            same_pairs: file.same_pairs,
            horizon_hours: file.horizon_hours,
        };
        validate_instance(&inst).into_result().map_err(IoError::Invalid)?;
        Ok(inst)
    }
}

pub fn parse_instance(json: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(json)?;
    Instance::try_from(file)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from(inst)).expect("instance serializes")
}

/// Result of a solve or relaxation, as written by the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub status: SolutionStatus,
    pub objective: Option<usize>,
    pub allocation: BTreeMap<String, String>,
    pub unallocated: Vec<String>,
    pub proven_optimal: bool,
    pub relaxed_labels: Vec<String>,
    /// Timing and search counters; excluded from determinism comparisons.
    pub stats: RunStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub solver_calls: usize,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub wall_time: f64,
}

impl RunStats {
    pub fn from_solves(stats: &[SolveStats]) -> Self {
        let mut total = SolveStats::default();
        for s in stats {
            total.accumulate(s);
        }
        RunStats {
            solver_calls: stats.len(),
            conflicts: total.conflicts,
            decisions: total.decisions,
            propagations: total.propagations,
            wall_time: total.wall_time.as_secs_f64(),
        }
    }
}

impl SolutionFile {
    pub fn optimal(sol: &OptimalSolution, relaxed: &[ConstraintLabel]) -> Self {
        SolutionFile {
            status: if sol.proven_optimal { SolutionStatus::Optimal } else { SolutionStatus::Feasible },
            objective: Some(sol.objective),
            allocation: sol.allocation.clone(),
            unallocated: sol.unallocated.clone(),
            proven_optimal: sol.proven_optimal,
            relaxed_labels: relaxed.iter().map(|l| l.key()).collect(),
            stats: RunStats::from_solves(&sol.stats),
        }
    }

    pub fn relaxed(sol: &RelaxedSolution) -> Self {
        let used: BTreeSet<&String> = sol.allocation.values().collect();
        SolutionFile {
            status: SolutionStatus::Feasible,
            objective: Some(used.len()),
            allocation: sol.allocation.clone(),
            unallocated: sol.unallocated.clone(),
            proven_optimal: sol.proven_optimal,
            relaxed_labels: sol.unallocated.iter().map(|a| ConstraintLabel::task(a).key()).collect(),
            stats: RunStats::from_solves(&sol.stats),
        }
    }

    pub fn without_outcome(status: SolutionStatus, stats: &[SolveStats]) -> Self {
        SolutionFile {
            status,
            objective: None,
            allocation: BTreeMap::new(),
            unallocated: Vec::new(),
            proven_optimal: false,
            relaxed_labels: Vec::new(),
            stats: RunStats::from_solves(stats),
        }
    }

    /// Copy with the stats block zeroed, for comparisons.
    pub fn without_stats(&self) -> Self {
        SolutionFile { stats: RunStats::default(), ..self.clone() }
    }
}

/// Explanation report written by `explain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationFile {
    pub mode: String,
    pub minimal: bool,
    pub labels: Vec<LabelDescription>,
    pub involved: Involved,
    pub stats: ExplainStats,
}

impl ExplanationFile {
    pub fn new(mode: &str, minimal: bool, expl: &ConflictExplanation, stats: ExplainStats) -> Self {
        ExplanationFile { mode: mode.to_string(), minimal, labels: expl.labels.clone(), involved: expl.involved.clone(), stats }
    }
}
