//! Allocation of pre-scheduled activities to worker teams with a SAT-based
//! optimizer, infeasibility explanations and an interactive session layer.

pub mod card;
pub mod encode;
pub mod explain;
pub mod generate;
pub mod harness;
pub mod io;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod sat;
pub mod session;
pub mod util;

pub use encode::{
    encode, encode_with_overrides, ConstraintKind, ConstraintLabel, EncodeConfig, EncodeError, LabeledFormula,
    Override, OverrideMode,
};
pub use explain::{describe_conflict, find_mcs, find_mus, ConflictExplanation, ExplainError, ExplainOptions, Mcs, Mus};
pub use generate::{generate_instance, GenConfig, Injection};
pub use io::{instance_to_json, parse_instance, InstanceFile, SolutionFile, SolutionStatus};
pub use model::{validate_instance, Activity, Instance, Team};
pub use optimize::{
    max_allocated_tasks, maximize_weighted_allocation, minimize_used_teams, minimize_used_teams_with, Minimized,
    OptimalSolution, OptimizeError, OptimizeOptions, PriorityWeights, RelaxedSolution,
};
pub use oracle::brute_force_optimal;
pub use sat::{Budget, SolverConfig};
pub use session::{check_gantt, Event, GanttData, Mode, Session, SessionConfig, SessionError};
