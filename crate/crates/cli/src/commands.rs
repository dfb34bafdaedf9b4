//! Non-interactive commands. Each returns an exit code and the document to
//! write; the binary only handles files and streams.

use crewplan_core::encode::{encode, ConstraintKind, EncodeError};
use crewplan_core::explain::{describe_conflict, find_mcs, find_mus, ExplainError, ExplainOptions, ExplanationKind};
use crewplan_core::generate::{generate_instance, GenConfig, GenError};
use crewplan_core::harness::{run_explain_benchmark, run_opt_benchmark, BenchError, ExplainBenchConfig, OptBenchConfig};
use crewplan_core::io::{instance_to_json, parse_instance, ExplanationFile, IoError, SolutionFile, SolutionStatus};
use crewplan_core::optimize::{
    maximize_weighted_allocation, minimize_used_teams_with, Minimized, OptimizeError, OptimizeOptions,
    PriorityWeights,
};
use crewplan_core::sat::{Budget, SolverConfig};
use crewplan_core::session::{SessionConfig, SessionError};
use serde::Serialize;
use thiserror::Error;

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNPROVEN: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INVALID: i32 = 4;
pub const EXIT_SATISFIABLE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] IoError),
    #[error(transparent)]
    Config(#[from] SessionError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Config(_) | CliError::Encode(_) | CliError::Generate(_) => EXIT_INVALID,
            CliError::Optimize(OptimizeError::TaskAllocationHard | OptimizeError::NonPositiveWeight(_)) => EXIT_INVALID,
            CliError::Optimize(OptimizeError::HardConflict(_)) => EXIT_INFEASIBLE,
            CliError::Optimize(OptimizeError::BudgetExhausted) => EXIT_UNPROVEN,
            CliError::Explain(ExplainError::InputSatisfiable) => EXIT_SATISFIABLE,
            CliError::Explain(ExplainError::HardCoreConflict) => EXIT_INFEASIBLE,
            CliError::Explain(ExplainError::BudgetExceeded) => EXIT_UNPROVEN,
            _ => EXIT_FAILURE,
        }
    }
}

/// Result of a command: exit code plus the JSON (or text) document.
#[derive(Debug)]
pub struct Report {
    pub code: i32,
    pub document: String,
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn solver(cfg: &SessionConfig) -> SolverConfig {
    SolverConfig { seed: cfg.seed, ..SolverConfig::default() }
}

fn budget(cfg: &SessionConfig) -> Budget {
    Budget::from_secs_f64(cfg.timeout_secs)
}

pub fn solve(instance_json: &str, cfg: &SessionConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let inst = parse_instance(instance_json)?;
    let f = encode(&inst, &cfg.encode)?;
    let assumptions = f.relax([])?;
    let options = OptimizeOptions { solver: solver(cfg), ..OptimizeOptions::default() };
    let res = minimize_used_teams_with(&f, &assumptions, budget(cfg), &options)?;
    let (code, file) = match &res {
        Minimized::Solved(s) | Minimized::Timeout { incumbent: Some(s), .. } => {
            let code = if s.proven_optimal { EXIT_OPTIMAL } else { EXIT_UNPROVEN };
            (code, SolutionFile::optimal(s, &[]))
        }
        Minimized::Timeout { incumbent: None, stats } => {
            (EXIT_UNPROVEN, SolutionFile::without_outcome(SolutionStatus::Unknown, stats))
        }
        Minimized::Infeasible { stats, .. } => {
            (EXIT_INFEASIBLE, SolutionFile::without_outcome(SolutionStatus::Infeasible, stats))
        }
    };
    Ok(Report { code, document: pretty(&file) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExplainMode {
    Mus,
    Mcs,
    Relax,
}

pub fn explain(instance_json: &str, mode: ExplainMode, cfg: &SessionConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let inst = parse_instance(instance_json)?;
    let f = encode(&inst, &cfg.encode)?;
    let options = ExplainOptions { solver: solver(cfg), ..ExplainOptions::default() };
    let soft = f.soft_labels();
    let (kind, name, labels, minimal, stats) = match mode {
        ExplainMode::Mus => {
            let m = find_mus(&f, &soft, budget(cfg), &options)?;
            (ExplanationKind::Mus, "mus", m.labels, m.minimal, m.stats)
        }
        ExplainMode::Mcs => {
            let m = find_mcs(&f, &soft, budget(cfg), &options)?;
            if m.labels.is_empty() {
                return Err(ExplainError::InputSatisfiable.into());
            }
            (ExplanationKind::Mcs, "mcs", m.labels, m.minimal, m.stats)
        }
        ExplainMode::Relax => {
            let opts = OptimizeOptions { solver: solver(cfg), ..OptimizeOptions::default() };
            let r = maximize_weighted_allocation(&f, &PriorityWeights::default(), &[], budget(cfg), &opts)?;
            let code = if r.proven_optimal { EXIT_OPTIMAL } else { EXIT_UNPROVEN };
            return Ok(Report { code, document: pretty(&SolutionFile::relaxed(&r)) });
        }
    };
    if labels.is_empty() {
        return Err(ExplainError::HardCoreConflict.into());
    }
    let expl = describe_conflict(kind, &labels, &f, &inst)?;
    let code = if minimal { EXIT_OPTIMAL } else { EXIT_UNPROVEN };
    Ok(Report { code, document: pretty(&ExplanationFile::new(name, minimal, &expl, stats)) })
}

/// Parses a comma-separated list of constraint kinds.
pub fn parse_kinds(list: &str) -> Result<Vec<ConstraintKind>, EncodeError> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

pub fn generate(cfg: &GenConfig) -> Result<Report, CliError> {
    let inst = generate_instance(cfg)?;
    let mut document = instance_to_json(&inst);
    document.push('\n');
    Ok(Report { code: EXIT_OPTIMAL, document })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchKind {
    Opt,
    Explain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchFormat {
    Table,
    Csv,
    Json,
}

/// Runs the benchmark once; returns the report in `format` and as CSV.
pub fn bench_opt(cfg: &OptBenchConfig, format: BenchFormat) -> Result<(Report, String), CliError> {
    let rep = run_opt_benchmark(cfg)?;
    let document = match format {
        BenchFormat::Table => rep.to_table(),
        BenchFormat::Csv => rep.to_csv(),
        BenchFormat::Json => pretty(&rep),
    };
    Ok((Report { code: EXIT_OPTIMAL, document }, rep.to_csv()))
}

/// Runs the benchmark once; returns the report in `format` and as CSV.
pub fn bench_explain(cfg: &ExplainBenchConfig, format: BenchFormat) -> Result<(Report, String), CliError> {
    let rep = run_explain_benchmark(cfg)?;
    let document = match format {
        BenchFormat::Table => rep.to_table(),
        BenchFormat::Csv => rep.to_csv(),
        BenchFormat::Json => pretty(&rep),
    };
    Ok((Report { code: EXIT_OPTIMAL, document }, rep.to_csv()))
}

#[derive(Serialize)]
struct GroupSummary {
    key: String,
    soft: bool,
    clauses: usize,
    cardinality: usize,
    text: String,
}

#[derive(Serialize)]
struct FormulaSummary {
    variables: usize,
    clauses: usize,
    cardinality: usize,
    groups: Vec<GroupSummary>,
}

/// The encoded formula, as DIMACS or as a JSON summary of its labeled groups.
pub fn dump(instance_json: &str, cfg: &SessionConfig, dimacs: bool) -> Result<Report, CliError> {
    cfg.validate()?;
    let inst = parse_instance(instance_json)?;
    let f = encode(&inst, &cfg.encode)?;
    let document = if dimacs {
        f.to_dimacs()
    } else {
        pretty(&FormulaSummary {
            variables: f.var_count,
            clauses: f.clauses.len(),
            cardinality: f.cardinality.len(),
            groups: f
                .groups
                .iter()
                .map(|g| GroupSummary {
                    key: g.label.key(),
                    soft: g.is_soft(),
                    clauses: g.clauses.len(),
                    cardinality: g.cardinality.len(),
                    text: g.label.text.clone(),
                })
                .collect(),
        })
    };
    Ok(Report { code: EXIT_OPTIMAL, document })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY1: &str = r#"{"horizon_hours":1,"activities":[{"id":"a1","start":0,"end":10},{"id":"a2","start":5,"end":15},{"id":"a3","start":20,"end":30}],"teams":[{"id":"t1"},{"id":"t2"}]}"#;

    #[test]
    fn kinds_list() {
        assert_eq!(
            parse_kinds("TaskAllocated, compatibility").unwrap(),
            [ConstraintKind::TaskAllocated, ConstraintKind::Compatibility]
        );
        assert!(parse_kinds("Nope").is_err());
    }

    #[test]
    fn solve_tiny1() {
        let r = solve(TINY1, &SessionConfig::default()).unwrap();
        assert_eq!(r.code, EXIT_OPTIMAL);
        let file: SolutionFile = serde_json::from_str(&r.document).unwrap();
        assert_eq!(file.objective, Some(2));
    }

    #[test]
    fn dump_formats() {
        let r = dump(TINY1, &SessionConfig::default(), true).unwrap();
        assert!(r.document.starts_with("c ") || r.document.starts_with("p cnf"));
        let r = dump(TINY1, &SessionConfig::default(), false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.document).unwrap();
        assert!(v["groups"].as_array().unwrap().iter().any(|g| g["key"] == "TaskAllocated(a1)"));
    }
}
