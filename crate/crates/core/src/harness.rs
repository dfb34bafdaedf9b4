//! Benchmark harnesses: optimisation time per horizon length and encoding
//! toggle, and MUS time and size on overloaded instances.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{encode, EncodeConfig, EncodeError};
use crate::explain::{find_mus, ExplainError, ExplainOptions};
use crate::generate::{generate_instance, GenConfig, GenError, Injection};
use crate::optimize::{minimize_used_teams_with, Minimized, OptimizeError, OptimizeOptions};
use crate::sat::{Budget, DEFAULT_TIMEOUT};
use crate::session::{Mode, Session, SessionConfig, SessionError};

pub const DEFAULT_LENGTHS: [u32; 3] = [6, 8, 24];

/// Activity count used for a horizon length: 12.5 per hour, so 75, 100 and
/// 300 for 6, 8 and 24 hours.
pub fn activities_for(hours: u32) -> usize {
    (hours as usize * 25).div_ceil(2)
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("generated instance {seed} at {hours} h should be infeasible")]
    NotInfeasible { hours: u32, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptBenchConfig {
    pub lengths: Vec<u32>,
    pub repetitions: usize,
    pub timeout_secs: f64,
    pub n_teams: usize,
    pub compat_density: f64,
    pub seed: u64,
}

impl Default for OptBenchConfig {
    fn default() -> Self {
        OptBenchConfig {
            lengths: DEFAULT_LENGTHS.to_vec(),
            repetitions: 20,
            timeout_secs: DEFAULT_TIMEOUT.as_secs_f64(),
            n_teams: 20,
            compat_density: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptRow {
    pub horizon_hours: u32,
    pub clique: bool,
    pub symmetry: bool,
    pub n_activities: usize,
    pub runs: usize,
    /// Mean seconds spent building the formula.
    pub t_init: f64,
    /// Mean seconds spent optimising; unproven runs count the full timeout.
    pub t_solve: f64,
    pub t_total: f64,
    pub frac_optimal: f64,
    pub mean_objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub rows: Vec<OptRow>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Solve time reported for one run: a run without an optimality proof is
/// charged the full timeout.
pub fn charged_time(proven: bool, elapsed: f64, timeout: f64) -> f64 {
    if proven {
        elapsed
    } else {
        timeout
    }
}

pub fn run_opt_benchmark(cfg: &OptBenchConfig) -> Result<OptReport, BenchError> {
    let timeout = Duration::from_secs_f64(cfg.timeout_secs);
    let mut rows = Vec::new();
    for &hours in &cfg.lengths {
        let n_activities = activities_for(hours);
        let instances = (0..cfg.repetitions)
            .map(|r| {
                generate_instance(&GenConfig {
                    horizon_hours: hours,
                    n_teams: cfg.n_teams,
                    n_activities,
                    compat_density: cfg.compat_density,
                    seed: cfg.seed + r as u64,
                    ..GenConfig::default()
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for clique in [true, false] {
            for symmetry in [true, false] {
                let enc = EncodeConfig { clique, symmetry, ..EncodeConfig::default() };
                let (mut init, mut solve, mut objective) = (Vec::new(), Vec::new(), Vec::new());
                let mut optimal = 0usize;
                for inst in &instances {
                    let t0 = Instant::now();
                    let f = encode(inst, &enc)?;
                    let assumptions = f.relax([])?;
                    init.push(t0.elapsed().as_secs_f64());
                    let t1 = Instant::now();
                    let res = minimize_used_teams_with(&f, &assumptions, Budget::new(timeout), &OptimizeOptions::default())?;
                    let proven = matches!(&res, Minimized::Solved(s) if s.proven_optimal);
                    optimal += proven as usize;
                    solve.push(charged_time(proven, t1.elapsed().as_secs_f64(), cfg.timeout_secs));
                    if let Some(s) = res.solution() {
                        objective.push(s.objective as f64);
                    }
                }
                let (t_init, t_solve) = (mean(&init), mean(&solve));
                rows.push(OptRow {
                    horizon_hours: hours,
                    clique,
                    symmetry,
                    n_activities,
                    runs: instances.len(),
                    t_init,
                    t_solve,
                    t_total: t_init + t_solve,
                    frac_optimal: if instances.is_empty() { 0.0 } else { optimal as f64 / instances.len() as f64 },
                    mean_objective: mean(&objective),
                });
            }
        }
    }
    Ok(OptReport { rows })
}

impl OptReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon_hours,clique,symmetry,n_activities,runs,t_init,t_solve,t_total,frac_optimal,mean_objective\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{:.4},{:.3},{:.2}",
                r.horizon_hours, r.clique, r.symmetry, r.n_activities, r.runs, r.t_init, r.t_solve, r.t_total,
                r.frac_optimal, r.mean_objective
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>6} {:>8} {:>6} {:>5} {:>9} {:>9} {:>9} {:>8} {:>7}\n",
            "hours", "clique", "symmetry", "acts", "runs", "t_init", "t_solve", "t_total", "optimal", "obj"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>6} {:>8} {:>6} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>7.2}",
                r.horizon_hours, yes_no(r.clique), yes_no(r.symmetry), r.n_activities, r.runs, r.t_init, r.t_solve,
                r.t_total, r.frac_optimal, r.mean_objective
            );
        }
        out
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainBenchConfig {
    pub lengths: Vec<u32>,
    pub repetitions: usize,
    pub timeout_secs: f64,
    pub n_teams: usize,
    pub compat_density: f64,
    pub overload: u32,
    pub seed: u64,
    /// Also drive a session through local resolution to count resolve steps.
    pub iterations: bool,
    /// Extractions per instance; the fastest one is reported. The work is
    /// deterministic, so repeats only remove scheduling noise.
    pub timing_repeats: usize,
}

impl Default for ExplainBenchConfig {
    fn default() -> Self {
        ExplainBenchConfig {
            lengths: DEFAULT_LENGTHS.to_vec(),
            repetitions: 20,
            timeout_secs: DEFAULT_TIMEOUT.as_secs_f64(),
            n_teams: 20,
            compat_density: 0.5,
            overload: 1,
            seed: 0,
            iterations: true,
            timing_repeats: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainRow {
    pub horizon_hours: u32,
    pub n_activities: usize,
    pub runs: usize,
    /// Mean MUS extraction time in seconds.
    pub mean_time: f64,
    pub mean_size: f64,
    pub mean_calls: f64,
    pub all_minimal: bool,
    /// Mean number of local-resolution steps until the session is feasible.
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub rows: Vec<ExplainRow>,
}

pub fn run_explain_benchmark(cfg: &ExplainBenchConfig) -> Result<ExplainReport, BenchError> {
    let timeout = Duration::from_secs_f64(cfg.timeout_secs);
    let mut rows = Vec::new();
    for &hours in &cfg.lengths {
        let n_activities = activities_for(hours);
        let (mut times, mut sizes, mut calls, mut iterations) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut all_minimal = true;
        for r in 0..cfg.repetitions {
            let seed = cfg.seed + r as u64;
            let inst = generate_instance(&GenConfig {
                horizon_hours: hours,
                n_teams: cfg.n_teams,
                n_activities,
                compat_density: cfg.compat_density,
                injection: Injection::Overload(cfg.overload),
                seed,
                ..GenConfig::default()
            })?;
            let f = encode(&inst, &EncodeConfig::default())?;
            let mut fastest = f64::INFINITY;
            let mut mus = None;
            for _ in 0..cfg.timing_repeats.max(1) {
                let m = match find_mus(&f, &f.soft_labels(), Budget::new(timeout), &ExplainOptions::default()) {
                    Err(ExplainError::InputSatisfiable) => return Err(BenchError::NotInfeasible { hours, seed }),
                    other => other?,
                };
                fastest = fastest.min(m.stats.wall_time.as_secs_f64());
                mus = Some(m);
            }
            let mus = mus.expect("at least one extraction");
            times.push(fastest);
            sizes.push(mus.labels.len() as f64);
            calls.push(mus.stats.solver_calls as f64);
            all_minimal &= mus.minimal;
            if cfg.iterations {
                iterations.push(local_iterations(inst, cfg.timeout_secs)? as f64);
            }
        }
        rows.push(ExplainRow {
            horizon_hours: hours,
            n_activities,
            runs: cfg.repetitions,
            mean_time: mean(&times),
            mean_size: mean(&sizes),
            mean_calls: mean(&calls),
            all_minimal,
            mean_iterations: mean(&iterations),
        });
    }
    Ok(ExplainReport { rows })
}

/// Drives local resolution, always relaxing the first label offered.
fn local_iterations(inst: crate::model::Instance, timeout_secs: f64) -> Result<usize, SessionError> {
    let mut s = Session::start(inst, SessionConfig { timeout_secs, ..SessionConfig::default() })?;
    if s.mode != Mode::Infeasible {
        return Ok(0);
    }
    let mut label = s.begin_local_resolution()?.explanation.labels[0].label.clone();
    let mut steps = 0;
    loop {
        s.resolve_local(&label)?;
        steps += 1;
        match (&s.mode, &s.last_conflict) {
            (Mode::LocalResolution, Some(c)) => label = c.explanation.labels[0].label.clone(),
            _ => return Ok(steps),
        }
    }
}

impl ExplainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon_hours,n_activities,runs,mean_time,mean_size,mean_calls,all_minimal,mean_iterations\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.2},{:.1},{},{:.2}",
                r.horizon_hours, r.n_activities, r.runs, r.mean_time, r.mean_size, r.mean_calls, r.all_minimal,
                r.mean_iterations
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>6} {:>5} {:>10} {:>9} {:>7} {:>8} {:>6}\n",
            "hours", "acts", "runs", "mus_time", "mus_size", "calls", "minimal", "iters"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>6} {:>5} {:>10.4} {:>9.2} {:>7.1} {:>8} {:>6.2}",
                r.horizon_hours, r.n_activities, r.runs, r.mean_time, r.mean_size, r.mean_calls,
                yes_no(r.all_minimal), r.mean_iterations
            );
        }
        out
    }

    /// Largest relative spread of mean MUS size across rows.
    pub fn size_spread(&self) -> f64 {
        let sizes: Vec<f64> = self.rows.iter().map(|r| r.mean_size).collect();
        let (lo, hi) = sizes.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if sizes.is_empty() || lo <= 0.0 {
            0.0
        } else {
            (hi - lo) / lo
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opt_report_shape() {
        let cfg = OptBenchConfig { repetitions: 1, timeout_secs: 10.0, ..OptBenchConfig::default() };
        let rep = run_opt_benchmark(&OptBenchConfig { lengths: vec![6, 8], ..cfg }).unwrap();
        assert_eq!(rep.rows.len(), 2 * 4);
        for r in &rep.rows {
            assert!((0.0..=1.0).contains(&r.frac_optimal));
            assert!((r.t_total - r.t_init - r.t_solve).abs() < 1e-9);
        }
        assert_eq!(rep.to_csv().lines().count(), 9);
        assert_eq!(rep.to_table().lines().count(), 9);
    }

    #[test]
    fn unproven_runs_count_the_timeout() {
        assert_eq!(charged_time(false, 3.5, 30.0), 30.0);
        assert_eq!(charged_time(true, 3.5, 30.0), 3.5);
    }

    #[test]
    fn explain_report_shape() {
        let cfg = ExplainBenchConfig { lengths: vec![6, 8], repetitions: 2, ..ExplainBenchConfig::default() };
        let rep = run_explain_benchmark(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert!(r.mean_size >= 1.0);
            assert!(r.all_minimal);
            assert!(r.mean_iterations >= 1.0);
        }
        assert_eq!(rep.to_csv().lines().count(), 3);
    }

    #[test]
    fn activity_counts() {
        assert_eq!(DEFAULT_LENGTHS.map(activities_for), [75, 100, 300]);
    }
}
