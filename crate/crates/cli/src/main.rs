use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crewplan_cli::commands::{self, BenchFormat, BenchKind, CliError, ExplainMode, Report, EXIT_FAILURE, EXIT_INVALID};
use crewplan_cli::config::load_config;
use crewplan_cli::server::{serve, AppState};
use crewplan_core::generate::{GenConfig, Injection};
use crewplan_core::harness::{ExplainBenchConfig, OptBenchConfig, DEFAULT_LENGTHS};
use crewplan_core::session::SessionConfig;

#[derive(Parser)]
#[command(name = "crewplan", version, about = "Allocate scheduled activities to teams, explain conflicts")]
struct Cli {
    /// TOML file with solver parameters (seed, timeout_secs, [encode]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// Add redundant start-time clique constraints.
    #[arg(long, overrides_with = "no_clique")]
    clique: bool,
    #[arg(long)]
    no_clique: bool,
    /// Add lexleader symmetry breaking between equivalent teams.
    #[arg(long, overrides_with = "no_symmetry")]
    symmetry: bool,
    #[arg(long)]
    no_symmetry: bool,
    /// Budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated constraint kinds that may be relaxed.
    #[arg(long)]
    soft: Option<String>,
}

impl SolverFlags {
    fn apply(&self, mut cfg: SessionConfig) -> Result<SessionConfig, CliError> {
        if self.clique {
            cfg.encode.clique = true;
        }
        if self.no_clique {
            cfg.encode.clique = false;
        }
        if self.symmetry {
            cfg.encode.symmetry = true;
        }
        if self.no_symmetry {
            cfg.encode.symmetry = false;
        }
        if let Some(t) = self.timeout {
            cfg.timeout_secs = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(list) = &self.soft {
            cfg.encode.soft_kinds = commands::parse_kinds(list)?.into_iter().collect();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimise the number of used teams.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain an infeasible instance (MUS, MCS) or relax it to a maximum allocation.
    Explain {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "mus")]
        mode: ExplainMode,
        #[command(flatten)]
        flags: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the session HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for instance and session snapshots.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Write a seeded synthetic instance.
    Generate {
        #[arg(long, default_value_t = 24)]
        hours: u32,
        #[arg(long, default_value_t = 20)]
        teams: usize,
        #[arg(long, default_value_t = 100)]
        activities: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        same_pairs: usize,
        /// Plant K more overlapping tasks than teams able to take them.
        #[arg(long)]
        overload: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Timing reports per horizon length.
    Bench {
        #[arg(value_enum)]
        kind: BenchKind,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LENGTHS)]
        lengths: Vec<u32>,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Print the encoded formula.
    Dump {
        instance: PathBuf,
        #[arg(long)]
        dimacs: bool,
        #[command(flatten)]
        flags: SolverFlags,
    },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, &report.document).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => std::io::stdout().write_all(report.document.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn run(cli: Cli) -> Result<i32, (i32, String)> {
    let base = load_config(cli.config.as_deref()).map_err(|e| (EXIT_INVALID, e.to_string()))?;
    let cli_err = |e: CliError| (e.exit_code(), e.to_string());
    let io_err = |e: String| (EXIT_INVALID, e);
    match cli.command {
        Command::Solve { instance, flags, out } => {
            let cfg = flags.apply(base).map_err(cli_err)?;
            let text = read(&instance).map_err(io_err)?;
            let report = commands::solve(&text, &cfg).map_err(cli_err)?;
            emit(&report, out.as_deref()).map_err(|e| (EXIT_FAILURE, e))?;
            Ok(report.code)
        }
        Command::Explain { instance, mode, flags, out } => {
            let cfg = flags.apply(base).map_err(cli_err)?;
            let text = read(&instance).map_err(io_err)?;
            let report = commands::explain(&text, mode, &cfg).map_err(cli_err)?;
            emit(&report, out.as_deref()).map_err(|e| (EXIT_FAILURE, e))?;
            Ok(report.code)
        }
        Command::Serve { port, data_dir, flags } => {
            let cfg = flags.apply(base).map_err(cli_err)?;
            cfg.validate().map_err(|e| (EXIT_INVALID, e.to_string()))?;
            let state = AppState::new(cfg, data_dir).map_err(|e| (EXIT_FAILURE, e.to_string()))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| (EXIT_FAILURE, e.to_string()))?;
            rt.block_on(serve(port, state)).map_err(|e| (EXIT_FAILURE, e.to_string()))?;
            Ok(0)
        }
        Command::Generate { hours, teams, activities, density, same_pairs, overload, seed, out } => {
            let cfg = GenConfig {
                horizon_hours: hours,
                n_teams: teams,
                n_activities: activities,
                compat_density: density,
                same_pair_count: same_pairs,
                injection: overload.map_or(Injection::None, Injection::Overload),
                seed,
                ..GenConfig::default()
            };
            let report = commands::generate(&cfg).map_err(cli_err)?;
            emit(&report, out.as_deref()).map_err(|e| (EXIT_FAILURE, e))?;
            Ok(report.code)
        }
        Command::Bench { kind, lengths, repetitions, timeout, seed, csv, json } => {
            let format = if json { BenchFormat::Json } else { BenchFormat::Table };
            let (report, csv_text) = match kind {
                BenchKind::Opt => {
                    let cfg = OptBenchConfig { lengths, repetitions, timeout_secs: timeout, seed, ..OptBenchConfig::default() };
                    commands::bench_opt(&cfg, format).map_err(cli_err)?
                }
                BenchKind::Explain => {
                    let cfg =
                        ExplainBenchConfig { lengths, repetitions, timeout_secs: timeout, seed, ..ExplainBenchConfig::default() };
                    commands::bench_explain(&cfg, format).map_err(cli_err)?
                }
            };
            emit(&report, None).map_err(|e| (EXIT_FAILURE, e))?;
            if let Some(path) = csv {
                std::fs::write(&path, csv_text).map_err(|e| (EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(0)
        }
        Command::Dump { instance, dimacs, flags } => {
            let cfg = flags.apply(base).map_err(cli_err)?;
            let text = read(&instance).map_err(io_err)?;
            let report = commands::dump(&text, &cfg, dimacs).map_err(cli_err)?;
            emit(&report, None).map_err(|e| (EXIT_FAILURE, e))?;
            Ok(report.code)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("crewplan: {message}");
            code
        }
    };
    ExitCode::from(code as u8)
}
