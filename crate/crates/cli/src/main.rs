//! `fts`: solve, validate and benchmark factored transition system problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use fts_core::domains::bench::{BenchmarkSpec, Experiment};
use fts_core::domains::{scenes, ProblemSpec};
use fts_core::error::FtsError;
use fts_core::io::{load_problem, parse_plan, problem_json, RunReport};
use fts_core::model::{validate_plan, Stage};
use fts_core::planners::{solve, Algorithm, FocusedMode, Outcome, PlannerConfig};
use fts_core::search::SearchConfig;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_INVALID_PLAN: u8 = 4;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] FtsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Parser)]
#[command(
    name = "fts",
    version,
    about = "Sampling-based planning for factored transition systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchArg {
    Bfs,
    Hff,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Literal,
    Trace,
    Dag,
}

#[derive(clap::Args)]
struct PlannerArgs {
    #[arg(long, value_enum, default_value = "focused")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "hff")]
    search: SearchArg,
    /// Weight on the placeholder cost for `--search hff`.
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, env = "FTS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long = "timeout-s", default_value_t = 60.0)]
    timeout_s: f64,
    /// Placeholder handling of the focused planner.
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Ground transitions without derived variables.
    #[arg(long)]
    no_axioms: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum AlgoArg {
    Incremental,
    Focused,
}

impl AlgoArg {
    fn algorithm(self) -> Algorithm {
        match self {
            AlgoArg::Incremental => Algorithm::Incremental,
            AlgoArg::Focused => Algorithm::Focused,
        }
    }

    fn name(self) -> &'static str {
        match self {
            AlgoArg::Incremental => "incremental",
            AlgoArg::Focused => "focused",
        }
    }
}

impl PlannerArgs {
    fn config(&self, algo: AlgoArg, seed: u64, trace: bool) -> PlannerConfig {
        PlannerConfig {
            algorithm: algo.algorithm(),
            search: match self.search {
                SearchArg::Bfs => SearchConfig::Bfs,
                SearchArg::Hff => SearchConfig::Hff {
                    weight: self.weight,
                },
            },
            seed,
            timeout_s: Some(self.timeout_s),
            axioms: !self.no_axioms,
            focused_mode: match self.mode {
                ModeArg::Auto => FocusedMode::Auto,
                ModeArg::Literal => FocusedMode::Literal,
                ModeArg::Trace => FocusedMode::Trace,
                ModeArg::Dag => FocusedMode::Dag,
            },
            trace,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print the run report.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Print per-iteration progress to standard error.
        #[arg(long)]
        trace: bool,
    },
    /// Check a plan (or a run report) against a problem file.
    Validate { problem: PathBuf, plan: PathBuf },
    /// Run generated benchmark problems and print a results table.
    Bench {
        /// tabletop-grid, distractors or clear-table.
        #[arg(long)]
        experiment: Experiment,
        /// Comma-separated problem sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, value_delimiter = ',', default_value = "incremental,focused")]
        algos: Vec<AlgoArg>,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Print a built-in problem file, or list them.
    Example { name: Option<String> },
}

/// Print a line, treating a closed stdout (`fts ... | head`) as done.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_solve(problem: &Path, planner: &PlannerArgs, trace: bool) -> Result<u8, CliError> {
    let bundle = load_problem(problem)?.build()?;
    let config = planner.config(planner.algo, planner.seed, trace);
    let result = solve(&bundle, &config)?;
    for line in &result.trace {
        eprintln!("{line}");
    }
    emit(&RunReport::new(&result, &config).to_json());
    Ok(match result.outcome {
        Outcome::Solved => 0,
        Outcome::Infeasible => EXIT_INFEASIBLE,
        Outcome::Timeout => EXIT_TIMEOUT,
    })
}

fn cmd_validate(problem: &Path, plan: &Path) -> Result<u8, CliError> {
    let bundle = load_problem(problem)?.build()?;
    let plan = parse_plan(&read(plan)?)?;
    match validate_plan(&bundle.problem, &plan)? {
        None => {
            emit(&format!("valid: {} steps", plan.len()));
            Ok(0)
        }
        Some(v) => {
            let at = match v.stage {
                Stage::Initial => "initial state".to_string(),
                Stage::Step(i) => format!("step {i}"),
                Stage::Goal => "goal".to_string(),
            };
            emit(&format!(
                "invalid: {at}, clause {}, constraint {}",
                v.clause, v.constraint
            ));
            Ok(EXIT_INVALID_PLAN)
        }
    }
}

#[derive(Serialize)]
struct BenchRow {
    experiment: &'static str,
    size: usize,
    trial: u64,
    algo: &'static str,
    outcome: &'static str,
    seconds: String,
    sampler_calls: usize,
}

fn cmd_bench(
    experiment: Experiment,
    sizes: &[usize],
    trials: u64,
    algos: &[AlgoArg],
    planner: &PlannerArgs,
) -> Result<u8, CliError> {
    for &size in sizes {
        if !experiment.sizes().contains(&size) {
            return Err(CliError::Usage(format!(
                "size {size} outside {:?} for {}",
                experiment.sizes(),
                experiment.name()
            )));
        }
    }
    let jobs: Vec<(usize, u64, AlgoArg)> = sizes
        .iter()
        .flat_map(|&s| (0..trials).flat_map(move |t| algos.iter().map(move |&a| (s, t, a))))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(size, trial, algo)| -> Result<_, CliError> {
            // each trial is its own problem instance and planner seed
            let seed = planner.seed.wrapping_add(trial);
            let spec = ProblemSpec::Benchmark(BenchmarkSpec {
                experiment,
                size,
                seed,
            });
            let bundle = spec.build()?;
            let start = Instant::now();
            let result = solve(&bundle, &planner.config(algo, seed, false))?;
            Ok((
                (size, trial, algo),
                BenchRow {
                    experiment: experiment.name(),
                    size,
                    trial,
                    algo: algo.name(),
                    outcome: match result.outcome {
                        Outcome::Solved => "solved",
                        Outcome::Infeasible => "infeasible",
                        Outcome::Timeout => "timeout",
                    },
                    seconds: format!("{:.3}", start.elapsed().as_secs_f64()),
                    sampler_calls: result.stats.total_sampler_calls(),
                },
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|(k, _)| *k);
    let mut out = csv::Writer::from_writer(std::io::stdout());
    for (_, row) in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })?;
    Ok(0)
}

fn cmd_example(name: Option<&str>) -> Result<u8, CliError> {
    match name {
        None => {
            for n in scenes::NAMES {
                emit(n);
            }
        }
        Some(n) => {
            let spec =
                scenes::named(n).ok_or_else(|| CliError::Usage(format!("no example named {n}")))?;
            emit(&problem_json(&spec));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve {
            problem,
            planner,
            trace,
        } => cmd_solve(problem, planner, *trace),
        Command::Validate { problem, plan } => cmd_validate(problem, plan),
        Command::Bench {
            experiment,
            sizes,
            trials,
            algos,
            planner,
        } => cmd_bench(*experiment, sizes, *trials, algos, planner),
        Command::Example { name } => cmd_example(name.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
