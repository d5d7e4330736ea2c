//! Command-line front end of the `safem` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{run_with_observer, stagnation, CycleRecord, DriverError, Mode, RunConfig, Smoother};
use crate::estimate::MarkingConfig;
use crate::output::{read_csv, write_csv, write_rows, write_vtk};
use crate::problems::Problem;

/// Exit status for invalid flags or inconsistent settings.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for a run that failed while executing.
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "safem", version, about = "Adaptive finite elements with smoothed intermediate cycles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one adaptive computation and write its per-cycle CSV.
    Run(RunArgs),
    /// Run the full experiment matrix and a summary table.
    Suite(SuiteArgs),
    /// Residual and estimator against the number of smoothing steps on one mesh.
    Stagnation(StagnationArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Peak2d,
    Corner2d,
    Drift2d,
    Sine2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Afem,
    Safem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmootherArg {
    Richardson,
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarkingArg {
    Dorfler,
    Fraction,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "peak2d")]
    pub problem: ProblemArg,
    /// Drift strength for drift2d; the velocity is (beta, beta).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Smoother for intermediate cycles (default: richardson, gmres for drift2d).
    #[arg(long, value_enum)]
    pub smoother: Option<SmootherArg>,
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ProblemArgs,
    #[arg(long, default_value_t = 10)]
    pub cycles: usize,
    #[arg(long, value_enum, default_value = "afem")]
    pub mode: ModeArg,
    /// Smoothing steps per intermediate cycle.
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    /// Marking strategy (default: dorfler for degree 1, fraction otherwise).
    #[arg(long, value_enum)]
    pub marking: Option<MarkingArg>,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub fraction: f64,
    /// Tight-solve residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    /// Uniform refinements applied to the default initial mesh.
    #[arg(long, default_value_t = 0)]
    pub initial_refinements: usize,
    /// Write a VTK file per cycle.
    #[arg(long)]
    pub vtk: bool,
    /// Also solve intermediate cycles tightly to report J(u_h).
    #[arg(long)]
    pub diagnostic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value = "suite")]
    pub output: PathBuf,
    /// Two cycles per configuration instead of ten.
    #[arg(long)]
    pub smoke: bool,
    #[arg(long)]
    pub cycles: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StagnationArgs {
    #[command(flatten)]
    pub common: ProblemArgs,
    #[arg(long, default_value_t = 3)]
    pub cycle: usize,
    #[arg(long, default_value_t = 30)]
    pub max_steps: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> CliError {
        match e {
            DriverError::Config(m) => CliError::Usage(m),
            DriverError::Estimate(e @ crate::estimate::EstimateError::InvalidParameter(_)) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn problem_from(args: &ProblemArgs) -> Result<Problem, CliError> {
    match (args.problem, args.beta) {
        (ProblemArg::Drift2d, beta) => {
            Problem::drift(beta.unwrap_or(1.0)).map_err(|e| CliError::Usage(format!("--beta: {e}")))
        }
        (_, Some(_)) => Err(CliError::Usage("--beta only applies to --problem drift2d".into())),
        (ProblemArg::Peak2d, None) => Ok(Problem::Peak),
        (ProblemArg::Corner2d, None) => Ok(Problem::Corner),
        (ProblemArg::Sine2d, None) => Ok(Problem::Sine),
    }
}

fn smoother_from(arg: SmootherArg) -> Smoother {
    match arg {
        SmootherArg::Richardson => Smoother::Richardson,
        SmootherArg::Cg => Smoother::Cg,
        SmootherArg::Gmres => Smoother::Gmres,
    }
}

fn base_config(args: &ProblemArgs) -> Result<RunConfig, CliError> {
    let problem = problem_from(args)?;
    let mut config = RunConfig::new(problem, args.degree);
    if let Some(s) = args.smoother {
        config.smoother = smoother_from(s);
    }
    Ok(config)
}

/// Builds and validates the configuration of a `run` invocation.
pub fn run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = base_config(&args.common)?;
    config.cycles = args.cycles;
    config.mode = match args.mode {
        ModeArg::Afem => Mode::Afem,
        ModeArg::Safem => Mode::Safem,
    };
    config.smoothing_steps = args.steps;
    config.tolerance = args.tolerance;
    config.diagnostic = args.diagnostic;
    if args.initial_refinements > 0 {
        let mut mesh = config.problem.initial_mesh();
        for _ in 0..args.initial_refinements {
            mesh = mesh.refine_globally();
        }
        config.initial_mesh = Some(std::sync::Arc::new(mesh));
    }
    config.marking = match args.marking {
        Some(MarkingArg::Dorfler) => MarkingConfig::Dorfler { theta: args.theta },
        Some(MarkingArg::Fraction) => MarkingConfig::FixedFraction { fraction: args.fraction },
        None if args.common.degree <= 1 => MarkingConfig::Dorfler { theta: args.theta },
        None => MarkingConfig::FixedFraction { fraction: args.fraction },
    };
    if config.mode == Mode::Safem && config.smoothing_steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1 with --mode safem".into()));
    }
    config.validate()?;
    Ok(config)
}

/// File stem identifying a configuration.
pub fn config_label(config: &RunConfig) -> String {
    match config.mode {
        Mode::Afem => format!("{}_deg{}_afem", config.problem, config.degree),
        Mode::Safem => {
            format!("{}_deg{}_safem_{}_l{}", config.problem, config.degree, config.smoother, config.smoothing_steps)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))
}

/// Runs one configuration, writes its CSV (and VTK files) into `dir` and
/// checks that the CSV reads back unchanged.
pub fn execute(config: &RunConfig, dir: &Path, vtk: bool) -> Result<Vec<CycleRecord>, CliError> {
    let label = config_label(config);
    let result = run_with_observer(config, |snap| {
        if vtk {
            let path = dir.join(format!("{label}_cycle{:02}.vtk", snap.record.cycle));
            write_vtk(snap.space, snap.solution, snap.estimator, snap.marked, &path).map_err(|e| e.to_string())?;
        }
        Ok(())
    })?;
    let path = dir.join(format!("{label}.csv"));
    write_csv(&result.records, &path).map_err(|e| CliError::Failed(e.to_string()))?;
    let back = read_csv(&path).map_err(|e| CliError::Failed(e.to_string()))?;
    if back != result.records {
        return Err(CliError::Failed(format!("{}: records do not read back unchanged", path.display())));
    }
    Ok(result.records)
}

/// The experiment matrix: peak2d and corner2d with every smoother and
/// ℓ ∈ {1, 3, 5}, drift2d for β ∈ {1, 10, 50} with GMRES, all for degrees
/// 1 to 3, each with its AFEM reference.
pub fn suite_configs(cycles: usize) -> Vec<RunConfig> {
    let mut configs = Vec::new();
    let mut push_family = |problem: Problem, smoothers: &[Smoother]| {
        for degree in 1..=3 {
            let base = RunConfig { cycles, ..RunConfig::new(problem, degree) };
            configs.push(base.clone());
            for &smoother in smoothers {
                for steps in [1, 3, 5] {
                    configs.push(base.clone().with_mode(Mode::Safem, smoother, steps));
                }
            }
        }
    };
    for problem in [Problem::Peak, Problem::Corner] {
        push_family(problem, &[Smoother::Richardson, Smoother::Cg, Smoother::Gmres]);
    }
    for beta in [1.0, 10.0, 50.0] {
        push_family(Problem::Drift { beta }, &[Smoother::Gmres]);
    }
    configs
}

/// One line of the suite summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub problem: String,
    pub beta: f64,
    pub degree: usize,
    pub mode: Mode,
    pub smoother: Smoother,
    pub smoothing_steps: usize,
    pub final_error_h1: f64,
    pub final_n_dofs: usize,
    pub intermediate_matvecs: usize,
    pub total_matvecs: usize,
    pub status: String,
}

fn summarize(config: &RunConfig, outcome: &Result<Vec<CycleRecord>, String>) -> SummaryRow {
    let (error, dofs, intermediate, total, status) = match outcome {
        Ok(records) => {
            let last = records.last().expect("at least two cycles");
            let inner = &records[1..records.len() - 1];
            (
                last.error_h1,
                last.n_dofs,
                inner.iter().map(|r| r.matvec_count).sum(),
                records.iter().map(|r| r.matvec_count).sum(),
                "ok".to_string(),
            )
        }
        Err(e) => (f64::NAN, 0, 0, 0, format!("failed: {e}")),
    };
    SummaryRow {
        label: config_label(config),
        problem: config.problem.name().to_string(),
        beta: config.problem.beta()[0],
        degree: config.degree,
        mode: config.mode,
        smoother: config.smoother,
        smoothing_steps: if config.mode == Mode::Safem { config.smoothing_steps } else { 0 },
        final_error_h1: error,
        final_n_dofs: dofs,
        intermediate_matvecs: intermediate,
        total_matvecs: total,
        status,
    }
}

/// Worker count for `suite`, from `SAFEM_THREADS` (default 1).
pub fn suite_threads() -> Result<usize, CliError> {
    match std::env::var("SAFEM_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("SAFEM_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

pub fn suite(args: &SuiteArgs) -> Result<Vec<SummaryRow>, CliError> {
    let cycles = match (args.cycles, args.smoke) {
        (Some(c), _) => c,
        (None, true) => 2,
        (None, false) => 10,
    };
    if cycles < 2 {
        return Err(CliError::Usage(format!("--cycles must be at least 2, got {cycles}")));
    }
    let threads = suite_threads()?;
    create_dir(&args.output)?;
    let configs = suite_configs(cycles);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Failed(e.to_string()))?;
    let outcomes: Vec<Result<Vec<CycleRecord>, String>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                execute(c, &args.output, false).map_err(|e| match e {
                    CliError::Usage(m) | CliError::Failed(m) => m,
                })
            })
            .collect()
    });
    let rows: Vec<SummaryRow> = configs.iter().zip(&outcomes).map(|(c, o)| summarize(c, o)).collect();
    let path = args.output.join("summary.csv");
    write_rows(&rows, &path).map_err(|e| CliError::Failed(e.to_string()))?;
    let failed: Vec<&str> = rows.iter().filter(|r| r.status != "ok").map(|r| r.label.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("{} configuration(s) failed: {}", failed.len(), failed.join(", "))));
    }
    Ok(rows)
}

fn run_command(args: &RunArgs) -> Result<(), CliError> {
    let config = run_config(args)?;
    create_dir(&args.common.output)?;
    let records = execute(&config, &args.common.output, args.vtk)?;
    for r in &records {
        println!(
            "cycle {:2}  cells {:7}  dofs {:7}  error {:.4e}  J {:.4e}  matvecs {}",
            r.cycle, r.n_cells, r.n_dofs, r.error_h1, r.estimator_j, r.matvec_count
        );
    }
    Ok(())
}

fn stagnation_command(args: &StagnationArgs) -> Result<(), CliError> {
    let config = base_config(&args.common)?;
    config.validate()?;
    if args.cycle < 2 {
        return Err(CliError::Usage(format!("--cycle must be at least 2, got {}", args.cycle)));
    }
    if args.max_steps == 0 {
        return Err(CliError::Usage("--max-steps must be positive".into()));
    }
    create_dir(&args.common.output)?;
    let points = stagnation(&config, args.cycle, args.max_steps)?;
    let path = args.common.output.join(format!(
        "{}_deg{}_stagnation_{}_cycle{}.csv",
        config.problem, config.degree, config.smoother, args.cycle
    ));
    write_rows(&points, &path).map_err(|e| CliError::Failed(e.to_string()))?;
    for p in &points {
        println!("steps {:2}  residual {:.4e}  J {:.6e}", p.steps, p.residual_norm, p.estimator_j);
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Suite(args) => suite(args).map(|rows| println!("{} configurations completed", rows.len())),
        Command::Stagnation(args) => stagnation_command(args),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("safem").chain(args.iter().copied()))
    }

    fn run_args(args: &[&str]) -> RunArgs {
        match parse(args).unwrap().command {
            Command::Run(r) => r,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_defaults() {
        let args =
            run_args(&["run", "--problem", "peak2d", "--mode", "safem", "--smoother", "richardson", "--steps", "3"]);
        let config = run_config(&args).unwrap();
        assert_eq!(config.degree, 1);
        assert_eq!(config.cycles, 10);
        assert_eq!(config.marking, MarkingConfig::Dorfler { theta: 0.3 });
        assert_eq!(config.mode, Mode::Safem);
        assert_eq!(config.smoothing_steps, 3);
    }

    #[test]
    fn higher_degree_selects_fraction_marking() {
        let args = run_args(&[
            "run",
            "--problem",
            "drift2d",
            "--beta",
            "50",
            "--smoother",
            "gmres",
            "--steps",
            "5",
            "--degree",
            "2",
        ]);
        let config = run_config(&args).unwrap();
        assert_eq!(config.marking, MarkingConfig::FixedFraction { fraction: 1.0 / 3.0 });
        assert_eq!(config.problem, Problem::Drift { beta: 50.0 });
        assert_eq!(config.smoother, Smoother::Gmres);
    }

    #[test]
    fn invalid_settings_are_usage_errors() {
        let args = run_args(&["run", "--steps", "0", "--mode", "safem"]);
        assert!(matches!(run_config(&args), Err(CliError::Usage(_))));
        let args = run_args(&["run", "--problem", "peak2d", "--beta", "3"]);
        assert!(matches!(run_config(&args), Err(CliError::Usage(_))));
        let args = run_args(&["run", "--theta", "1.5"]);
        assert!(matches!(run_config(&args), Err(CliError::Usage(_))));
        let args = run_args(&["run", "--cycles", "1"]);
        assert!(matches!(run_config(&args), Err(CliError::Usage(_))));
        let err = parse(&["run", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--bogus"));
    }

    #[test]
    fn suite_matrix_size() {
        let configs = suite_configs(2);
        // (1 + 3 smoothers · 3 step counts) · 3 degrees · 2 problems
        // + (1 + 3 step counts) · 3 degrees · 3 drift strengths
        assert_eq!(configs.len(), 60 + 36);
        let labels: std::collections::BTreeSet<_> = configs.iter().map(config_label).collect();
        assert_eq!(labels.len(), configs.len());
    }
}
