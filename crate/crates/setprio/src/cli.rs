//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use setprio_core::kinematics::RowSelector;
use setprio_core::sim::{run_scenario, ScenarioRun};

use crate::config::{self, LoadedScenario, Overrides, RowsEntry};
use crate::error::{AppError, ExitCode};
use crate::fdcheck::{self, FdCheckOptions, PASS_THRESHOLD};
use crate::output::{self, Comparison, MetricsReport};

#[derive(Debug, Parser)]
#[command(name = "setprio", version, about = "Set-based task-priority inverse kinematics scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv and metrics.json.
    Run(RunArgs),
    /// Run a scenario without and with optimization counterparts.
    Compare(CompareArgs),
    /// Load and check a scenario without running it.
    Validate(ValidateArgs),
    /// Check the manipulability gradient against a central-difference oracle.
    FdCheck(FdCheckArgs),
}

#[derive(Debug, Args)]
pub struct OverrideArgs {
    /// Integration step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Run length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Maximum damping factor of the pseudoinverse.
    #[arg(long)]
    pub damping: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long, value_name = "true|false")]
    pub with_optimization: Option<bool>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct FdCheckArgs {
    /// Chain file to sample.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub chain: Option<PathBuf>,
    /// Scenario whose chain is sampled.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub fd_samples: usize,
    /// Forward-difference step of the checked gradient.
    #[arg(long)]
    pub delta_q: Option<f64>,
    /// `position`, `orientation`, `full` or comma-separated row indices.
    #[arg(long)]
    pub rows: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_cli<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Validation } else { ExitCode::Success };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, AppError> {
    match command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::FdCheck(args) => cmd_fd_check(&args),
    }
}

fn simulate(loaded: &LoadedScenario) -> Result<ScenarioRun, AppError> {
    run_scenario(&loaded.scenario).map_err(|e| AppError::from_core(&loaded.source, e))
}

fn summarize(report: &MetricsReport) {
    println!(
        "{} (optimization {}): rmse {:.6} m, max error {:.6} m, joints reaching limits {}",
        report.scenario,
        if report.with_optimization { "on" } else { "off" },
        report.tracking_rmse,
        report.max_tracking_error,
        report.joints_reaching_limits
    );
    for (id, count) in &report.activation_count {
        println!("  {id}: {count} activation(s), active {:.1}% of the run", 100.0 * report.active_time_fraction[id]);
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<ExitCode, AppError> {
    let overrides = Overrides {
        dt: args.overrides.dt,
        duration: args.overrides.duration,
        with_optimization: args.with_optimization,
        damping: args.overrides.damping,
    };
    let loaded = config::load_scenario(&args.scenario, &overrides)?;
    info!("running {} for {} cycles", loaded.name, loaded.scenario.cycles());
    let run = simulate(&loaded)?;
    let report = MetricsReport::new(&loaded.name, loaded.scenario.with_optimization, &run);
    output::write_run(&args.out, &report, &run, loaded.scenario.chain.dof())?;
    summarize(&report);
    Ok(ExitCode::Success)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, AppError> {
    let leg = |with_optimization| Overrides {
        dt: args.overrides.dt,
        duration: args.overrides.duration,
        with_optimization: Some(with_optimization),
        damping: args.overrides.damping,
    };
    let without = config::load_scenario(&args.scenario, &leg(false))?;
    let with = config::load_scenario(&args.scenario, &leg(true))?;
    let (run_without, run_with) = std::thread::scope(|s| {
        let handle = s.spawn(|| simulate(&with));
        let a = simulate(&without);
        let b = handle.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
        (a, b)
    });
    let (run_without, run_with) = (run_without?, run_with?);
    let dof = without.scenario.chain.dof();
    let report_without = MetricsReport::new(&without.name, false, &run_without);
    let report_with = MetricsReport::new(&with.name, true, &run_with);
    output::write_run(&args.out.join("without"), &report_without, &run_without, dof)?;
    output::write_run(&args.out.join("with"), &report_with, &run_with, dof)?;
    let comparison = Comparison::new(&run_without.metrics, &run_with.metrics);
    output::write_json(&comparison, &args.out.join("comparison.json"))?;
    summarize(&report_without);
    summarize(&report_with);
    Ok(ExitCode::Success)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode, AppError> {
    let loaded = config::load_scenario(&args.scenario, &Overrides::default())?;
    let s = &loaded.scenario;
    println!(
        "{}: {} joints, {} tasks ({} set-based), {} cycles of {} s",
        loaded.name,
        s.chain.dof(),
        s.hierarchy.len(),
        s.hierarchy.set_based().count(),
        s.cycles(),
        s.dt
    );
    Ok(ExitCode::Success)
}

fn parse_rows(text: &str, path: &Path) -> Result<RowSelector, AppError> {
    let entry = if text.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        let rows = text
            .split(',')
            .map(|r| r.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AppError::validation(path, format!("--rows: {e}")))?;
        RowsEntry::Indices(rows)
    } else {
        RowsEntry::Named(text.to_string())
    };
    entry.to_selector().map_err(|m| AppError::validation(path, format!("--rows: {m}")))
}

pub fn cmd_fd_check(args: &FdCheckArgs) -> Result<ExitCode, AppError> {
    let (chain, source) = match (&args.chain, &args.scenario) {
        (Some(path), _) => (config::load_chain(path)?, path.clone()),
        (None, Some(path)) => (config::load_scenario(path, &Overrides::default())?.scenario.chain, path.clone()),
        (None, None) => return Err(AppError::validation("<args>", "either --chain or --scenario is required")),
    };
    let mut opts = FdCheckOptions::for_chain(&chain);
    opts.samples = args.fd_samples;
    opts.seed = args.seed;
    if let Some(dq) = args.delta_q {
        opts.delta_q = dq;
    }
    if let Some(rows) = &args.rows {
        opts.rows = parse_rows(rows, &source)?;
    }
    let report = fdcheck::run_fd_check(&chain, &opts).map_err(|e| AppError::from_core(&source, e))?;
    println!(
        "fd-check: {} samples, delta_q {:e}, max relative error {:e} (threshold {:e})",
        report.samples, opts.delta_q, report.max_relative_error, PASS_THRESHOLD
    );
    if report.passed() {
        Ok(ExitCode::Success)
    } else {
        println!("worst configuration: {:?}", report.worst_configuration);
        Ok(ExitCode::FdCheckFailed)
    }
}
