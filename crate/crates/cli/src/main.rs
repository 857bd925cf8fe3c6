//! Command-line front end: reproducible scenario runs, misestimation
//! sweeps, turnpike diagnostics, and a one-shot equilibrium check.
//!
//! Exit codes: 0 success, 2 config error, 3 solver failure (`check`),
//! 4 I/O error.

use chainsim_cli::config::{load_config, ConfigError, ConfigFile};
use chainsim_cli::output::{
    config_hash, write_plot_data, write_sweep, write_trace, write_turnpike,
};
use chainsim_core::avi::{check_regularity, solve, SolveStatus};
use chainsim_core::game::{build_condensed_game, AgentBelief};
use chainsim_core::scenario::{run_coupling_sweep, run_scenario, turnpike_analysis};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "chainsim",
    about = "Competitive supply chains as receding-horizon games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON).
    config: PathBuf,
    /// Output directory; overrides the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject configurations with any nondeterministic setting. All bundled
    /// settings are deterministic, so this is a guard for future extensions.
    #[arg(long)]
    seedless: bool,
    /// Additionally emit wide per-quantity CSV files for plotting.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write trace, metrics, diagnostics.
    Simulate(CommonArgs),
    /// Run the coupling-misestimation sweep defined in the config.
    Sweep(CommonArgs),
    /// Run the scenario with recorded plans and write the turnpike report.
    Turnpike(CommonArgs),
    /// Build the game at the initial state, solve once, and print the
    /// residual and the local-uniqueness report.
    Check(CommonArgs),
}

enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<chainsim_cli::output::OutputError> for CliError {
    fn from(e: chainsim_cli::output::OutputError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<chainsim_core::scenario::ScenarioError> for CliError {
    fn from(e: chainsim_core::scenario::ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn load(args: &CommonArgs) -> Result<(ConfigFile, String, PathBuf), CliError> {
    let config = load_config(&args.config)?;
    let raw = std::fs::read(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let hash = config_hash(&raw);
    let dir = args
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, hash, dir))
}

fn scenario_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
}

fn run_simulate(args: &CommonArgs) -> Result<(), CliError> {
    let (config, hash, dir) = load(args)?;
    let scenario = config.scenario(&scenario_name(&args.config))?;
    let (trace, metrics) = run_scenario(&scenario)?;
    let written = write_trace(&trace, &metrics, &hash, &config.solver, &dir)?;
    let mut all = written;
    if args.plot_data {
        all.extend(write_plot_data(&trace, &hash, &config.solver, &dir)?);
    }
    for path in &all {
        println!("wrote {}", path.display());
    }
    let failures: usize = trace
        .days
        .iter()
        .flat_map(|d| d.diagnostics.iter())
        .filter(|g| g.fallback)
        .count();
    println!(
        "simulated {} days, {} agents; solver fallbacks: {failures}",
        trace.len(),
        trace.n_m
    );
    Ok(())
}

fn run_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let (config, hash, dir) = load(args)?;
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep: config has no sweep section".into()))?;
    let scenario = config.scenario(&scenario_name(&args.config))?;
    let table = run_coupling_sweep(&scenario, sweep.target, &sweep.factors)?;
    let path = write_sweep(&table, &hash, &config.solver, &dir)?;
    println!("wrote {}", path.display());
    println!("factor  dM1%      dM2%");
    for row in &table.rows {
        println!("{:6}  {:+8.3}  {:+8.3}", row.factor, row.delta_pct[0], row.delta_pct[1]);
    }
    Ok(())
}

fn run_turnpike(args: &CommonArgs) -> Result<(), CliError> {
    let (config, hash, dir) = load(args)?;
    let mut scenario = config.scenario(&scenario_name(&args.config))?;
    scenario.record_plans = true;
    let (trace, metrics) = run_scenario(&scenario)?;
    let report = turnpike_analysis(&trace, config.turnpike_eps())?;
    write_trace(&trace, &metrics, &hash, &config.solver, &dir)?;
    let path = write_turnpike(&report, &hash, &config.solver, &dir)?;
    println!("wrote {}", path.display());
    println!(
        "plans: {}; middle third within {} of the level: {:.1}%; detected turnpikes: {:.1}%",
        report.plans.len(),
        report.eps,
        100.0 * report.middle_within_fraction,
        100.0 * report.detected_fraction()
    );
    Ok(())
}

fn run_check(args: &CommonArgs) -> Result<(), CliError> {
    let (config, _, _) = load(args)?;
    let scenario = config.scenario(&scenario_name(&args.config))?;
    let chain = scenario.chain.clone();
    let belief = AgentBelief::with_constant_demand(chain, &scenario.base_demand)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut x0 = nalgebra::DVector::zeros(3 * scenario.chain.n_m());
    for (v, s) in scenario.x0.iter().enumerate() {
        x0[3 * v] = s.xi;
        x0[3 * v + 1] = s.o_prev;
        x0[3 * v + 2] = s.d_prev;
    }
    let game = build_condensed_game(&belief, &x0).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = game.avi_problem();
    let solution = solve(&problem, &scenario.settings, None);
    println!(
        "solve: status {}, {} iterations, residual {:.3e}",
        solution.status, solution.iterations, solution.residual
    );
    println!(
        "kkt: stationarity {:.3e}, primal {:.3e}, dual {:.3e}, complementarity {:.3e}",
        solution.kkt.stationarity,
        solution.kkt.primal_feasibility,
        solution.kkt.dual_feasibility,
        solution.kkt.complementarity
    );
    if solution.status != SolveStatus::Converged {
        return Err(CliError::Solver(format!(
            "equilibrium solve did not converge (status {}, residual {:.3e})",
            solution.status, solution.residual
        )));
    }
    let report = check_regularity(&problem, &solution, scenario.settings.tol.sqrt());
    println!(
        "regularity: active {}, licq_ok {}, second_order_ok {}, rank_gap {}, min_eigenvalue {}",
        report.active_set.len(),
        report.licq_ok,
        report.second_order_ok,
        report.rank_gap,
        report.min_eigenvalue.map_or("n/a".to_string(), |e| format!("{e:.6e}")),
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Turnpike(args) => run_turnpike(args),
        Command::Check(args) => run_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(4)
        }
    }
}
