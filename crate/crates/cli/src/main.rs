//! Command-line front end: Monte Carlo runs, EKF tuning sweeps and the
//! dense-oracle self-check.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uwloc::harness::{
    best_grid_point, default_ekf_grid, emit_reports, run_experiment, tune_ekf, write_ekf_grid,
    ExperimentConfig, Method, ScenarioConfig, OUTPUT_DIR_ENV,
};
use uwloc::oracle::equivalence_suite;
use uwloc::scenario::TrajectoryKind;
use uwloc::Error;

#[derive(Parser)]
#[command(
    name = "uwloc",
    version,
    about = "Cooperative vehicle localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write reports.
    Run(ExperimentArgs),
    /// Grid-search the EKF noise parameters and write a CSV of the results.
    TuneEkf {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Comma-separated process noise values.
        #[arg(long, value_delimiter = ',')]
        q_grid: Vec<f64>,
        /// Comma-separated range noise variances.
        #[arg(long, value_delimiter = ',')]
        r_grid: Vec<f64>,
        /// Grid CSV path; defaults to `ekf_grid.csv` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the distributed solver against dense operators on random instances.
    OracleTests {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        max_vehicles: usize,
        #[arg(long, default_value_t = 6)]
        max_window: usize,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Trajectory {
    Lap,
    Lawnmower,
    Helix,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Switch to a default-shaped trajectory of this kind.
    #[arg(long, value_enum)]
    trajectory: Option<Trajectory>,
    #[arg(long)]
    trials: Option<usize>,
    /// Window horizon T0 (the window holds T0 + 1 samples).
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated subset of diesel, ekf, static.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    ticks: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    ekf_q: Option<f64>,
    #[arg(long)]
    ekf_r: Option<f64>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = self.trajectory {
            let kind = match t {
                Trajectory::Lap => TrajectoryKind::DEFAULT_LAP,
                Trajectory::Lawnmower => TrajectoryKind::DEFAULT_LAWNMOWER,
                Trajectory::Helix => TrajectoryKind::DEFAULT_HELIX,
            };
            let fresh = ScenarioConfig::for_trajectory(kind);
            c.scenario.trajectory = fresh.trajectory;
            c.scenario.dim = None;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(names) = &self.methods {
            c.methods = names
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<Method>())
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.seed {
            c.base_seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.ticks {
            c.scenario.duration_ticks = v;
        }
        if let Some(v) = self.max_iters {
            c.solver.max_iters = v;
        }
        if let Some(v) = self.ekf_q {
            c.ekf.q = v;
        }
        if let Some(v) = self.ekf_r {
            c.ekf.r = v;
        }
        if let Some(dir) = &self.output_dir {
            c.output_dir = dir.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(args: &ExperimentArgs) -> Result<(), Error> {
    let config = args.resolve()?;
    if args.print_config {
        println!("{}", config.to_json()?);
        return Ok(());
    }
    let start = Instant::now();
    let result = run_experiment(&config)?;
    emit_reports(&result.series, &config, &config.output_dir)?;
    for m in &result.series.methods {
        let settle = m
            .settling_tick
            .map_or("none".to_string(), |t| t.to_string());
        println!(
            "{:<7} steady-state {:.4} m  settling tick {settle}  diverged {}/{}",
            m.method.name(),
            m.steady_state,
            m.diverged,
            config.trials
        );
    }
    eprintln!(
        "{} trials in {:.1?}; reports in {}",
        config.trials,
        start.elapsed(),
        config.output_dir.display()
    );
    Ok(())
}

fn tune(
    args: &ExperimentArgs,
    q: &[f64],
    r: &[f64],
    output: &Option<PathBuf>,
) -> Result<(), Error> {
    let config = args.resolve()?;
    if args.print_config {
        println!("{}", config.to_json()?);
        return Ok(());
    }
    let (dq, dr) = default_ekf_grid();
    let q = if q.is_empty() { dq } else { q.to_vec() };
    let r = if r.is_empty() { dr } else { r.to_vec() };
    let points = tune_ekf(&config, &q, &r)?;
    let path = output
        .clone()
        .unwrap_or_else(|| config.output_dir.join("ekf_grid.csv"));
    write_ekf_grid(&path, &points)?;
    match best_grid_point(&points) {
        Some(b) => println!(
            "best q={} r={} steady-state {:.4} m ({})",
            b.q,
            b.r,
            b.steady_state_mean,
            path.display()
        ),
        None => println!("no grid point produced a finite error ({})", path.display()),
    }
    Ok(())
}

fn oracle(
    instances: usize,
    seed: u64,
    max_vehicles: usize,
    max_window: usize,
    tol: f64,
) -> Result<(), Error> {
    if max_vehicles == 0 || max_window == 0 {
        return Err(Error::Config("instance limits must be positive".into()));
    }
    let checks = equivalence_suite(instances, seed, max_vehicles, max_window)?;
    let mut failed = 0;
    for c in &checks {
        let ok = c.passed(tol);
        failed += usize::from(!ok);
        println!(
            "seed {:>4}  n={} m={} W={} d={}  step diff {:.2e}  gradient diff {:.2e}  lambda {:.3} <= L {:.1}  {}",
            c.seed,
            c.vehicles,
            c.anchors,
            c.window_len,
            c.dim,
            c.step_diff,
            c.gradient_diff,
            c.lambda_max,
            c.lipschitz,
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    if failed > 0 {
        return Err(Error::Numerical {
            iteration: 0,
            detail: format!("{failed} of {} oracle checks failed", checks.len()),
        });
    }
    println!("all {} instances agree", checks.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::TuneEkf {
            experiment,
            q_grid,
            r_grid,
            output,
        } => tune(experiment, q_grid, r_grid, output),
        Command::OracleTests {
            instances,
            seed,
            max_vehicles,
            max_window,
            tolerance,
        } => oracle(*instances, *seed, *max_vehicles, *max_window, *tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
