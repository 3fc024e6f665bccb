//! Monte Carlo experiment runner and report writer.
//!
//! Every trial draws its measurement stream and initial guess from
//! `base_seed + trial`; all enabled methods see exactly the same data.
//! Trials run on a bounded rayon pool and are aggregated in trial order, so
//! outputs do not depend on scheduling.
//!
//! Report schemas:
//! - `mean_error.csv`: `tick,method,mean,std`, where `mean` is the trial
//!   average of `e(t) = (1/n)·Σᵢ‖x̂ᵢ(t) − xᵢ(t)‖` and `std` its sample
//!   standard deviation across trials.
//! - `cdf.csv`: `method,error,fraction`, the empirical CDF of per-trial
//!   errors averaged over vehicles and ticks.
//! - `summary.json`: resolved config, and per method the steady-state mean
//!   (mean of `e(t)` over ticks `⌊T/2⌋..T`), settling tick (first tick after
//!   which `e(t)` stays within 1.5× the steady-state mean) and the number of
//!   diverged trials, which are excluded from every average.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ekf_track, static_track, EkfConfig};
use crate::diesel::track;
use crate::error::{Error, Result};
use crate::geom::{NetworkTopology, Point, SpaceDim};
use crate::problem::IterationBudget;
use crate::scenario::{
    generate_trajectory, perturbed_initial_positions, synthesize_measurements, vehicle_positions,
    FormationConfig, GroundTruth, NoiseConfig, TrajectoryKind, TrajectorySpec,
};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "UWLOC_OUTPUT_DIR";

/// Settling band relative to the steady-state mean.
pub const SETTLING_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Diesel,
    Ekf,
    Static,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Diesel, Method::Ekf, Method::Static];

    pub fn name(self) -> &'static str {
        match self {
            Method::Diesel => "diesel",
            Method::Ekf => "ekf",
            Method::Static => "static",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diesel" => Ok(Method::Diesel),
            "ekf" => Ok(Method::Ekf),
            "static" => Ok(Method::Static),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub trajectory: TrajectorySpec,
    /// Defaults to the trajectory's own dimension.
    pub dim: Option<SpaceDim>,
    pub formation: FormationConfig,
    pub noise: NoiseConfig,
    pub duration_ticks: usize,
    pub dt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            trajectory: TrajectorySpec::new(TrajectoryKind::DEFAULT_LAP),
            dim: None,
            formation: FormationConfig::default(),
            noise: NoiseConfig::default(),
            duration_ticks: 300,
            dt: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn for_trajectory(kind: TrajectoryKind) -> Self {
        ScenarioConfig {
            trajectory: TrajectorySpec::new(kind),
            ..Self::default()
        }
    }

    pub fn dim(&self) -> SpaceDim {
        self.dim.unwrap_or_else(|| self.trajectory.kind.dim())
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let dim = self.dim();
        self.noise.validate(dim)?;
        generate_trajectory(
            &self.trajectory,
            &self.formation,
            dim,
            self.duration_ticks,
            self.dt,
            &self.noise.current_vector(dim),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    /// Window horizon `T₀`; the window holds `T₀ + 1` samples.
    pub horizon: usize,
    pub trials: usize,
    pub solver: IterationBudget,
    pub ekf: EkfConfig,
    pub output_dir: PathBuf,
    pub base_seed: u64,
    /// Worker threads for trials; 0 uses every available core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            methods: Method::ALL.to_vec(),
            horizon: 5,
            trials: 100,
            solver: IterationBudget::default(),
            ekf: EkfConfig::default(),
            output_dir: PathBuf::from("results"),
            base_seed: 1,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies [`OUTPUT_DIR_ENV`] if it is set and nonempty.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.contains(&Method::Diesel) && self.horizon == 0 {
            return Err(Error::Config("diesel needs a horizon of at least 1".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods are listed more than once".into()));
        }
        if self.solver.max_iters == 0 || self.solver.rel_tol.is_nan() || self.solver.rel_tol <= 0.0
        {
            return Err(Error::Config("solver budget must be positive".into()));
        }
        self.ekf.validate()?;
        let dim = self.scenario.dim();
        self.scenario.noise.validate(dim)?;
        self.scenario.formation.validate()?;
        Ok(())
    }
}

/// One method's result in one trial.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodOutcome {
    /// Per-tick mean position error over vehicles.
    Errors(Vec<f64>),
    Diverged(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub outcomes: Vec<(Method, MethodOutcome)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSeries {
    pub method: Method,
    /// Trial-averaged `e(t)`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Per-trial error averaged over vehicles and ticks, in trial order.
    pub trial_errors: Vec<f64>,
    pub diverged: usize,
    pub steady_state: f64,
    pub settling_tick: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    pub ticks: usize,
    pub methods: Vec<MethodSeries>,
}

impl MetricSeries {
    pub fn get(&self, method: Method) -> Option<&MethodSeries> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub series: MetricSeries,
    pub trials: Vec<TrialResult>,
}

/// Mean per-vehicle Euclidean error at each tick.
pub fn position_errors(estimates: &[Vec<Point>], truth: &[Vec<Point>]) -> Vec<f64> {
    estimates
        .iter()
        .zip(truth)
        .map(|(est, x)| {
            est.iter()
                .zip(x)
                .map(|(e, xi)| (e - xi).norm())
                .sum::<f64>()
                / x.len() as f64
        })
        .collect()
}

/// Mean of `series` over ticks `⌊T/2⌋..T`.
pub fn steady_state_mean(series: &[f64]) -> f64 {
    let tail = &series[series.len() / 2..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// First tick after which `series` never exceeds `factor·steady`.
pub fn settling_tick(series: &[f64], steady: f64, factor: f64) -> Option<usize> {
    let bound = factor * steady;
    let mut tick = None;
    for (t, &e) in series.iter().enumerate().rev() {
        if e <= bound {
            tick = Some(t);
        } else {
            break;
        }
    }
    tick
}

/// Right-continuous empirical CDF: one `(value, fraction ≤ value)` point
/// per distinct sample.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::contract("empirical CDF of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::contract("empirical CDF of NaN samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, &x) in sorted.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => out.push((x, frac)),
        }
    }
    Ok(out)
}

/// Data shared by every trial of an experiment.
struct Setup {
    dim: SpaceDim,
    truth: GroundTruth,
    vehicle_truth: Vec<Vec<Point>>,
    topology: NetworkTopology,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let truth = config.scenario.ground_truth()?;
        let topology = config.scenario.formation.topology()?;
        let vehicle_truth = vehicle_positions(&truth, &config.scenario.formation);
        Ok(Setup {
            dim: config.scenario.dim(),
            truth,
            vehicle_truth,
            topology,
        })
    }
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::Numerical { .. } | Error::Divergence(_))
}

fn outcome(estimates: Result<Vec<Vec<Point>>>, truth: &[Vec<Point>]) -> Result<MethodOutcome> {
    match estimates {
        Ok(est) => {
            if est
                .iter()
                .flatten()
                .any(|p| !p.iter().all(|x| x.is_finite()))
            {
                return Ok(MethodOutcome::Diverged("non-finite estimate".into()));
            }
            Ok(MethodOutcome::Errors(position_errors(&est, truth)))
        }
        Err(e) if is_divergence(&e) => Ok(MethodOutcome::Diverged(e.to_string())),
        Err(e) => Err(e),
    }
}

fn run_method(
    config: &ExperimentConfig,
    setup: &Setup,
    method: Method,
    ekf: &EkfConfig,
    stream: &[crate::problem::MeasurementSample],
    init: &[Point],
) -> Result<MethodOutcome> {
    let dt = config.scenario.dt;
    let est = match method {
        Method::Diesel => track(
            stream.iter().cloned(),
            &setup.topology,
            setup.dim,
            dt,
            config.horizon,
            config.solver,
            init,
        )
        .map(|v| v.into_iter().map(|t| t.positions).collect()),
        Method::Static => static_track(stream, &setup.topology, setup.dim, dt, config.solver, init)
            .map(|v| v.into_iter().map(|t| t.positions).collect()),
        Method::Ekf => ekf_track(
            stream,
            &setup.topology,
            dt,
            ekf,
            config.scenario.noise.sigma_init,
            init,
        ),
    };
    outcome(est, &setup.vehicle_truth)
}

fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    config.base_seed.wrapping_add(trial as u64)
}

fn trial_data(
    config: &ExperimentConfig,
    setup: &Setup,
    seed: u64,
) -> Result<(Vec<crate::problem::MeasurementSample>, Vec<Point>)> {
    let noise = &config.scenario.noise;
    let formation = &config.scenario.formation;
    let stream = synthesize_measurements(&setup.truth, formation, &setup.topology, noise, seed)?;
    let init = perturbed_initial_positions(&setup.truth, formation, noise.sigma_init, seed);
    Ok((stream, init))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn aggregate(method: Method, trials: &[TrialResult], ticks: usize) -> MethodSeries {
    let runs: Vec<&Vec<f64>> = trials
        .iter()
        .filter_map(|t| {
            t.outcomes
                .iter()
                .find(|(m, _)| *m == method)
                .and_then(|(_, o)| match o {
                    MethodOutcome::Errors(e) => Some(e),
                    MethodOutcome::Diverged(_) => None,
                })
        })
        .collect();
    let diverged = trials.len() - runs.len();
    let k = runs.len() as f64;
    let mut mean = vec![f64::NAN; ticks];
    let mut std = vec![f64::NAN; ticks];
    if !runs.is_empty() {
        for t in 0..ticks {
            let m = runs.iter().map(|r| r[t]).sum::<f64>() / k;
            let var = if runs.len() > 1 {
                runs.iter().map(|r| (r[t] - m).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            mean[t] = m;
            std[t] = var.sqrt();
        }
    }
    let trial_errors = runs
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    let steady_state = steady_state_mean(&mean);
    MethodSeries {
        method,
        settling_tick: settling_tick(&mean, steady_state, SETTLING_FACTOR),
        mean,
        std,
        trial_errors,
        diverged,
        steady_state,
    }
}

/// Runs every trial and aggregates the per-tick errors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = Setup::new(config)?;
    let trials: Vec<TrialResult> = with_pool(config.workers, || {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(config, trial);
                let (stream, init) = trial_data(config, &setup, seed)?;
                let outcomes = config
                    .methods
                    .iter()
                    .map(|&m| {
                        Ok((
                            m,
                            run_method(config, &setup, m, &config.ekf, &stream, &init)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TrialResult {
                    trial,
                    seed,
                    outcomes,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let ticks = setup.truth.ticks();
    let methods = config
        .methods
        .iter()
        .map(|&m| aggregate(m, &trials, ticks))
        .collect();
    Ok(ExperimentResult {
        series: MetricSeries { ticks, methods },
        trials,
    })
}

#[derive(Serialize)]
struct MethodSummary {
    steady_state_mean: Option<f64>,
    settling_tick: Option<usize>,
    normalized_error_mean: Option<f64>,
    diverged_trials: usize,
    completed_trials: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    error_metric: &'static str,
    ticks: usize,
    methods: BTreeMap<&'static str, MethodSummary>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `mean_error.csv`, `cdf.csv` and `summary.json` into `dir`.
pub fn emit_reports(series: &MetricSeries, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("mean_error.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["tick", "method", "mean", "std"])?;
    for m in &series.methods {
        for t in 0..series.ticks {
            w.write_record([
                t.to_string(),
                m.method.name().to_string(),
                m.mean[t].to_string(),
                m.std[t].to_string(),
            ])?;
        }
    }
    finish(w, &path)?;

    let path = dir.join("cdf.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["method", "error", "fraction"])?;
    for m in &series.methods {
        if m.trial_errors.is_empty() {
            continue;
        }
        for (x, f) in empirical_cdf(&m.trial_errors)? {
            w.write_record([m.method.name().to_string(), x.to_string(), f.to_string()])?;
        }
    }
    finish(w, &path)?;

    let summary = Summary {
        config,
        error_metric:
            "mean over vehicles of Euclidean position error, averaged over completed trials",
        ticks: series.ticks,
        methods: series
            .methods
            .iter()
            .map(|m| {
                let completed = m.trial_errors.len();
                let normalized =
                    (completed > 0).then(|| m.trial_errors.iter().sum::<f64>() / completed as f64);
                (
                    m.method.name(),
                    MethodSummary {
                        steady_state_mean: finite(m.steady_state),
                        settling_tick: m.settling_tick,
                        normalized_error_mean: normalized,
                        diverged_trials: m.diverged,
                        completed_trials: completed,
                    },
                )
            })
            .collect(),
    };
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// One grid point of an EKF tuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EkfGridPoint {
    pub q: f64,
    pub r: f64,
    pub steady_state_mean: f64,
    pub normalized_error_mean: f64,
    pub diverged: usize,
}

/// Evaluates the EKF on the experiment's trials for every `(q, r)` pair.
///
/// Points come back in grid order (`q` outer); the best one minimizes the
/// steady-state mean error.
pub fn tune_ekf(
    config: &ExperimentConfig,
    q_grid: &[f64],
    r_grid: &[f64],
) -> Result<Vec<EkfGridPoint>> {
    let setup = Setup::new(config)?;
    if q_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::Config("EKF tuning grid is empty".into()));
    }
    let data: Vec<_> = (0..config.trials)
        .map(|t| trial_data(config, &setup, trial_seed(config, t)))
        .collect::<Result<_>>()?;
    let grid: Vec<(f64, f64)> = q_grid
        .iter()
        .flat_map(|&q| r_grid.iter().map(move |&r| (q, r)))
        .collect();
    with_pool(config.workers, || {
        grid.par_iter()
            .map(|&(q, r)| {
                let ekf = EkfConfig { q, r, ..config.ekf };
                ekf.validate()?;
                let trials = data
                    .iter()
                    .enumerate()
                    .map(|(trial, (stream, init))| {
                        Ok(TrialResult {
                            trial,
                            seed: trial_seed(config, trial),
                            outcomes: vec![(
                                Method::Ekf,
                                run_method(config, &setup, Method::Ekf, &ekf, stream, init)?,
                            )],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let s = aggregate(Method::Ekf, &trials, setup.truth.ticks());
                let k = s.trial_errors.len();
                Ok(EkfGridPoint {
                    q,
                    r,
                    steady_state_mean: s.steady_state,
                    normalized_error_mean: if k > 0 {
                        s.trial_errors.iter().sum::<f64>() / k as f64
                    } else {
                        f64::NAN
                    },
                    diverged: s.diverged,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Grid point with the lowest steady-state error.
pub fn best_grid_point(points: &[EkfGridPoint]) -> Option<EkfGridPoint> {
    points
        .iter()
        .filter(|p| p.steady_state_mean.is_finite())
        .min_by(|a, b| a.steady_state_mean.total_cmp(&b.steady_state_mean))
        .copied()
}

/// Writes `q,r,steady_state_mean,normalized_error_mean,diverged`.
pub fn write_ekf_grid(path: &Path, points: &[EkfGridPoint]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv_writer(path)?;
    w.write_record([
        "q",
        "r",
        "steady_state_mean",
        "normalized_error_mean",
        "diverged",
    ])?;
    for p in points {
        w.write_record([
            p.q.to_string(),
            p.r.to_string(),
            p.steady_state_mean.to_string(),
            p.normalized_error_mean.to_string(),
            p.diverged.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Log-spaced default sweep for `q` and `r`.
pub fn default_ekf_grid() -> (Vec<f64>, Vec<f64>) {
    let q = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0].to_vec();
    let r = [0.0625, 0.25, 1.0, 4.0].to_vec();
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: Vec<Method>) -> ExperimentConfig {
        ExperimentConfig {
            methods,
            trials: 3,
            scenario: ScenarioConfig {
                duration_ticks: 20,
                ..ScenarioConfig::default()
            },
            workers: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn cdf_definition() {
        assert_eq!(
            empirical_cdf(&[3.0, 1.0, 2.0]).unwrap(),
            vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]
        );
        assert_eq!(
            empirical_cdf(&[1.0, 1.0, 2.0]).unwrap(),
            vec![(1.0, 2.0 / 3.0), (2.0, 1.0)]
        );
        assert_eq!(empirical_cdf(&[4.0; 5]).unwrap(), vec![(4.0, 1.0)]);
        assert!(matches!(empirical_cdf(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn settling_and_steady_state() {
        let e = [10.0, 5.0, 1.4, 2.0, 1.0, 1.0, 1.0, 1.0];
        let s = steady_state_mean(&e);
        assert_eq!(s, 1.0);
        assert_eq!(settling_tick(&e, s, 1.5), Some(4));
        assert_eq!(settling_tick(&[1.0, 3.0], 1.0, 1.5), None);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
        let partial =
            ExperimentConfig::from_json(r#"{"trials": 7, "methods": ["static"]}"#).unwrap();
        assert_eq!(partial.trials, 7);
        assert_eq!(partial.horizon, 5);
        assert!(ExperimentConfig::from_json(r#"{"trails": 7}"#).is_err());

        let bad = ExperimentConfig {
            trials: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut bad = ExperimentConfig {
            horizon: 0,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        bad.methods = vec![Method::Static];
        assert!(bad.validate().is_ok());
        let mut bad = ExperimentConfig::default();
        bad.scenario.dim = Some(SpaceDim::SPATIAL);
        assert!(run_experiment(&bad).is_err());
    }

    #[test]
    fn noiseless_runs_are_exact() {
        let mut c = small(vec![Method::Diesel, Method::Static, Method::Ekf]);
        c.scenario.noise = NoiseConfig::noiseless();
        // the static warm start lags one tick, so it needs a tight tolerance
        c.solver = IterationBudget {
            max_iters: 5000,
            rel_tol: 1e-12,
        };
        let r = run_experiment(&c).unwrap();
        for m in &r.series.methods {
            assert_eq!(m.diverged, 0);
            let worst = m.mean.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= 1e-6, "{:?}: {worst}", m.method);
        }
    }

    #[test]
    fn reports_have_documented_shape() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(vec![Method::Static]);
        c.scenario.duration_ticks = 3;
        let r = run_experiment(&c).unwrap();
        emit_reports(&r.series, &c, dir.path()).unwrap();
        let mean = fs::read_to_string(dir.path().join("mean_error.csv")).unwrap();
        assert_eq!(mean.lines().count(), 4);
        let cdf = fs::read_to_string(dir.path().join("cdf.csv")).unwrap();
        assert_eq!(cdf.lines().next(), Some("method,error,fraction"));
        assert!(cdf.lines().last().unwrap().ends_with(",1"));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        let steady = summary["methods"]["static"]["steady_state_mean"]
            .as_f64()
            .unwrap();
        // recompute from the CSV: last half of 3 ticks is ticks 1 and 2
        let vals: Vec<f64> = mean
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!((steady - (vals[1] + vals[2]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_method_list_gives_header_only_reports() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(vec![]);
        let r = run_experiment(&c).unwrap();
        emit_reports(&r.series, &c, dir.path()).unwrap();
        assert_eq!(
            fs::read_to_string(dir.path().join("mean_error.csv")).unwrap(),
            "tick,method,mean,std\n"
        );
        assert_eq!(
            fs::read_to_string(dir.path().join("cdf.csv")).unwrap(),
            "method,error,fraction\n"
        );
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let c = small(vec![]);
        let r = run_experiment(&c).unwrap();
        let err = emit_reports(&r.series, &c, &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }

    #[test]
    fn tuning_grid_order() {
        let c = small(vec![Method::Ekf]);
        let pts = tune_ekf(&c, &[0.01, 0.1], &[0.25, 1.0]).unwrap();
        let qr: Vec<(f64, f64)> = pts.iter().map(|p| (p.q, p.r)).collect();
        assert_eq!(qr, vec![(0.01, 0.25), (0.01, 1.0), (0.1, 0.25), (0.1, 1.0)]);
        assert!(best_grid_point(&pts).is_some());
        let dir = tempfile::tempdir().unwrap();
        write_ekf_grid(&dir.path().join("grid.csv"), &pts).unwrap();
    }
}
