//! Comparison methods: a centralized EKF over all vehicle positions and a
//! static range-only localizer built on the windowed solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diesel::{run_window, SolveReport, TickEstimate, Tracker};
use crate::error::{Error, Result};
use crate::geom::{NetworkTopology, Point, SpaceDim};
use crate::problem::{
    window_deltas, IterationBudget, MeasurementSample, MeasurementWindow, SolverParams,
    StackedVariable,
};

/// Predicted ranges shorter than this carry no usable direction.
pub const MIN_PREDICTED_RANGE: f64 = 1e-9;

/// Filter tuning. `q` inflates each position variance by `q·ΔT²` per step;
/// `r` is the range noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfConfig {
    pub q: f64,
    pub r: f64,
    /// Prior variance per coordinate; `None` uses `σ_init²`.
    pub initial_variance: Option<f64>,
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig {
            q: 0.01,
            r: 0.25,
            initial_variance: None,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0 && self.q.is_finite()) || !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!(
                "EKF needs q >= 0 and r > 0, got q = {}, r = {}",
                self.q, self.r
            )));
        }
        if let Some(v) = self.initial_variance {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(
                    "EKF initial variance must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Joint position estimate of every vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    dim: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub q: f64,
    pub r: f64,
}

impl EkfState {
    pub fn new(positions: &[Point], variance: f64, q: f64, r: f64) -> Result<Self> {
        let dim = positions.first().map_or(0, |p| p.len());
        if dim == 0 || positions.iter().any(|p| p.len() != dim) {
            return Err(Error::contract(
                "EKF needs equal-length, nonempty positions",
            ));
        }
        let mean = DVector::from_iterator(
            positions.len() * dim,
            positions.iter().flat_map(|p| p.iter().copied()),
        );
        let covariance = DMatrix::identity(mean.len(), mean.len()) * variance;
        Ok(EkfState {
            dim,
            mean,
            covariance,
            q,
            r,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vehicle_count(&self) -> usize {
        self.mean.len() / self.dim
    }

    pub fn position(&self, i: usize) -> Point {
        Point::from_column_slice(self.mean.rows(i * self.dim, self.dim).as_slice())
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.vehicle_count())
            .map(|i| self.position(i))
            .collect()
    }

    /// Dead-reckons with the measured relative velocities.
    pub fn predict(&mut self, rel_velocities: &[Point], dt: f64) {
        let d = self.dim;
        for (i, v) in rel_velocities.iter().enumerate() {
            for c in 0..d {
                self.mean[i * d + c] += dt * v[c];
            }
        }
        let inflation = self.q * dt * dt;
        for k in 0..self.mean.len() {
            self.covariance[(k, k)] += inflation;
        }
    }

    /// Joint first-order update with every range available at one tick.
    ///
    /// Uses the Joseph form and re-symmetrizes. Measurements whose predicted
    /// range is below [`MIN_PREDICTED_RANGE`] are skipped.
    pub fn update(
        &mut self,
        topology: &NetworkTopology,
        ranges: &[f64],
        anchor_ranges: &[f64],
        anchor_positions: &[Point],
    ) -> Result<()> {
        if ranges.len() != topology.edge_count()
            || anchor_ranges.len() != topology.link_count()
            || anchor_positions.len() != topology.anchor_count()
        {
            return Err(Error::contract("EKF update does not match the topology"));
        }
        let d = self.dim;
        let nx = self.mean.len();
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for (e, &(i, j)) in topology.edges().iter().enumerate() {
            let diff = self.position(i) - self.position(j);
            let h = diff.norm();
            if h < MIN_PREDICTED_RANGE {
                continue;
            }
            let u = diff / h;
            let mut jac = Vec::with_capacity(2 * d);
            for c in 0..d {
                jac.push((i * d + c, u[c]));
                jac.push((j * d + c, -u[c]));
            }
            rows.push((jac, ranges[e] - h));
        }
        for (l, link) in topology.links().iter().enumerate() {
            let diff = self.position(link.vehicle) - &anchor_positions[link.anchor];
            let h = diff.norm();
            if h < MIN_PREDICTED_RANGE {
                continue;
            }
            let u = diff / h;
            let jac = (0..d).map(|c| (link.vehicle * d + c, u[c])).collect();
            rows.push((jac, anchor_ranges[l] - h));
        }
        if rows.is_empty() {
            return Ok(());
        }

        let nz = rows.len();
        let mut hmat = DMatrix::<f64>::zeros(nz, nx);
        let mut innovation = DVector::<f64>::zeros(nz);
        for (row, (jac, nu)) in rows.into_iter().enumerate() {
            for (col, val) in jac {
                hmat[(row, col)] = val;
            }
            innovation[row] = nu;
        }
        let ph = &self.covariance * hmat.transpose();
        let s = &hmat * &ph + DMatrix::<f64>::identity(nz, nz) * self.r;
        let chol = s.cholesky().ok_or_else(|| {
            Error::Divergence("innovation covariance is not positive definite".into())
        })?;
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
        let gain = chol.solve(&ph.transpose()).transpose();
        let i_kh = DMatrix::<f64>::identity(nx, nx) - &gain * &hmat;
        let mean = &self.mean + &gain * innovation;
        let cov = &i_kh * &self.covariance * i_kh.transpose() + &gain * gain.transpose() * self.r;
        let cov = (&cov + cov.transpose()) * 0.5;
        if !mean.iter().chain(cov.iter()).all(|x| x.is_finite()) {
            return Err(Error::Divergence("EKF produced non-finite values".into()));
        }
        self.mean = mean;
        self.covariance = cov;
        Ok(())
    }
}

/// Functional form of [`EkfState::predict`].
pub fn ekf_predict(mut state: EkfState, rel_velocities: &[Point], dt: f64) -> EkfState {
    state.predict(rel_velocities, dt);
    state
}

/// Functional form of [`EkfState::update`].
pub fn ekf_update(
    mut state: EkfState,
    topology: &NetworkTopology,
    ranges: &[f64],
    anchor_ranges: &[f64],
    anchor_positions: &[Point],
) -> Result<EkfState> {
    state.update(topology, ranges, anchor_ranges, anchor_positions)?;
    Ok(state)
}

/// Runs the filter over a stream: predict with the previous tick's
/// velocities, then update with the current ranges.
pub fn ekf_track(
    stream: &[MeasurementSample],
    topology: &NetworkTopology,
    dt: f64,
    config: &EkfConfig,
    sigma_init: f64,
    initial_positions: &[Point],
) -> Result<Vec<Vec<Point>>> {
    config.validate()?;
    let variance = config
        .initial_variance
        .unwrap_or((sigma_init * sigma_init).max(f64::MIN_POSITIVE));
    let mut state = EkfState::new(initial_positions, variance, config.q, config.r)?;
    let mut out = Vec::with_capacity(stream.len());
    let mut prev: Option<&MeasurementSample> = None;
    for sample in stream {
        if let Some(p) = prev {
            let steps = sample.tick.saturating_sub(p.tick).max(1);
            for _ in 0..steps {
                state.predict(&p.rel_velocities, dt);
            }
        }
        state.update(
            topology,
            &sample.ranges,
            &sample.anchor_ranges,
            &sample.anchor_positions,
        )?;
        out.push(state.positions());
        prev = Some(sample);
    }
    Ok(out)
}

/// One snapshot of ranges and anchor positions.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticProblem {
    pub sample: MeasurementSample,
}

impl StaticProblem {
    /// Drops the velocities of `sample`.
    pub fn from_sample(sample: &MeasurementSample) -> Self {
        StaticProblem {
            sample: without_velocities(sample),
        }
    }

    pub fn window(
        &self,
        topology: &NetworkTopology,
        dim: SpaceDim,
        dt: f64,
    ) -> Result<MeasurementWindow> {
        MeasurementWindow::from_samples(topology, dim, dt, std::slice::from_ref(&self.sample))
    }
}

fn without_velocities(sample: &MeasurementSample) -> MeasurementSample {
    let mut s = sample.clone();
    for v in &mut s.rel_velocities {
        v.fill(0.0);
    }
    s
}

fn require_anchor_links(topology: &NetworkTopology) -> Result<()> {
    if topology.link_count() == 0 {
        return Err(Error::Observability(
            "range-only localization needs at least one anchor link".into(),
        ));
    }
    Ok(())
}

/// Range-only fit of one snapshot: the windowed solver with `W = 1`.
pub fn static_localize(
    topology: &NetworkTopology,
    problem: &StaticProblem,
    dim: SpaceDim,
    init: &[Point],
    budget: IterationBudget,
) -> Result<(Vec<Point>, SolveReport)> {
    require_anchor_links(topology)?;
    if init.len() != topology.vehicle_count() || init.iter().any(|p| p.len() != dim.get()) {
        return Err(Error::contract("initial guess does not match the topology"));
    }
    let window = problem.window(topology, dim, 1.0)?;
    let deltas = window_deltas(topology, &window);
    let flat: Vec<f64> = init.iter().flat_map(|p| p.iter().copied()).collect();
    let z0 = StackedVariable::residual_free(topology, &deltas, &flat)?;
    let params = SolverParams::with_budget(topology, 1, dim, budget)?;
    let (z, report) = run_window(topology, &window, &z0, &params)?;
    let positions = (0..topology.vehicle_count())
        .map(|i| Point::from_column_slice(z.p_block(i)))
        .collect();
    Ok((positions, report))
}

/// Static localizer over a stream, warm-started from the previous tick.
///
/// This is the sliding-window tracker with a one-sample window fed
/// velocity-free samples, so the two share every line of solver code.
#[derive(Debug, Clone)]
pub struct StaticTracker {
    inner: Tracker,
}

impl StaticTracker {
    pub fn new(
        topology: &NetworkTopology,
        dim: SpaceDim,
        dt: f64,
        budget: IterationBudget,
        initial_positions: &[Point],
    ) -> Result<Self> {
        require_anchor_links(topology)?;
        Ok(StaticTracker {
            inner: Tracker::new(topology, dim, dt, 0, budget, initial_positions)?,
        })
    }

    pub fn push(&mut self, sample: &MeasurementSample) -> Result<TickEstimate> {
        self.inner.push(without_velocities(sample))
    }
}

pub fn static_track(
    stream: &[MeasurementSample],
    topology: &NetworkTopology,
    dim: SpaceDim,
    dt: f64,
    budget: IterationBudget,
    initial_positions: &[Point],
) -> Result<Vec<TickEstimate>> {
    let mut t = StaticTracker::new(topology, dim, dt, budget, initial_positions)?;
    stream.iter().map(|s| t.push(s)).collect()
}
