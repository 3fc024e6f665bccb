//! The windowed maximum-likelihood problem.
//!
//! Over a window of `W` samples, every vehicle position is parameterized by
//! its position `p_i` at the first sample plus dead-reckoned displacement from
//! measured water-relative velocity. Ranges are lifted into auxiliary
//! direction variables constrained to spheres, which turns the range misfit
//! into a quadratic in `z = (p, y, w)` over a product of spheres:
//!
//! ```text
//! F(z) = ½ Σ_e Σ_τ ‖p_lo − p_hi + Δv_e(τ) − y_e(τ)‖²  +  ½ Σ_(i,k) Σ_τ ‖p_i − α_ik(τ) − w_ik(τ)‖²
//! ```
//!
//! All operators are matrix-free. Edge variables `y_e` are oriented from the
//! lower-numbered endpoint to the higher one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{norm, NetworkTopology, Point, SpaceDim};

/// Known trajectory of one anchor over a window: `a_k(τ) = q_k + u_k(τ)·ΔT`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorTrack {
    pub base: Point,
    pub cumulative_velocity: Vec<Point>,
}

impl AnchorTrack {
    /// Decomposes sampled anchor positions relative to the first sample.
    pub fn from_positions(positions: &[Point], dt: f64) -> Self {
        let base = positions[0].clone();
        let cumulative_velocity = positions.iter().map(|a| (a - &base) / dt).collect();
        AnchorTrack {
            base,
            cumulative_velocity,
        }
    }

    pub fn position(&self, tau: usize, dt: f64) -> Point {
        &self.base + &self.cumulative_velocity[tau] * dt
    }
}

/// One tick of measurements as delivered by the sensor stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSample {
    pub tick: usize,
    /// One range per topology edge.
    pub ranges: Vec<f64>,
    /// One range per anchor link, in canonical link order.
    pub anchor_ranges: Vec<f64>,
    /// Measured water-relative velocity per vehicle, applied from this tick to the next.
    pub rel_velocities: Vec<Point>,
    /// GPS-referenced anchor positions at this tick.
    pub anchor_positions: Vec<Point>,
}

/// All measurements for one estimation window of `W` consecutive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow {
    dim: SpaceDim,
    dt: f64,
    len: usize,
    ranges: Vec<Vec<f64>>,
    anchor_ranges: Vec<Vec<f64>>,
    rel_velocities: Vec<Vec<Point>>,
    anchors: Vec<AnchorTrack>,
}

fn check_range(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::contract(format!(
            "{what} range {v} is not a finite nonnegative value"
        )));
    }
    Ok(())
}

fn check_vec(v: &Point, dim: SpaceDim, what: &str) -> Result<()> {
    if v.len() != dim.get() {
        return Err(Error::contract(format!(
            "{what} has dimension {}, expected {}",
            v.len(),
            dim.get()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract(format!("{what} is not finite")));
    }
    Ok(())
}

impl MeasurementWindow {
    /// Validates and assembles a window.
    ///
    /// `ranges` is indexed `[edge][τ]`, `anchor_ranges` `[link][τ]`,
    /// `rel_velocities` `[τ][vehicle]`.
    pub fn new(
        topology: &NetworkTopology,
        dim: SpaceDim,
        dt: f64,
        ranges: Vec<Vec<f64>>,
        anchor_ranges: Vec<Vec<f64>>,
        rel_velocities: Vec<Vec<Point>>,
        anchors: Vec<AnchorTrack>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "sampling interval {dt} must be positive"
            )));
        }
        let len = rel_velocities.len();
        if len == 0 {
            return Err(Error::contract("window has no samples"));
        }
        if ranges.len() != topology.edge_count() {
            return Err(Error::contract(format!(
                "{} edge range series for {} edges",
                ranges.len(),
                topology.edge_count()
            )));
        }
        if anchor_ranges.len() != topology.link_count() {
            return Err(Error::contract(format!(
                "{} anchor range series for {} links",
                anchor_ranges.len(),
                topology.link_count()
            )));
        }
        if anchors.len() != topology.anchor_count() {
            return Err(Error::contract(format!(
                "{} anchor tracks for {} anchors",
                anchors.len(),
                topology.anchor_count()
            )));
        }
        for series in ranges.iter().chain(&anchor_ranges) {
            if series.len() != len {
                return Err(Error::contract(format!(
                    "range series of length {}, window length {len}",
                    series.len()
                )));
            }
            for &r in series {
                check_range(r, "measured")?;
            }
        }
        for sample in &rel_velocities {
            if sample.len() != topology.vehicle_count() {
                return Err(Error::contract(
                    "velocity sample does not cover every vehicle",
                ));
            }
            for v in sample {
                check_vec(v, dim, "relative velocity")?;
            }
        }
        for a in &anchors {
            check_vec(&a.base, dim, "anchor base position")?;
            if a.cumulative_velocity.len() != len {
                return Err(Error::contract(
                    "anchor track length differs from window length",
                ));
            }
            for u in &a.cumulative_velocity {
                check_vec(u, dim, "anchor cumulative velocity")?;
            }
        }
        Ok(MeasurementWindow {
            dim,
            dt,
            len,
            ranges,
            anchor_ranges,
            rel_velocities,
            anchors,
        })
    }

    /// Builds a window from consecutive stream samples.
    pub fn from_samples(
        topology: &NetworkTopology,
        dim: SpaceDim,
        dt: f64,
        samples: &[MeasurementSample],
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::contract("window has no samples"));
        }
        for s in samples {
            if s.ranges.len() != topology.edge_count()
                || s.anchor_ranges.len() != topology.link_count()
                || s.anchor_positions.len() != topology.anchor_count()
            {
                return Err(Error::contract(format!(
                    "sample at tick {} does not match the topology",
                    s.tick
                )));
            }
        }
        let ranges = (0..topology.edge_count())
            .map(|e| samples.iter().map(|s| s.ranges[e]).collect())
            .collect();
        let anchor_ranges = (0..topology.link_count())
            .map(|l| samples.iter().map(|s| s.anchor_ranges[l]).collect())
            .collect();
        let rel_velocities = samples.iter().map(|s| s.rel_velocities.clone()).collect();
        let anchors = (0..topology.anchor_count())
            .map(|k| {
                let track: Vec<Point> = samples
                    .iter()
                    .map(|s| s.anchor_positions[k].clone())
                    .collect();
                AnchorTrack::from_positions(&track, dt)
            })
            .collect();
        Self::new(
            topology,
            dim,
            dt,
            ranges,
            anchor_ranges,
            rel_velocities,
            anchors,
        )
    }

    pub fn dim(&self) -> SpaceDim {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of samples `W`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self, edge: usize, tau: usize) -> f64 {
        self.ranges[edge][tau]
    }

    pub fn anchor_range(&self, link: usize, tau: usize) -> f64 {
        self.anchor_ranges[link][tau]
    }

    pub fn rel_velocity(&self, tau: usize, vehicle: usize) -> &Point {
        &self.rel_velocities[tau][vehicle]
    }

    pub fn anchor(&self, k: usize) -> &AnchorTrack {
        &self.anchors[k]
    }

    pub fn anchor_position(&self, k: usize, tau: usize) -> Point {
        self.anchors[k].position(tau, self.dt)
    }

    /// Copy of this window with every relative velocity set to zero.
    pub fn without_velocities(&self) -> Self {
        let mut out = self.clone();
        for sample in &mut out.rel_velocities {
            for v in sample {
                v.fill(0.0);
            }
        }
        out
    }
}

/// Running sums of relative velocity, `v_i(τ) = Σ_{s<τ} v_iᴿ(s)`, so that
/// `x_i(τ) = p_i + v_i(τ)·ΔT` and `x_i` equals `p_i` at the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeVelocity {
    per_sample: Vec<Vec<Point>>,
}

impl CumulativeVelocity {
    pub fn at(&self, tau: usize, vehicle: usize) -> &Point {
        &self.per_sample[tau][vehicle]
    }

    pub fn len(&self) -> usize {
        self.per_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample.is_empty()
    }
}

pub fn cumulative_velocities(window: &MeasurementWindow) -> CumulativeVelocity {
    let n = window.rel_velocities[0].len();
    let d = window.dim.get();
    let mut per_sample = Vec::with_capacity(window.len);
    let mut acc = vec![Point::zeros(d); n];
    for tau in 0..window.len {
        per_sample.push(acc.clone());
        for (sum, v) in acc.iter_mut().zip(&window.rel_velocities[tau]) {
            *sum += v;
        }
    }
    CumulativeVelocity { per_sample }
}

/// Data terms of the stacked quadratic, laid out exactly like the `y` and
/// `w` blocks of [`StackedVariable`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDeltas {
    dim: usize,
    len: usize,
    /// `(v_lo(τ) − v_hi(τ))·ΔT` per edge per sample.
    dv: Vec<f64>,
    /// `q_k − (v_i(τ) − u_k(τ))·ΔT` per anchor link per sample.
    alpha: Vec<f64>,
}

impl WindowDeltas {
    /// All-zero data terms; the gradient then reduces to `z ↦ Mz`.
    pub fn zeros(topology: &NetworkTopology, len: usize, dim: SpaceDim) -> Self {
        let d = dim.get();
        WindowDeltas {
            dim: d,
            len,
            dv: vec![0.0; topology.edge_count() * len * d],
            alpha: vec![0.0; topology.link_count() * len * d],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn dv(&self, edge: usize, tau: usize) -> &[f64] {
        let o = (edge * self.len + tau) * self.dim;
        &self.dv[o..o + self.dim]
    }

    #[inline]
    pub fn alpha(&self, link: usize, tau: usize) -> &[f64] {
        let o = (link * self.len + tau) * self.dim;
        &self.alpha[o..o + self.dim]
    }

    pub fn dv_flat(&self) -> &[f64] {
        &self.dv
    }

    pub fn alpha_flat(&self) -> &[f64] {
        &self.alpha
    }
}

pub fn window_deltas(topology: &NetworkTopology, window: &MeasurementWindow) -> WindowDeltas {
    let cv = cumulative_velocities(window);
    let d = window.dim.get();
    let w = window.len;
    let dt = window.dt;
    let mut out = WindowDeltas::zeros(topology, w, window.dim);
    for (e, &(lo, hi)) in topology.edges().iter().enumerate() {
        for tau in 0..w {
            let o = (e * w + tau) * d;
            let (vl, vh) = (cv.at(tau, lo), cv.at(tau, hi));
            for c in 0..d {
                out.dv[o + c] = (vl[c] - vh[c]) * dt;
            }
        }
    }
    for (l, link) in topology.links().iter().enumerate() {
        let track = window.anchor(link.anchor);
        for tau in 0..w {
            let o = (l * w + tau) * d;
            let vi = cv.at(tau, link.vehicle);
            let uk = &track.cumulative_velocity[tau];
            for c in 0..d {
                out.alpha[o + c] = track.base[c] - (vi[c] - uk[c]) * dt;
            }
        }
    }
    out
}

/// Optimization variable `z = (p, y, w)` over one window, stored in flat
/// buffers: `p` as `[vehicle][c]`, `y` as `[edge][τ][c]`, `w` as `[link][τ][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedVariable {
    dim: usize,
    len: usize,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl StackedVariable {
    pub fn zeros(topology: &NetworkTopology, len: usize, dim: SpaceDim) -> Self {
        let d = dim.get();
        StackedVariable {
            dim: d,
            len,
            p: vec![0.0; topology.vehicle_count() * d],
            y: vec![0.0; topology.edge_count() * len * d],
            w: vec![0.0; topology.link_count() * len * d],
        }
    }

    /// Point with the given positions whose edge and anchor residuals all vanish.
    /// Not in the constraint set unless the data are noiseless.
    pub fn residual_free(
        topology: &NetworkTopology,
        deltas: &WindowDeltas,
        positions: &[f64],
    ) -> Result<Self> {
        let dim = SpaceDim::new(deltas.dim)?;
        let mut z = Self::zeros(topology, deltas.len, dim);
        if positions.len() != z.p.len() {
            return Err(Error::contract(
                "position vector does not match the topology",
            ));
        }
        z.p.copy_from_slice(positions);
        let d = z.dim;
        for (e, &(lo, hi)) in topology.edges().iter().enumerate() {
            for tau in 0..z.len {
                let dv = deltas.dv(e, tau);
                for c in 0..d {
                    let v = positions[lo * d + c] - positions[hi * d + c] + dv[c];
                    z.y[(e * z.len + tau) * d + c] = v;
                }
            }
        }
        for (l, link) in topology.links().iter().enumerate() {
            for tau in 0..z.len {
                let a = deltas.alpha(l, tau);
                for c in 0..d {
                    z.w[(l * z.len + tau) * d + c] = positions[link.vehicle * d + c] - a[c];
                }
            }
        }
        Ok(z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Window length `W`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty() && self.y.is_empty() && self.w.is_empty()
    }

    /// Total number of scalars `d·(n + W·|edges| + W·|links|)`.
    pub fn scalar_len(&self) -> usize {
        self.p.len() + self.y.len() + self.w.len()
    }

    #[inline]
    pub fn p_block(&self, i: usize) -> &[f64] {
        &self.p[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn p_block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.p[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn y_block(&self, e: usize, tau: usize) -> &[f64] {
        let o = (e * self.len + tau) * self.dim;
        &self.y[o..o + self.dim]
    }

    #[inline]
    pub fn y_block_mut(&mut self, e: usize, tau: usize) -> &mut [f64] {
        let o = (e * self.len + tau) * self.dim;
        &mut self.y[o..o + self.dim]
    }

    #[inline]
    pub fn w_block(&self, l: usize, tau: usize) -> &[f64] {
        let o = (l * self.len + tau) * self.dim;
        &self.w[o..o + self.dim]
    }

    #[inline]
    pub fn w_block_mut(&mut self, l: usize, tau: usize) -> &mut [f64] {
        let o = (l * self.len + tau) * self.dim;
        &mut self.w[o..o + self.dim]
    }

    /// Concatenation `[p; y; w]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.scalar_len());
        v.extend_from_slice(&self.p);
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.w);
        v
    }

    /// Inverse of [`to_flat`](Self::to_flat) for a variable of this shape.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.scalar_len() {
            return Err(Error::contract(
                "flat vector length does not match variable shape",
            ));
        }
        let (np, ny) = (self.p.len(), self.y.len());
        Ok(StackedVariable {
            dim: self.dim,
            len: self.len,
            p: flat[..np].to_vec(),
            y: flat[np..np + ny].to_vec(),
            w: flat[np + ny..].to_vec(),
        })
    }

    fn scalars(&self) -> impl Iterator<Item = &f64> {
        self.p.iter().chain(&self.y).chain(&self.w)
    }

    pub fn norm(&self) -> f64 {
        self.scalars().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.scalars()
            .zip(other.scalars())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.scalars()
            .zip(other.scalars())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.scalars().all(|x| x.is_finite())
    }

    /// Errors unless this variable has the shape implied by `topology` and `len`.
    pub fn check_shape(&self, topology: &NetworkTopology, len: usize) -> Result<()> {
        let d = self.dim;
        if self.len != len
            || self.p.len() != topology.vehicle_count() * d
            || self.y.len() != topology.edge_count() * len * d
            || self.w.len() != topology.link_count() * len * d
        {
            return Err(Error::contract(format!(
                "stacked variable shape (W={}, |p|={}, |y|={}, |w|={}) does not match topology with W={len}",
                self.len,
                self.p.len(),
                self.y.len(),
                self.w.len()
            )));
        }
        Ok(())
    }
}

fn check_deltas(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
) -> Result<()> {
    z.check_shape(topology, deltas.len)?;
    if deltas.dim != z.dim {
        return Err(Error::contract(
            "data terms and variable differ in dimension",
        ));
    }
    Ok(())
}

/// Original range misfit over the window for explicit positions `x[τ][i]`.
pub fn cost_original(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    x: &[Vec<Point>],
) -> Result<f64> {
    if x.len() != window.len {
        return Err(Error::contract(format!(
            "{} position samples for a window of {}",
            x.len(),
            window.len
        )));
    }
    let d = window.dim.get();
    let mut cost = 0.0;
    for (tau, xs) in x.iter().enumerate() {
        if xs.len() != topology.vehicle_count() || xs.iter().any(|v| v.len() != d) {
            return Err(Error::contract("position sample has the wrong shape"));
        }
        for (e, &(i, j)) in topology.edges().iter().enumerate() {
            let r = (&xs[i] - &xs[j]).norm() - window.range(e, tau);
            cost += 0.5 * r * r;
        }
        for (l, link) in topology.links().iter().enumerate() {
            let a = window.anchor_position(link.anchor, tau);
            let r = (&xs[link.vehicle] - a).norm() - window.anchor_range(l, tau);
            cost += 0.5 * r * r;
        }
    }
    Ok(cost)
}

/// Visits every edge residual `p_lo − p_hi + Δv_e(τ) − y_e(τ)` and every
/// anchor residual `p_i − α_ik(τ) − w_ik(τ)`.
fn for_each_residual(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
    mut edge: impl FnMut(usize, usize, &[f64]),
    mut link: impl FnMut(usize, usize, &[f64]),
) {
    let d = z.dim;
    let mut r = [0.0f64; 3];
    for (e, &(lo, hi)) in topology.edges().iter().enumerate() {
        let (pl, ph) = (z.p_block(lo), z.p_block(hi));
        for tau in 0..z.len {
            let (dv, y) = (deltas.dv(e, tau), z.y_block(e, tau));
            for c in 0..d {
                r[c] = pl[c] - ph[c] + dv[c] - y[c];
            }
            edge(e, tau, &r[..d]);
        }
    }
    for (l, lk) in topology.links().iter().enumerate() {
        let pi = z.p_block(lk.vehicle);
        for tau in 0..z.len {
            let (a, w) = (deltas.alpha(l, tau), z.w_block(l, tau));
            for c in 0..d {
                r[c] = pi[c] - a[c] - w[c];
            }
            link(l, tau, &r[..d]);
        }
    }
}

/// Edge and anchor parts of the stacked cost, reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParts {
    pub edges: f64,
    pub anchors: f64,
}

impl CostParts {
    pub fn total(&self) -> f64 {
        self.edges + self.anchors
    }
}

pub fn cost_parts(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
) -> Result<CostParts> {
    check_deltas(topology, z, deltas)?;
    let mut parts = CostParts {
        edges: 0.0,
        anchors: 0.0,
    };
    let sq = |r: &[f64]| 0.5 * r.iter().map(|x| x * x).sum::<f64>();
    let mut anchors = 0.0;
    for_each_residual(
        topology,
        z,
        deltas,
        |_, _, r| parts.edges += sq(r),
        |_, _, r| anchors += sq(r),
    );
    parts.anchors = anchors;
    Ok(parts)
}

/// Full stacked residual `½‖DAp + Δv − y‖² + ½‖Ep − α − w‖²`.
///
/// This differs from `½zᵀMz − bᵀz` only by the constant `½(‖Δv‖² + ‖α‖²)`.
pub fn cost_stacked(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
) -> Result<f64> {
    cost_parts(topology, z, deltas).map(|c| c.total())
}

/// Edge residual vectors `p_lo − p_hi + Δv_e(τ) − y_e(τ)`, laid out like `y`.
pub fn edge_residuals(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
) -> Result<Vec<f64>> {
    check_deltas(topology, z, deltas)?;
    let mut out = Vec::with_capacity(z.y.len());
    for_each_residual(
        topology,
        z,
        deltas,
        |_, _, r| out.extend_from_slice(r),
        |_, _, _| {},
    );
    Ok(out)
}

/// `∇F(z) = Mz − b`, evaluated without forming `M`.
pub fn gradient(
    topology: &NetworkTopology,
    z: &StackedVariable,
    deltas: &WindowDeltas,
) -> Result<StackedVariable> {
    check_deltas(topology, z, deltas)?;
    let d = z.dim;
    let len = z.len;
    let mut g = StackedVariable {
        dim: d,
        len,
        p: vec![0.0; z.p.len()],
        y: vec![0.0; z.y.len()],
        w: vec![0.0; z.w.len()],
    };
    for (e, &(lo, hi)) in topology.edges().iter().enumerate() {
        for tau in 0..len {
            let o = (e * len + tau) * d;
            let (dv, y) = (deltas.dv(e, tau), z.y_block(e, tau));
            for c in 0..d {
                let r = z.p[lo * d + c] - z.p[hi * d + c] + dv[c] - y[c];
                g.p[lo * d + c] += r;
                g.p[hi * d + c] -= r;
                g.y[o + c] = -r;
            }
        }
    }
    for (l, link) in topology.links().iter().enumerate() {
        let i = link.vehicle;
        for tau in 0..len {
            let o = (l * len + tau) * d;
            let (a, w) = (deltas.alpha(l, tau), z.w_block(l, tau));
            for c in 0..d {
                let r = z.p[i * d + c] - a[c] - w[c];
                g.p[i * d + c] += r;
                g.w[o + c] = -r;
            }
        }
    }
    Ok(g)
}

/// The quadratic form's operator `z ↦ Mz`.
pub fn apply_quadratic(topology: &NetworkTopology, z: &StackedVariable) -> Result<StackedVariable> {
    let dim = SpaceDim::new(z.dim)?;
    gradient(topology, z, &WindowDeltas::zeros(topology, z.len, dim))
}

/// Scales `v` onto the sphere of the given radius. A zero input maps to
/// `radius·tie_break`; a zero radius collapses everything to the origin.
#[inline]
pub fn project_block(v: &mut [f64], radius: f64, tie_break: &[f64]) {
    if radius == 0.0 {
        v.fill(0.0);
        return;
    }
    let n = norm(v);
    if n == 0.0 {
        for (x, t) in v.iter_mut().zip(tie_break) {
            *x = radius * t;
        }
    } else {
        let s = radius / n;
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

/// Projection onto the product of spheres `‖y_e(τ)‖ = d_e(τ)`, `‖w_l(τ)‖ = r_l(τ)`.
/// Positions pass through unchanged.
pub fn project_constraints(
    z: &StackedVariable,
    window: &MeasurementWindow,
    tie_break: &[f64],
) -> StackedVariable {
    let mut out = z.clone();
    project_in_place(&mut out, window, tie_break);
    out
}

pub fn project_in_place(z: &mut StackedVariable, window: &MeasurementWindow, tie_break: &[f64]) {
    let len = z.len;
    for e in 0..window.ranges.len() {
        for tau in 0..len {
            project_block(z.y_block_mut(e, tau), window.range(e, tau), tie_break);
        }
    }
    for l in 0..window.anchor_ranges.len() {
        for tau in 0..len {
            project_block(
                z.w_block_mut(l, tau),
                window.anchor_range(l, tau),
                tie_break,
            );
        }
    }
}

/// Step constant `W·(2·δmax + maxᵢ|𝒜ᵢ|) + 2`, which bounds the largest
/// eigenvalue of `M` for a window of `W` samples.
pub fn lipschitz_bound(topology: &NetworkTopology, window_len: usize) -> Result<f64> {
    if window_len == 0 {
        return Err(Error::Parameter("window length must be at least 1".into()));
    }
    if topology.vehicle_count() == 0 {
        return Err(Error::Topology("empty topology".into()));
    }
    let w = window_len as f64;
    Ok(w * (2 * topology.max_degree() + topology.max_anchor_degree()) as f64 + 2.0)
}

/// Per-node coefficient `βᵢ = (L − W·(δᵢ + |𝒜ᵢ|)) / L` on `p_i` in the
/// distributed position update.
pub fn beta_coefficients(
    topology: &NetworkTopology,
    window_len: usize,
    lipschitz: f64,
) -> Result<Vec<f64>> {
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::Parameter(format!(
            "Lipschitz constant {lipschitz} must be positive"
        )));
    }
    let w = window_len as f64;
    (0..topology.vehicle_count())
        .map(|i| {
            let load = w * (topology.degree(i) + topology.anchor_degree(i)) as f64;
            let beta = (lipschitz - load) / lipschitz;
            if beta > 0.0 && beta <= 1.0 {
                Ok(beta)
            } else {
                Err(Error::Parameter(format!(
                    "Lipschitz constant {lipschitz} too small: beta for vehicle {i} is {beta}"
                )))
            }
        })
        .collect()
}

/// Step size, node coefficients and stopping budget for one window solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub lipschitz: f64,
    pub beta: Vec<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub tie_break: Point,
}

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Iteration budget that does not depend on topology; resolved into
/// [`SolverParams`] once the window length is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationBudget {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for IterationBudget {
    fn default() -> Self {
        IterationBudget {
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl SolverParams {
    /// Default parameters: `L` from [`lipschitz_bound`], `e₁` tie-break.
    pub fn for_window(
        topology: &NetworkTopology,
        window_len: usize,
        dim: SpaceDim,
    ) -> Result<Self> {
        Self::with_budget(topology, window_len, dim, IterationBudget::default())
    }

    pub fn with_budget(
        topology: &NetworkTopology,
        window_len: usize,
        dim: SpaceDim,
        budget: IterationBudget,
    ) -> Result<Self> {
        let lipschitz = lipschitz_bound(topology, window_len)?;
        let beta = beta_coefficients(topology, window_len, lipschitz)?;
        let params = SolverParams {
            lipschitz,
            beta,
            max_iters: budget.max_iters,
            rel_tol: budget.rel_tol,
            tie_break: dim.first_axis(),
        };
        params.validate(topology, window_len)?;
        Ok(params)
    }

    pub fn validate(&self, topology: &NetworkTopology, window_len: usize) -> Result<()> {
        let bound = lipschitz_bound(topology, window_len)?;
        if self.lipschitz.is_nan() || self.lipschitz < bound {
            return Err(Error::Parameter(format!(
                "Lipschitz constant {} below bound {bound}",
                self.lipschitz
            )));
        }
        if self.beta.len() != topology.vehicle_count()
            || self.beta.iter().any(|&b| !(b > 0.0 && b <= 1.0))
        {
            return Err(Error::Parameter(
                "beta coefficients must lie in (0, 1]".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::Parameter("rel_tol must be positive".into()));
        }
        let t = norm(self.tie_break.as_slice());
        if (t - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(
                "tie-break direction must be a unit vector".into(),
            ));
        }
        Ok(())
    }
}

/// Matrix-free centralized step `P_𝒵(z − ∇F(z)/L)`.
pub fn projected_gradient_step(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    deltas: &WindowDeltas,
    z: &StackedVariable,
    lipschitz: f64,
    tie_break: &[f64],
) -> Result<StackedVariable> {
    let g = gradient(topology, z, deltas)?;
    let step = 1.0 / lipschitz;
    let mut next = z.clone();
    for (x, gx) in next
        .p
        .iter_mut()
        .chain(next.y.iter_mut())
        .chain(next.w.iter_mut())
        .zip(g.p.iter().chain(&g.y).chain(&g.w))
    {
        *x -= step * gx;
    }
    project_in_place(&mut next, window, tie_break);
    Ok(next)
}

/// Stationarity measure `‖z − P_𝒵(z − ∇F(z)/L)‖`.
pub fn fixed_point_residual(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    deltas: &WindowDeltas,
    z: &StackedVariable,
    lipschitz: f64,
    tie_break: &[f64],
) -> Result<f64> {
    let next = projected_gradient_step(topology, window, deltas, z, lipschitz, tie_break)?;
    Ok(z.distance(&next))
}

/// Largest eigenvalue of the implicit `M` by power iteration on the
/// matrix-free operator, with a seeded random start vector.
pub fn spectral_radius_estimate(
    topology: &NetworkTopology,
    window_len: usize,
    dim: SpaceDim,
    rel_tol: f64,
    max_iters: usize,
) -> Result<f64> {
    let mut v = StackedVariable::zeros(topology, window_len, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut flat: Vec<f64> = (0..v.scalar_len())
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let nrm = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
    flat.iter_mut().for_each(|x| *x /= nrm);
    v = v.with_flat(&flat)?;
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let mv = apply_quadratic(topology, &v)?;
        let mv_flat = mv.to_flat();
        let vf = v.to_flat();
        let rayleigh: f64 = vf.iter().zip(&mv_flat).map(|(a, b)| a * b).sum();
        let nrm = mv.norm();
        if nrm == 0.0 {
            return Ok(0.0);
        }
        let next: Vec<f64> = mv_flat.iter().map(|x| x / nrm).collect();
        v = v.with_flat(&next)?;
        if (rayleigh - lambda).abs() <= rel_tol * rayleigh.abs() {
            return Ok(rayleigh);
        }
        lambda = rayleigh;
    }
    Ok(lambda)
}
