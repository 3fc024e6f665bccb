//! Ground truth and synthetic measurements for formation experiments.
//!
//! A formation follows a reference path (lap, lawnmower or descending helix)
//! with every vehicle held at fixed lateral and along-track offsets in the
//! path frame. Ground truth obeys discrete kinematics exactly:
//! `x(t+1) = x(t) + ΔT·(vᴿ(t) + v_f)`, where `v_f` is a constant current the
//! estimators never see.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{NetworkTopology, Point, SpaceDim};
use crate::problem::MeasurementSample;

/// Reference path shapes. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryKind {
    /// Two straight legs joined by semicircular ends.
    Lap { leg_length: f64, radius: f64 },
    /// Parallel legs joined by semicircular turns of diameter `spacing`.
    Lawnmower { leg_length: f64, spacing: f64 },
    /// Horizontal circle descending at `descent_rate` m/s.
    Helix { radius: f64, descent_rate: f64 },
}

impl TrajectoryKind {
    pub const DEFAULT_LAP: TrajectoryKind = TrajectoryKind::Lap {
        leg_length: 100.0,
        radius: 30.0,
    };
    pub const DEFAULT_LAWNMOWER: TrajectoryKind = TrajectoryKind::Lawnmower {
        leg_length: 100.0,
        spacing: 20.0,
    };
    pub const DEFAULT_HELIX: TrajectoryKind = TrajectoryKind::Helix {
        radius: 30.0,
        descent_rate: 0.1,
    };

    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Lap { .. } => "lap",
            TrajectoryKind::Lawnmower { .. } => "lawnmower",
            TrajectoryKind::Helix { .. } => "helix",
        }
    }

    /// Dimension this path lives in.
    pub fn dim(&self) -> SpaceDim {
        match self {
            TrajectoryKind::Helix { .. } => SpaceDim::SPATIAL,
            _ => SpaceDim::PLANAR,
        }
    }

    /// Lap perimeter, if this is a lap.
    pub fn lap_length(&self) -> Option<f64> {
        match *self {
            TrajectoryKind::Lap { leg_length, radius } => {
                Some(2.0 * leg_length + 2.0 * PI * radius)
            }
            _ => None,
        }
    }

    fn validate(&self, speed: f64, dim: SpaceDim) -> Result<()> {
        let params: [f64; 2] = match *self {
            TrajectoryKind::Lap { leg_length, radius } => [leg_length, radius],
            TrajectoryKind::Lawnmower {
                leg_length,
                spacing,
            } => [leg_length, spacing],
            TrajectoryKind::Helix {
                radius,
                descent_rate,
            } => {
                if descent_rate >= speed {
                    return Err(Error::Config(format!(
                        "helix descent rate {descent_rate} must be below speed {speed}"
                    )));
                }
                [radius, descent_rate]
            }
        };
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::Config(format!("speed {speed} must be positive")));
        }
        if params.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Config(format!(
                "{} shape parameters must be positive",
                self.name()
            )));
        }
        if dim != self.dim() {
            return Err(Error::Config(format!(
                "{} trajectory requires d = {}, got d = {}",
                self.name(),
                self.dim().get(),
                dim.get()
            )));
        }
        Ok(())
    }

    /// Reference position and unit horizontal heading at time `t` seconds.
    fn frame(&self, speed: f64, t: f64) -> ([f64; 3], [f64; 2]) {
        match *self {
            TrajectoryKind::Lap {
                leg_length: l,
                radius: r,
            } => {
                let perimeter = 2.0 * l + 2.0 * PI * r;
                let s = (speed * t).rem_euclid(perimeter);
                let arc = PI * r;
                if s < l {
                    ([s, 0.0, 0.0], [1.0, 0.0])
                } else if s < l + arc {
                    let th = (s - l) / r;
                    (
                        [l + r * th.sin(), r - r * th.cos(), 0.0],
                        [th.cos(), th.sin()],
                    )
                } else if s < 2.0 * l + arc {
                    ([l - (s - l - arc), 2.0 * r, 0.0], [-1.0, 0.0])
                } else {
                    let th = (s - 2.0 * l - arc) / r;
                    (
                        [-r * th.sin(), r + r * th.cos(), 0.0],
                        [-th.cos(), -th.sin()],
                    )
                }
            }
            TrajectoryKind::Lawnmower {
                leg_length: l,
                spacing,
            } => {
                let r = spacing / 2.0;
                let segment = l + PI * r;
                let s = speed * t;
                let k = (s / segment).floor();
                let u = s - k * segment;
                let y0 = k * spacing;
                let outbound = (k as i64) % 2 == 0;
                match (outbound, u < l) {
                    (true, true) => ([u, y0, 0.0], [1.0, 0.0]),
                    (false, true) => ([l - u, y0, 0.0], [-1.0, 0.0]),
                    (true, false) => {
                        let th = (u - l) / r;
                        (
                            [l + r * th.sin(), y0 + r - r * th.cos(), 0.0],
                            [th.cos(), th.sin()],
                        )
                    }
                    (false, false) => {
                        let th = (u - l) / r;
                        (
                            [-r * th.sin(), y0 + r - r * th.cos(), 0.0],
                            [-th.cos(), th.sin()],
                        )
                    }
                }
            }
            TrajectoryKind::Helix {
                radius: r,
                descent_rate,
            } => {
                let horizontal = (speed * speed - descent_rate * descent_rate).sqrt();
                let phi = horizontal * t / r;
                (
                    [r * phi.sin(), r - r * phi.cos(), -descent_rate * t],
                    [phi.cos(), phi.sin()],
                )
            }
        }
    }
}

/// Path shape plus cruise speed (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(rename = "shape")]
    pub kind: TrajectoryKind,
    pub speed: f64,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind) -> Self {
        TrajectorySpec { kind, speed: 1.0 }
    }
}

/// Vehicle slots relative to the path frame and which slots are anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormationConfig {
    /// Offset along the path's left normal, per slot (meters).
    pub lateral_offsets: Vec<f64>,
    /// Offset along the path heading, per slot (meters).
    pub along_track_offsets: Vec<f64>,
    /// Slots carrying GPS.
    pub anchors: Vec<usize>,
}

impl Default for FormationConfig {
    fn default() -> Self {
        FormationConfig {
            lateral_offsets: vec![-30.0, -10.0, 10.0, 30.0],
            // Outer slots trail the anchors; a straight line of four would
            // leave the along-track coordinate unobservable from ranges.
            along_track_offsets: vec![-20.0, 0.0, 0.0, -20.0],
            anchors: vec![1, 2],
        }
    }
}

impl FormationConfig {
    pub fn slot_count(&self) -> usize {
        self.lateral_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.slot_count();
        if n < 2 {
            return Err(Error::Config("formation needs at least two slots".into()));
        }
        if self.along_track_offsets.len() != n {
            return Err(Error::Config(
                "lateral and along-track offsets differ in length".into(),
            ));
        }
        if self
            .lateral_offsets
            .iter()
            .chain(&self.along_track_offsets)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Config("formation offsets must be finite".into()));
        }
        let mut a = self.anchors.clone();
        a.sort_unstable();
        a.dedup();
        if a.len() != self.anchors.len() || a.iter().any(|&k| k >= n) {
            return Err(Error::Config(
                "anchor slots must be distinct and in range".into(),
            ));
        }
        if a.len() == n {
            return Err(Error::Config("formation has no vehicle to localize".into()));
        }
        Ok(())
    }

    /// Slots that are localized, in vehicle-id order.
    pub fn vehicle_slots(&self) -> Vec<usize> {
        (0..self.slot_count())
            .filter(|s| !self.anchors.contains(s))
            .collect()
    }

    /// Anchor slots in anchor-id order.
    pub fn anchor_slots(&self) -> Vec<usize> {
        let mut a = self.anchors.clone();
        a.sort_unstable();
        a
    }

    /// Complete graph among the localized vehicles; every vehicle ranges to
    /// every anchor.
    pub fn topology(&self) -> Result<NetworkTopology> {
        self.validate()?;
        let n = self.vehicle_slots().len();
        let m = self.anchors.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let links = vec![(0..m).collect::<Vec<_>>(); n];
        NetworkTopology::new(n, m, &edges, &links)
    }
}

/// Range, velocity and initialization noise (standard deviations) and the
/// unknown constant current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_range: f64,
    pub sigma_vel: f64,
    pub sigma_init: f64,
    /// Current velocity `v_f` (m/s); empty means zero.
    pub current: Vec<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_range: 0.5,
            sigma_vel: 0.01,
            sigma_init: 2.0,
            current: Vec::new(),
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            sigma_range: 0.0,
            sigma_vel: 0.0,
            sigma_init: 0.0,
            current: Vec::new(),
        }
    }

    pub fn validate(&self, dim: SpaceDim) -> Result<()> {
        for (name, s) in [
            ("sigma_range", self.sigma_range),
            ("sigma_vel", self.sigma_vel),
            ("sigma_init", self.sigma_init),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be nonnegative, got {s}"
                )));
            }
        }
        if !self.current.is_empty() && self.current.len() != dim.get() {
            return Err(Error::Config(format!(
                "current has {} components, expected {}",
                self.current.len(),
                dim.get()
            )));
        }
        Ok(())
    }

    pub fn current_vector(&self, dim: SpaceDim) -> Point {
        if self.current.is_empty() {
            Point::zeros(dim.get())
        } else {
            Point::from_column_slice(&self.current)
        }
    }
}

/// True state of every formation slot at every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dim: SpaceDim,
    pub dt: f64,
    pub current: Point,
    /// `[tick][slot]`
    pub positions: Vec<Vec<Point>>,
    /// `[tick][slot]`, water-relative velocity applied from this tick to the next.
    pub rel_velocities: Vec<Vec<Point>>,
}

impl GroundTruth {
    pub fn ticks(&self) -> usize {
        self.positions.len()
    }
}

/// Samples the formation along the path and derives water-relative
/// velocities so that the discrete kinematics hold exactly.
pub fn generate_trajectory(
    spec: &TrajectorySpec,
    formation: &FormationConfig,
    dim: SpaceDim,
    duration_ticks: usize,
    dt: f64,
    current: &Point,
) -> Result<GroundTruth> {
    spec.kind.validate(spec.speed, dim)?;
    formation.validate()?;
    if duration_ticks == 0 {
        return Err(Error::Config("duration must be at least one tick".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!(
            "sampling interval {dt} must be positive"
        )));
    }
    if current.len() != dim.get() {
        return Err(Error::Config("current dimension mismatch".into()));
    }
    let d = dim.get();
    let target = |tick: usize, slot: usize| -> Point {
        let (c, h) = spec.kind.frame(spec.speed, tick as f64 * dt);
        let normal = [-h[1], h[0]];
        let lat = formation.lateral_offsets[slot];
        let along = formation.along_track_offsets[slot];
        let v = [
            c[0] + lat * normal[0] + along * h[0],
            c[1] + lat * normal[1] + along * h[1],
            c[2],
        ];
        Point::from_column_slice(&v[..d])
    };

    let slots = formation.slot_count();
    let mut positions = Vec::with_capacity(duration_ticks);
    let mut rel_velocities = Vec::with_capacity(duration_ticks);
    let mut x: Vec<Point> = (0..slots).map(|s| target(0, s)).collect();
    for tick in 0..duration_ticks {
        let v: Vec<Point> = (0..slots)
            .map(|s| (target(tick + 1, s) - &x[s]) / dt - current)
            .collect();
        positions.push(x.clone());
        for s in 0..slots {
            x[s] = &x[s] + (&v[s] + current) * dt;
        }
        rel_velocities.push(v);
    }
    Ok(GroundTruth {
        dim,
        dt,
        current: current.clone(),
        positions,
        rel_velocities,
    })
}

/// Purposes drawing from independent streams of one per-trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Ranges = 1,
    Velocities = 2,
    Initialization = 3,
}

/// Counter-based generator for `(seed, purpose)`.
pub fn stream_rng(seed: u64, purpose: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

fn gaussian(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("validated sigma"))
}

/// Noisy measurement stream for the localized vehicles.
///
/// One range draw per unordered pair or anchor link per tick, clamped at
/// zero; one velocity draw per vehicle per axis per tick. Anchor positions
/// are exact.
pub fn synthesize_measurements(
    truth: &GroundTruth,
    formation: &FormationConfig,
    topology: &NetworkTopology,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<MeasurementSample>> {
    noise.validate(truth.dim)?;
    let vehicles = formation.vehicle_slots();
    let anchors = formation.anchor_slots();
    if vehicles.len() != topology.vehicle_count() || anchors.len() != topology.anchor_count() {
        return Err(Error::Config(
            "topology does not match the formation".into(),
        ));
    }
    let mut range_rng = stream_rng(seed, RngStream::Ranges);
    let mut vel_rng = stream_rng(seed, RngStream::Velocities);
    let range_noise = gaussian(noise.sigma_range);
    let vel_noise = gaussian(noise.sigma_vel);
    let mut noisy_range = |true_range: f64| match &range_noise {
        Some(n) => (true_range + n.sample(&mut range_rng)).max(0.0),
        None => true_range,
    };

    let mut stream = Vec::with_capacity(truth.ticks());
    for (tick, (x, v)) in truth
        .positions
        .iter()
        .zip(&truth.rel_velocities)
        .enumerate()
    {
        let ranges = topology
            .edges()
            .iter()
            .map(|&(i, j)| noisy_range((&x[vehicles[i]] - &x[vehicles[j]]).norm()))
            .collect();
        let anchor_ranges = topology
            .links()
            .iter()
            .map(|l| noisy_range((&x[vehicles[l.vehicle]] - &x[anchors[l.anchor]]).norm()))
            .collect();
        let rel_velocities = vehicles
            .iter()
            .map(|&s| {
                let mut m = v[s].clone();
                if let Some(n) = &vel_noise {
                    for c in m.iter_mut() {
                        *c += n.sample(&mut vel_rng);
                    }
                }
                m
            })
            .collect();
        let anchor_positions = anchors.iter().map(|&s| x[s].clone()).collect();
        stream.push(MeasurementSample {
            tick,
            ranges,
            anchor_ranges,
            rel_velocities,
            anchor_positions,
        });
    }
    Ok(stream)
}

/// True initial positions of the localized vehicles plus `N(0, σ_init²·I)`.
pub fn perturbed_initial_positions(
    truth: &GroundTruth,
    formation: &FormationConfig,
    sigma_init: f64,
    seed: u64,
) -> Vec<Point> {
    let mut rng = stream_rng(seed, RngStream::Initialization);
    let noise = gaussian(sigma_init);
    formation
        .vehicle_slots()
        .iter()
        .map(|&s| {
            let mut p = truth.positions[0][s].clone();
            if let Some(n) = &noise {
                for c in p.iter_mut() {
                    *c += n.sample(&mut rng);
                }
            }
            p
        })
        .collect()
}

/// True positions of the localized vehicles, `[tick][vehicle]`.
pub fn vehicle_positions(truth: &GroundTruth, formation: &FormationConfig) -> Vec<Vec<Point>> {
    let slots = formation.vehicle_slots();
    truth
        .positions
        .iter()
        .map(|x| slots.iter().map(|&s| x[s].clone()).collect())
        .collect()
}

fn padded(v: &Point) -> [String; 3] {
    let mut out = [String::new(), String::new(), String::new()];
    for (o, x) in out.iter_mut().zip(v.iter()) {
        *o = x.to_string();
    }
    out
}

/// Writes `tick,slot,role,x,y,z,vx,vy,vz`; `z` columns are empty in 2-D.
pub fn write_truth_csv(
    path: &Path,
    truth: &GroundTruth,
    formation: &FormationConfig,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    w.write_record(["tick", "slot", "role", "x", "y", "z", "vx", "vy", "vz"])?;
    for (tick, (x, v)) in truth
        .positions
        .iter()
        .zip(&truth.rel_velocities)
        .enumerate()
    {
        for slot in 0..x.len() {
            let role = if formation.anchors.contains(&slot) {
                "anchor"
            } else {
                "vehicle"
            };
            let [px, py, pz] = padded(&x[slot]);
            let [vx, vy, vz] = padded(&v[slot]);
            w.write_record([
                tick.to_string(),
                slot.to_string(),
                role.to_string(),
                px,
                py,
                pz,
                vx,
                vy,
                vz,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `tick,kind,id,v0,v1,v2` with one row per measurement.
///
/// `kind` is `range` (id `i-j`), `anchor_range` (id `i-k`), `velocity`
/// (id `i`) or `anchor_position` (id `k`).
pub fn write_measurements_csv(
    path: &Path,
    stream: &[MeasurementSample],
    topology: &NetworkTopology,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["tick", "kind", "id", "v0", "v1", "v2"])?;
    let empty = String::new;
    for s in stream {
        let t = s.tick.to_string();
        for (e, &(i, j)) in topology.edges().iter().enumerate() {
            w.write_record([
                t.clone(),
                "range".into(),
                format!("{i}-{j}"),
                s.ranges[e].to_string(),
                empty(),
                empty(),
            ])?;
        }
        for (l, link) in topology.links().iter().enumerate() {
            w.write_record([
                t.clone(),
                "anchor_range".into(),
                format!("{}-{}", link.vehicle, link.anchor),
                s.anchor_ranges[l].to_string(),
                empty(),
                empty(),
            ])?;
        }
        for (i, v) in s.rel_velocities.iter().enumerate() {
            let [a, b, c] = padded(v);
            w.write_record([t.clone(), "velocity".into(), i.to_string(), a, b, c])?;
        }
        for (k, a) in s.anchor_positions.iter().enumerate() {
            let [x, y, z] = padded(a);
            w.write_record([t.clone(), "anchor_position".into(), k.to_string(), x, y, z])?;
        }
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::Serialization(e.to_string()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar_zero() -> Point {
        Point::zeros(2)
    }

    #[test]
    fn straight_leg_spacing() {
        let spec = TrajectorySpec::new(TrajectoryKind::DEFAULT_LAP);
        let f = FormationConfig {
            lateral_offsets: vec![-30.0, -10.0, 10.0, 30.0],
            along_track_offsets: vec![0.0; 4],
            anchors: vec![1, 2],
        };
        let truth =
            generate_trajectory(&spec, &f, SpaceDim::PLANAR, 50, 1.0, &planar_zero()).unwrap();
        for t in 0..49 {
            let step = (&truth.positions[t + 1][0] - &truth.positions[t][0]).norm();
            assert_relative_eq!(step, 1.0, epsilon = 1e-12);
        }
        let x = &truth.positions[10];
        for s in 0..3 {
            assert_relative_eq!((&x[s + 1] - &x[s]).norm(), 20.0, epsilon = 1e-12);
            assert_relative_eq!(x[s + 1][1] - x[s][1], 20.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lap_closes() {
        let kind = TrajectoryKind::DEFAULT_LAP;
        let period_ticks = 400;
        let spec = TrajectorySpec {
            kind,
            speed: kind.lap_length().unwrap() / period_ticks as f64,
        };
        let truth = generate_trajectory(
            &spec,
            &FormationConfig::default(),
            SpaceDim::PLANAR,
            period_ticks + 1,
            1.0,
            &planar_zero(),
        )
        .unwrap();
        for s in 0..4 {
            let gap = (&truth.positions[period_ticks][s] - &truth.positions[0][s]).norm();
            assert!(gap < 1e-9, "slot {s} misses start by {gap}");
        }
    }

    #[test]
    fn kinematics_hold_with_current() {
        let current = Point::from_vec(vec![0.1, -0.05]);
        for kind in [
            TrajectoryKind::DEFAULT_LAP,
            TrajectoryKind::DEFAULT_LAWNMOWER,
        ] {
            let truth = generate_trajectory(
                &TrajectorySpec::new(kind),
                &FormationConfig::default(),
                SpaceDim::PLANAR,
                300,
                0.5,
                &current,
            )
            .unwrap();
            for t in 0..299 {
                for s in 0..4 {
                    let next =
                        &truth.positions[t][s] + (&truth.rel_velocities[t][s] + &current) * 0.5;
                    assert_eq!(next, truth.positions[t + 1][s]);
                }
            }
        }
    }

    #[test]
    fn dead_reckoning_reproduces_truth_without_current() {
        let truth = generate_trajectory(
            &TrajectorySpec::new(TrajectoryKind::DEFAULT_HELIX),
            &FormationConfig::default(),
            SpaceDim::SPATIAL,
            200,
            1.0,
            &Point::zeros(3),
        )
        .unwrap();
        let mut x = truth.positions[0][0].clone();
        for t in 0..199 {
            x = &x + &truth.rel_velocities[t][0] * 1.0;
            assert_eq!(x, truth.positions[t + 1][0]);
        }
        // descends at the configured rate
        assert_relative_eq!(truth.positions[100][0][2], -10.0, epsilon = 1e-9);
    }

    #[test]
    fn dimension_rules() {
        let f = FormationConfig::default();
        let z2 = planar_zero();
        let helix = TrajectorySpec::new(TrajectoryKind::DEFAULT_HELIX);
        assert!(matches!(
            generate_trajectory(&helix, &f, SpaceDim::PLANAR, 10, 1.0, &z2),
            Err(Error::Config(_))
        ));
        let lap = TrajectorySpec::new(TrajectoryKind::DEFAULT_LAP);
        assert!(
            generate_trajectory(&lap, &f, SpaceDim::SPATIAL, 10, 1.0, &Point::zeros(3)).is_err()
        );
        let slow = TrajectorySpec {
            kind: TrajectoryKind::DEFAULT_LAP,
            speed: 0.0,
        };
        assert!(generate_trajectory(&slow, &f, SpaceDim::PLANAR, 10, 1.0, &z2).is_err());
    }

    #[test]
    fn formation_topology() {
        let f = FormationConfig::default();
        let t = f.topology().unwrap();
        assert_eq!(t.vehicle_count(), 2);
        assert_eq!(t.anchor_count(), 2);
        assert_eq!(t.edges(), &[(0, 1)]);
        assert_eq!(t.link_count(), 4);
        assert_eq!(f.vehicle_slots(), vec![0, 3]);

        let bad = FormationConfig {
            anchors: vec![0, 1, 2, 3],
            ..FormationConfig::default()
        };
        assert!(bad.topology().is_err());
    }

    fn lap_setup(
        noise: &NoiseConfig,
        ticks: usize,
    ) -> (GroundTruth, FormationConfig, NetworkTopology) {
        let f = FormationConfig::default();
        let truth = generate_trajectory(
            &TrajectorySpec::new(TrajectoryKind::DEFAULT_LAP),
            &f,
            SpaceDim::PLANAR,
            ticks,
            1.0,
            &noise.current_vector(SpaceDim::PLANAR),
        )
        .unwrap();
        let t = f.topology().unwrap();
        (truth, f, t)
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let noise = NoiseConfig::noiseless();
        let (truth, f, t) = lap_setup(&noise, 20);
        let stream = synthesize_measurements(&truth, &f, &t, &noise, 7).unwrap();
        let x = vehicle_positions(&truth, &f);
        for s in &stream {
            assert_eq!(s.ranges[0], (&x[s.tick][0] - &x[s.tick][1]).norm());
            assert_eq!(s.rel_velocities[1], truth.rel_velocities[s.tick][3]);
            assert_eq!(s.anchor_positions[0], truth.positions[s.tick][1]);
        }
        let init = perturbed_initial_positions(&truth, &f, 0.0, 7);
        assert_eq!(init[0], truth.positions[0][0]);
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let noise = NoiseConfig::default();
        let (truth, f, t) = lap_setup(&noise, 30);
        let a = synthesize_measurements(&truth, &f, &t, &noise, 42).unwrap();
        let b = synthesize_measurements(&truth, &f, &t, &noise, 42).unwrap();
        let c = synthesize_measurements(&truth, &f, &t, &noise, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn range_noise_has_configured_spread() {
        let noise = NoiseConfig::default();
        let (truth, f, t) = lap_setup(&noise, 1);
        let x = vehicle_positions(&truth, &f);
        let true_range = (&x[0][0] - &x[0][1]).norm();
        let mut errors = Vec::with_capacity(100_000);
        for seed in 0..100_000u64 {
            let s = synthesize_measurements(&truth, &f, &t, &noise, seed).unwrap();
            errors.push(s[0].ranges[0] - true_range);
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 0.5).abs() <= 0.02 * 0.5, "sample std {std}");
    }

    #[test]
    fn csv_exports() {
        let noise = NoiseConfig::default();
        let (truth, f, t) = lap_setup(&noise, 3);
        let stream = synthesize_measurements(&truth, &f, &t, &noise, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_truth_csv(&dir.path().join("truth.csv"), &truth, &f).unwrap();
        write_measurements_csv(&dir.path().join("meas.csv"), &stream, &t).unwrap();
        let truth_csv = std::fs::read_to_string(dir.path().join("truth.csv")).unwrap();
        assert_eq!(truth_csv.lines().count(), 1 + 3 * 4);
        let meas = std::fs::read_to_string(dir.path().join("meas.csv")).unwrap();
        // 1 range + 4 anchor ranges + 2 velocities + 2 anchor positions per tick
        assert_eq!(meas.lines().count(), 1 + 3 * 9);
        assert!(meas.lines().nth(1).unwrap().starts_with("0,range,0-1,"));
    }
}
