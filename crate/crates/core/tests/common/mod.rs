//! Seeded random instances shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwloc::diesel::NodeState;
use uwloc::geom::IncidenceSign;
use uwloc::problem::{
    window_deltas, AnchorTrack, MeasurementWindow, SolverParams, StackedVariable, WindowDeltas,
};
use uwloc::{NetworkTopology, Point, SpaceDim};

pub struct Instance {
    pub topology: NetworkTopology,
    pub window: MeasurementWindow,
    pub deltas: WindowDeltas,
    pub dim: SpaceDim,
    /// True positions `[τ][vehicle]` the ranges were generated from.
    pub truth: Vec<Vec<Point>>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Point {
    Point::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}

/// Connected random graph on `n` vehicles with up to `max_anchors` anchors.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, max_anchors: usize) -> NetworkTopology {
    let m = if n == 1 {
        rng.random_range(1..=max_anchors.max(1))
    } else {
        rng.random_range(0..=max_anchors)
    };
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !edges.contains(&(i, j)) && rng.random_bool(0.3) {
                edges.push((i, j));
            }
        }
    }
    let mut links: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..m).filter(|_| rng.random_bool(0.5)).collect())
        .collect();
    if m > 0 && links.iter().all(|l| l.is_empty()) {
        links[rng.random_range(0..n)].push(rng.random_range(0..m));
    }
    NetworkTopology::new(n, m, &edges, &links).expect("valid random topology")
}

/// Instance with up to `max_n` vehicles, 2 anchors and `W ≤ max_w`, noisy
/// ranges around a random moving truth.
pub fn random_instance(seed: u64, max_n: usize, max_w: usize) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let topology = random_topology(&mut r, n, 2);
    let dim = if r.random_bool(0.5) {
        SpaceDim::PLANAR
    } else {
        SpaceDim::SPATIAL
    };
    let d = dim.get();
    let w = r.random_range(1..=max_w);
    let dt = r.random_range(0.5..2.0);
    let noise = 0.3;

    let rel_velocities: Vec<Vec<Point>> = (0..w)
        .map(|_| (0..n).map(|_| random_point(&mut r, d, 1.0)).collect())
        .collect();
    let start: Vec<Point> = (0..n).map(|_| random_point(&mut r, d, 20.0)).collect();
    let mut truth = vec![start];
    for tau in 1..w {
        let next = truth[tau - 1]
            .iter()
            .zip(&rel_velocities[tau - 1])
            .map(|(x, v)| x + v * dt)
            .collect();
        truth.push(next);
    }
    let anchors: Vec<AnchorTrack> = (0..topology.anchor_count())
        .map(|_| {
            let pts: Vec<Point> = (0..w).map(|_| random_point(&mut r, d, 20.0)).collect();
            AnchorTrack::from_positions(&pts, dt)
        })
        .collect();
    let mut noisy = |x: f64| (x + r.random_range(-noise..noise)).abs();
    let ranges = topology
        .edges()
        .iter()
        .map(|&(i, j)| {
            (0..w)
                .map(|t| noisy((&truth[t][i] - &truth[t][j]).norm()))
                .collect()
        })
        .collect();
    let anchor_ranges = topology
        .links()
        .iter()
        .map(|l| {
            (0..w)
                .map(|t| noisy((&truth[t][l.vehicle] - anchors[l.anchor].position(t, dt)).norm()))
                .collect()
        })
        .collect();
    let window = MeasurementWindow::new(
        &topology,
        dim,
        dt,
        ranges,
        anchor_ranges,
        rel_velocities,
        anchors,
    )
    .expect("valid random window");
    let deltas = window_deltas(&topology, &window);
    Instance {
        topology,
        window,
        deltas,
        dim,
        truth,
    }
}

/// Arbitrary point of the right shape, not necessarily feasible.
pub fn random_point_for(inst: &Instance, seed: u64) -> StackedVariable {
    let mut r = rng(seed ^ 0xA5A5_5A5A);
    let z = StackedVariable::zeros(&inst.topology, inst.window.len(), inst.dim);
    let flat: Vec<f64> = (0..z.scalar_len())
        .map(|_| r.random_range(-20.0..20.0))
        .collect();
    z.with_flat(&flat).unwrap()
}

/// Builds the network-wide variable back from per-node states, reading each
/// edge variable from its lower-numbered endpoint.
pub fn assemble(nodes: &[NodeState], template: &StackedVariable) -> StackedVariable {
    let mut z = template.clone();
    let d = z.dim();
    for node in nodes {
        z.p_block_mut(node.vehicle).copy_from_slice(&node.position);
        for ec in node
            .edges
            .iter()
            .filter(|ec| ec.sign == IncidenceSign::Plus)
        {
            for tau in 0..node.window_len {
                z.y_block_mut(ec.edge, tau)
                    .copy_from_slice(&ec.y[tau * d..(tau + 1) * d]);
            }
        }
        for lc in &node.links {
            for tau in 0..node.window_len {
                z.w_block_mut(lc.link, tau)
                    .copy_from_slice(&lc.w[tau * d..(tau + 1) * d]);
            }
        }
    }
    z
}

pub fn params(inst: &Instance) -> SolverParams {
    SolverParams::for_window(&inst.topology, inst.window.len(), inst.dim).unwrap()
}
