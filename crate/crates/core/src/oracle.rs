//! Dense reference operators.
//!
//! Materializes `M` and `b` block by block from the incidence matrix `C`,
//! the lift `A = C ⊗ I_d`, the time-stacking matrix `D` and the anchor
//! selector `E`. Only used to check the matrix-free and distributed paths;
//! nothing in the solver calls into this module.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geom::NetworkTopology;
use crate::problem::{project_in_place, MeasurementWindow, StackedVariable, WindowDeltas};

/// Explicit `F(z) = ½zᵀMz − bᵀz + c`.
#[derive(Debug, Clone)]
pub struct DenseQuadratic {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `½(‖Δv‖² + ‖α‖²)`, the constant dropped from the quadratic form.
    pub constant: f64,
}

impl DenseQuadratic {
    pub fn build(topology: &NetworkTopology, deltas: &WindowDeltas) -> Self {
        let d = deltas.dim();
        let n = topology.vehicle_count();
        let ne = topology.edge_count();
        let nl = topology.link_count();
        let w = deltas.len();

        let mut c = DMatrix::<f64>::zeros(ne, n);
        for (e, &(lo, hi)) in topology.edges().iter().enumerate() {
            c[(e, lo)] = 1.0;
            c[(e, hi)] = -1.0;
        }
        let a = c.kronecker(&DMatrix::<f64>::identity(d, d));

        let mut dmat = DMatrix::<f64>::zeros(ne * w * d, ne * d);
        for e in 0..ne {
            for tau in 0..w {
                for k in 0..d {
                    dmat[((e * w + tau) * d + k, e * d + k)] = 1.0;
                }
            }
        }
        let mut emat = DMatrix::<f64>::zeros(nl * w * d, n * d);
        for (l, link) in topology.links().iter().enumerate() {
            for tau in 0..w {
                for k in 0..d {
                    emat[((l * w + tau) * d + k, link.vehicle * d + k)] = 1.0;
                }
            }
        }

        let da = &dmat * &a;
        let (np, ny, nw) = (n * d, ne * w * d, nl * w * d);
        let total = np + ny + nw;
        let mut m = DMatrix::<f64>::zeros(total, total);
        let top_left = da.transpose() * &da + emat.transpose() * &emat;
        m.view_mut((0, 0), (np, np)).copy_from(&top_left);
        m.view_mut((0, np), (np, ny)).copy_from(&(-da.transpose()));
        m.view_mut((0, np + ny), (np, nw))
            .copy_from(&(-emat.transpose()));
        m.view_mut((np, 0), (ny, np)).copy_from(&(-&da));
        m.view_mut((np, np), (ny, ny)).fill_with_identity();
        m.view_mut((np + ny, 0), (nw, np)).copy_from(&(-&emat));
        m.view_mut((np + ny, np + ny), (nw, nw))
            .fill_with_identity();

        let dv = DVector::from_column_slice(deltas.dv_flat());
        let alpha = DVector::from_column_slice(deltas.alpha_flat());
        // b = [Eᵀ; 0; −I] α − [AᵀDᵀ; −I; 0] Δv
        let mut b = DVector::<f64>::zeros(total);
        let b_p = emat.transpose() * &alpha - da.transpose() * &dv;
        b.rows_mut(0, np).copy_from(&b_p);
        b.rows_mut(np, ny).copy_from(&dv);
        b.rows_mut(np + ny, nw).copy_from(&(-&alpha));

        let constant = 0.5 * (dv.norm_squared() + alpha.norm_squared());
        DenseQuadratic { m, b, constant }
    }

    pub fn cost(&self, z: &StackedVariable) -> f64 {
        let v = DVector::from_vec(z.to_flat());
        0.5 * v.dot(&(&self.m * &v)) - self.b.dot(&v) + self.constant
    }

    pub fn gradient(&self, z: &StackedVariable) -> DVector<f64> {
        let v = DVector::from_vec(z.to_flat());
        &self.m * v - &self.b
    }

    /// Largest eigenvalue of the symmetric `M`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One centralized projected-gradient step `P_𝒵(z − (Mz − b)/L)` through the
/// dense operators.
pub fn centralized_reference_step(
    topology: &NetworkTopology,
    window: &MeasurementWindow,
    deltas: &WindowDeltas,
    z: &StackedVariable,
    lipschitz: f64,
    tie_break: &[f64],
) -> Result<StackedVariable> {
    z.check_shape(topology, window.len())?;
    let q = DenseQuadratic::build(topology, deltas);
    let g = q.gradient(z);
    let flat: Vec<f64> = z
        .to_flat()
        .iter()
        .zip(g.iter())
        .map(|(x, gx)| x - gx / lipschitz)
        .collect();
    let mut next = z.with_flat(&flat)?;
    project_in_place(&mut next, window, tie_break);
    Ok(next)
}

/// Outcome of checking one random instance against the dense operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub seed: u64,
    pub vehicles: usize,
    pub anchors: usize,
    pub window_len: usize,
    pub dim: usize,
    /// Distributed round vs dense projected-gradient step.
    pub step_diff: f64,
    /// Matrix-free vs dense gradient.
    pub gradient_diff: f64,
    pub lambda_max: f64,
    pub lipschitz: f64,
}

impl OracleCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.step_diff <= tol && self.gradient_diff <= 1e-9 && self.lambda_max <= self.lipschitz
    }
}

fn random_problem(
    seed: u64,
    max_vehicles: usize,
    max_window: usize,
) -> Result<(NetworkTopology, MeasurementWindow, StackedVariable)> {
    use crate::geom::{Point, SpaceDim};
    use crate::problem::AnchorTrack;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_vehicles.max(1));
    let m = if n == 1 {
        rng.random_range(1..=2)
    } else {
        rng.random_range(0..=2)
    };
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
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
        links[0].push(0);
    }
    let topology = NetworkTopology::new(n, m, &edges, &links)?;
    let dim = if rng.random_bool(0.5) {
        SpaceDim::PLANAR
    } else {
        SpaceDim::SPATIAL
    };
    let d = dim.get();
    let w = rng.random_range(1..=max_window.max(1));
    let mut point = |scale: f64| Point::from_fn(d, |_, _| rng.random_range(-scale..scale));
    let vel: Vec<Vec<Point>> = (0..w)
        .map(|_| (0..n).map(|_| point(1.0)).collect())
        .collect();
    let anchors: Vec<AnchorTrack> = (0..m)
        .map(|_| AnchorTrack::from_positions(&(0..w).map(|_| point(20.0)).collect::<Vec<_>>(), 1.0))
        .collect();
    let ranges = (0..topology.edge_count())
        .map(|_| (0..w).map(|_| rng.random_range(0.0..30.0)).collect())
        .collect();
    let anchor_ranges = (0..topology.link_count())
        .map(|_| (0..w).map(|_| rng.random_range(0.0..30.0)).collect())
        .collect();
    let window = MeasurementWindow::new(&topology, dim, 1.0, ranges, anchor_ranges, vel, anchors)?;
    let z = StackedVariable::zeros(&topology, w, dim);
    let flat: Vec<f64> = (0..z.scalar_len())
        .map(|_| rng.random_range(-20.0..20.0))
        .collect();
    let z = z.with_flat(&flat)?;
    Ok((topology, window, z))
}

/// Checks the distributed round, the matrix-free gradient and the step
/// constant against the dense operators on `count` seeded random instances.
pub fn equivalence_suite(
    count: usize,
    base_seed: u64,
    max_vehicles: usize,
    max_window: usize,
) -> Result<Vec<OracleCheck>> {
    use crate::diesel::SyncNetwork;
    use crate::problem::{gradient, window_deltas, SolverParams};

    (0..count as u64)
        .map(|k| {
            let seed = base_seed.wrapping_add(k);
            let (topology, window, z) = random_problem(seed, max_vehicles, max_window)?;
            let deltas = window_deltas(&topology, &window);
            let params = SolverParams::for_window(&topology, window.len(), window.dim())?;
            let mut net = SyncNetwork::new(&topology, &window, &deltas, &z, &params)?;
            net.round()?;
            let dist = net.gather(&z);
            let dense = centralized_reference_step(
                &topology,
                &window,
                &deltas,
                &z,
                params.lipschitz,
                params.tie_break.as_slice(),
            )?;
            let q = DenseQuadratic::build(&topology, &deltas);
            let g = gradient(&topology, &z, &deltas)?.to_flat();
            let gradient_diff = g
                .iter()
                .zip(q.gradient(&z).iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(OracleCheck {
                seed,
                vehicles: topology.vehicle_count(),
                anchors: topology.anchor_count(),
                window_len: window.len(),
                dim: window.dim().get(),
                step_diff: dist.max_abs_diff(&dense),
                gradient_diff,
                lambda_max: q.max_eigenvalue(),
                lipschitz: params.lipschitz,
            })
        })
        .collect()
}
