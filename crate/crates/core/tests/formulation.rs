mod common;

use common::{random_instance, random_point_for};
use uwloc::oracle::DenseQuadratic;
use uwloc::problem::{
    cost_original, cost_stacked, cumulative_velocities, gradient, lipschitz_bound,
    project_constraints, spectral_radius_estimate, StackedVariable,
};

fn flat_p(z: &StackedVariable, n: usize) -> Vec<f64> {
    (0..n).flat_map(|i| z.p_block(i).to_vec()).collect()
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..25 {
        let inst = random_instance(seed, 8, 6);
        let z = random_point_for(&inst, seed);
        let g = gradient(&inst.topology, &z, &inst.deltas)
            .unwrap()
            .to_flat();
        let x = z.to_flat();
        let h = 1e-5;
        let mut fd = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp =
                cost_stacked(&inst.topology, &z.with_flat(&plus).unwrap(), &inst.deltas).unwrap();
            let fm =
                cost_stacked(&inst.topology, &z.with_flat(&minus).unwrap(), &inst.deltas).unwrap();
            fd[k] = (fp - fm) / (2.0 * h);
        }
        let num: f64 = g
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        assert!(
            num / den <= 1e-6,
            "seed {seed}: relative error {}",
            num / den
        );
    }
}

#[test]
fn matrix_free_and_dense_forms_agree() {
    for seed in 30..50 {
        let inst = random_instance(seed, 8, 6);
        let z = random_point_for(&inst, seed);
        let q = DenseQuadratic::build(&inst.topology, &inst.deltas);
        let f = cost_stacked(&inst.topology, &z, &inst.deltas).unwrap();
        assert!((q.cost(&z) - f).abs() <= 1e-9 * (1.0 + f.abs()));
        let g = gradient(&inst.topology, &z, &inst.deltas)
            .unwrap()
            .to_flat();
        let gd = q.gradient(&z);
        let diff = g
            .iter()
            .zip(gd.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-10, "seed {seed}: {diff}");
    }
}

#[test]
fn stacked_cost_at_projected_point_equals_range_misfit() {
    for seed in 60..80 {
        let inst = random_instance(seed, 8, 6);
        let n = inst.topology.vehicle_count();
        let d = inst.dim.get();
        let positions = random_point_for(&inst, seed);
        let p = flat_p(&positions, n);
        // z(x): directions projected from the kinematically consistent positions
        let z = project_constraints(
            &StackedVariable::residual_free(&inst.topology, &inst.deltas, &p).unwrap(),
            &inst.window,
            inst.dim.first_axis().as_slice(),
        );
        let cv = cumulative_velocities(&inst.window);
        let dt = inst.window.dt();
        let x: Vec<Vec<uwloc::Point>> = (0..inst.window.len())
            .map(|tau| {
                (0..n)
                    .map(|i| {
                        uwloc::Point::from_column_slice(&p[i * d..(i + 1) * d]) + cv.at(tau, i) * dt
                    })
                    .collect()
            })
            .collect();
        let orig = cost_original(&inst.topology, &inst.window, &x).unwrap();
        let stacked = cost_stacked(&inst.topology, &z, &inst.deltas).unwrap();
        assert!(
            (orig - stacked).abs() <= 1e-10 * orig.abs().max(1e-300),
            "seed {seed}: {orig} vs {stacked}"
        );
    }
}

#[test]
fn lipschitz_bound_dominates_spectrum() {
    for seed in 90..110 {
        let inst = random_instance(seed, 8, 6);
        let w = inst.window.len();
        let q = DenseQuadratic::build(&inst.topology, &inst.deltas);
        let exact = q.max_eigenvalue();
        let power = spectral_radius_estimate(&inst.topology, w, inst.dim, 1e-12, 20_000).unwrap();
        let bound = lipschitz_bound(&inst.topology, w).unwrap();
        assert!(
            exact <= bound + 1e-9,
            "seed {seed}: λ = {exact} > L = {bound}"
        );
        assert!(power <= exact * (1.0 + 1e-9));
        assert!(power >= exact * (1.0 - 1e-3), "power {power} vs {exact}");
    }
}
