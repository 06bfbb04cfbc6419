//! Discretization checks: strain evaluation identities, operator symmetry
//! and coercivity, and convergence against a manufactured Stokes solution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shearflow::fem::FieldRole;
use shearflow::sensitivity::fit_log_slope;
use shearflow::state::{SolverConfig, StateSolver};
use shearflow::tensor::FluidParams;
use shearflow::{Discretization, FeField, Mesh};

fn disc(n: usize, order: usize) -> Discretization {
    let mesh = Arc::new(Mesh::structured(n, n, [0.0, 0.0, 1.0, 1.0]).unwrap());
    Discretization::new(mesh, order).unwrap()
}

/// Stream function ψ = x²(1−x)² y²(1−y)² and its derived fields.
fn bump(x: f64) -> (f64, f64, f64, f64) {
    let v = x * x * (1.0 - x) * (1.0 - x);
    let d1 = 2.0 * x - 6.0 * x * x + 4.0 * x * x * x;
    let d2 = 2.0 - 12.0 * x + 12.0 * x * x;
    let d3 = -12.0 + 24.0 * x;
    (v, d1, d2, d3)
}

fn exact_velocity(p: [f64; 2]) -> [f64; 2] {
    let (xv, xd1, _, _) = bump(p[0]);
    let (yv, yd1, _, _) = bump(p[1]);
    [xv * yd1, -xd1 * yv]
}

fn exact_pressure(p: [f64; 2]) -> f64 {
    p[0].powi(3) + p[1].powi(3) - 0.5
}

fn body_force(mu: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |p| {
        let (xv, xd1, xd2, xd3) = bump(p[0]);
        let (yv, yd1, yd2, yd3) = bump(p[1]);
        let lap_dy = xd2 * yd1 + xv * yd3;
        let lap_dx = xd3 * yv + xd1 * yd2;
        [-0.5 * mu * lap_dy + 3.0 * p[0] * p[0], 0.5 * mu * lap_dx + 3.0 * p[1] * p[1]]
    }
}

#[test]
fn sym_gradient_of_rigid_rotation_vanishes() {
    let d = disc(4, 4);
    // y = A x with A skew-symmetric
    let f = d
        .interpolate(FieldRole::Control, |p| [0.7 * p[1], -0.7 * p[0]])
        .unwrap();
    let eps = d.eval_sym_gradient(&f).unwrap();
    let max = eps.values.iter().map(|t| t.norm()).fold(0.0f64, f64::max);
    assert!(max < 1e-13, "rigid rotation produced strain {max}");
}

#[test]
fn sym_gradient_of_linear_field_is_constant() {
    let d = disc(3, 4);
    let a = [[0.4, 0.1], [0.1, -0.3]];
    let f = d
        .interpolate(FieldRole::Control, |p| {
            [a[0][0] * p[0] + a[0][1] * p[1], a[1][0] * p[0] + a[1][1] * p[1]]
        })
        .unwrap();
    let eps = d.eval_sym_gradient(&f).unwrap();
    for t in &eps.values {
        assert!((t.entry(0, 0) - a[0][0]).abs() < 1e-13);
        assert!((t.entry(0, 1) - a[0][1]).abs() < 1e-13);
        assert!((t.entry(1, 1) - a[1][1]).abs() < 1e-13);
    }
}

#[test]
fn strain_energy_matches_stiffness_quadratic_form() {
    let d = disc(6, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let coeffs: Vec<f64> = (0..d.dofmap.n_velocity).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = FeField::new(d.dofmap.clone(), FieldRole::Control, coeffs).unwrap();
        let eps = d.eval_sym_gradient(&f).unwrap();
        let by_quadrature: f64 = eps
            .values
            .iter()
            .zip(&eps.weights)
            .map(|(t, w)| w * t.dot(t))
            .sum();
        let by_matrix = d.eps_stiffness().inner(f.coeffs(), f.coeffs());
        assert!(
            (by_quadrature - by_matrix).abs() <= 1e-10 * (1.0 + by_matrix),
            "strain energy mismatch: {by_quadrature} vs {by_matrix}"
        );
    }
}

#[test]
fn quadrature_weights_partition_area() {
    for order in [2, 4, 6] {
        let d = disc(5, order);
        assert!((d.area() - 1.0).abs() < 1e-12);
        let f = d.interpolate(FieldRole::Velocity, |_| [0.0, 0.0]).unwrap();
        let eps = d.eval_sym_gradient(&f).unwrap();
        assert!((eps.domain_area() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stokes_block_is_symmetric_and_coercive() {
    let d = disc(4, 4);
    let (a, _b) = d.stokes_blocks(1.0).unwrap();
    let n = d.dofmap.n_velocity;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let asym = (a.inner(&x, &y) - a.inner(&y, &x)).abs();
        assert!(asym < 1e-12 * (1.0 + a.inner(&x, &x).abs()));
    }
    // coercivity on Dirichlet-reduced fields
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = FeField::with_zeroed_boundary(d.dofmap.clone(), FieldRole::Velocity, coeffs)
            .unwrap();
        let quad = a.inner(v.coeffs(), v.coeffs());
        let h1 = d.h1_norm(&v);
        assert!(quad > 0.0, "lost coercivity");
        assert!(quad >= 1e-3 * h1 * h1, "Korn constant too small: {}", quad / (h1 * h1));
    }
}

#[test]
fn manufactured_stokes_converges_at_optimal_rates() {
    let mu = 1.3;
    let mut hs = Vec::new();
    let mut vel_errors = Vec::new();
    let mut pre_errors = Vec::new();
    for n in [8usize, 16, 32] {
        let d = disc(n, 4);
        let solver = StateSolver::new(
            &d,
            FluidParams::new(mu, 1.0, 1.0).unwrap(),
            SolverConfig::default(),
        )
        .unwrap();
        let rhs = d.load_from_fn(body_force(mu));
        let state = solver.solve_stokes(&rhs).unwrap();
        let verr = d.l2_error_against(&state.velocity, exact_velocity).unwrap();
        // compare mean-removed pressures
        let p_exact = {
            let coeffs: Vec<f64> = d.mesh.vertices.iter().map(|v| exact_pressure(*v)).collect();
            let mut p = FeField::new(d.dofmap.clone(), FieldRole::Pressure, coeffs).unwrap();
            d.remove_pressure_mean(&mut p);
            p
        };
        let perr = d.pressure_l2(&state.pressure.sub(&p_exact));
        hs.push(1.0 / n as f64);
        vel_errors.push(verr);
        pre_errors.push(perr);
    }
    let vel_rate = fit_log_slope(&hs, &vel_errors);
    let pre_rate = fit_log_slope(&hs, &pre_errors);
    assert!(
        vel_rate >= 2.8,
        "velocity L2 rate {vel_rate:.2} below 2.8 (errors {vel_errors:?})"
    );
    assert!(
        pre_rate >= 1.7,
        "pressure L2 rate {pre_rate:.2} below 1.7 (errors {pre_errors:?})"
    );
}

#[test]
fn solved_fields_are_weakly_divergence_free() {
    let d = disc(12, 4);
    let solver = StateSolver::new(
        &d,
        FluidParams::new(1.0, 1.0, 1.0).unwrap(),
        SolverConfig::default(),
    )
    .unwrap();
    let rhs = d.load_from_fn(body_force(1.0));
    let state = solver.solve_stokes(&rhs).unwrap();
    let div = d.div_l2(&state.velocity).unwrap();
    let eps = d.eps_seminorm(&state.velocity);
    assert!(div <= 1e-8 * eps, "div {div} vs strain {eps}");
}

#[test]
fn mesh_reimport_reproduces_assembly() {
    let d = disc(4, 4);
    let dir = std::env::temp_dir().join("shearflow-roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mesh.txt");
    d.mesh.to_text(&path).unwrap();
    let mesh2 = Arc::new(Mesh::from_text(&path).unwrap());
    let d2 = Discretization::new(mesh2, 4).unwrap();
    let n = d.dofmap.n_velocity;
    assert_eq!(n, d2.dofmap.n_velocity);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a1 = d.eps_stiffness().apply(&x);
    let a2 = d2.eps_stiffness().apply(&x);
    assert_eq!(a1, a2, "assembly differs after mesh round trip");
}
