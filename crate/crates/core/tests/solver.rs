use nalgebra::{DMatrix, DVector};
use omni_traj::solver::{minimize, SolverConfig, Status};
use rand::{Rng, SeedableRng};

fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
    let (a, b) = (x[0], x[1]);
    (
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
        vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
    )
}

#[test]
fn rosenbrock_reaches_global_minimum() {
    let r = minimize(rosenbrock, &[-1.2, 1.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    assert!(r.iterations <= 200, "{} iterations", r.iterations);
}

#[test]
fn accepted_values_satisfy_armijo_and_decrease() {
    let r = minimize(rosenbrock, &[-1.2, 1.0], &SolverConfig::default()).unwrap();
    for w in r.trace.windows(2) {
        assert!(w[1].value < w[0].value);
        assert!(w[1].step > 0.0);
    }
}

#[test]
fn spd_quadratic_solves_linear_system() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    let n = 20;
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let f = |x: &[f64]| {
        let x = DVector::from_column_slice(x);
        let hx = &h * &x;
        (0.5 * x.dot(&hx) - b.dot(&x), (hx - &b).as_slice().to_vec())
    };
    let cfg = SolverConfig { grad_tol: 1e-9, ..Default::default() };
    let r = minimize(f, &vec![0.0; n], &cfg).unwrap();
    let x = DVector::from_column_slice(&r.x);
    assert!((&h * x - &b).norm() <= 1e-6 * b.norm());
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let a = minimize(rosenbrock, &[-1.2, 1.0], &SolverConfig::default()).unwrap();
    let b = minimize(rosenbrock, &[-1.2, 1.0], &SolverConfig::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.trace, b.trace);
}

