mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use spod::objective::{flatten_modes, unflatten_modes};
use spod::*;

#[test]
fn convex_quadratic() {
    let mut rng = rng(31);
    let b = random_matrix(&mut rng, 5, 5);
    let a = &b * b.transpose() + DMatrix::identity(5, 5);
    let rhs = DVector::from_fn(5, |i, _| i as f64 - 2.0);
    let opts = OptimizerOptions { grad_tol: 1e-10, ..Default::default() };
    let min = minimize(
        |x, g| {
            let x = DVector::from_column_slice(x);
            let ax = &a * &x;
            g.copy_from_slice((&ax - &rhs).as_slice());
            0.5 * x.dot(&ax) - rhs.dot(&x)
        },
        vec![0.0; 5],
        &opts,
    )
    .unwrap();
    let exact = a.lu().solve(&rhs).unwrap();
    for (x, e) in min.x.iter().zip(exact.iter()) {
        assert!((x - e).abs() < 1e-8);
    }
    assert_eq!(min.termination(), Termination::GradientTolerance, "{:?}", min.trace.grad_norms);
}

#[test]
fn trace_is_monotone_with_sufficient_decrease() {
    let rosen = |x: &[f64], g: &mut [f64]| {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    };
    let opts = OptimizerOptions::default();
    let min = minimize(rosen, vec![-1.2, 1.0], &opts).unwrap();
    let t = &min.trace;
    for k in 1..t.values.len() {
        let decrease = t.values[k - 1] - t.values[k];
        assert!(decrease >= 0.0);
        let bound = -opts.c1 * t.steps[k - 1] * t.slopes[k - 1];
        assert!(decrease >= bound * (1.0 - 1e-12), "iteration {k}");
        assert!(t.slopes[k - 1] < 0.0);
    }
}

#[test]
fn spod_toy_problem_converges() {
    let mut rng = rng(32);
    let inst = random_instance(&mut rng, 64, 1, 10, &[1, 1], ShiftSpec::periodic(3));
    let ops = FrameOperators::new(&inst.shifts, &inst.grid, 64).unwrap();
    let obj = SpodObjective::new(&inst.x, &ops, vec![None, None], DEFAULT_RANK_TOL).unwrap();
    let opts = OptimizerOptions { grad_tol: 1e-9, max_iters: 5000, ..Default::default() };
    let min = minimize(
        |x, g| {
            let modes = unflatten_modes(x, 64, &[1, 1]);
            let e = obj.evaluate(&modes).unwrap();
            g.copy_from_slice(&flatten_modes(&e.gradients));
            e.residual
        },
        flatten_modes(&inst.modes),
        &opts,
    )
    .unwrap();
    assert!(min.trace.values.windows(2).all(|w| w[1] <= w[0]));
    let gnorm = min.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(gnorm < 1e-6, "final gradient norm {gnorm}, {:?}", min.termination());
    assert!(min.value < min.trace.values[0]);
}
