use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spod::shift::dense_operator;
use spod::*;

fn grid(m: usize, boundary: Boundary) -> Grid1D {
    Grid1D::new(m, 1.0 / m as f64, boundary).unwrap()
}

fn specs() -> Vec<ShiftSpec> {
    vec![
        ShiftSpec::periodic(1),
        ShiftSpec::periodic(3),
        ShiftSpec::constant(1),
        ShiftSpec::constant(3),
    ]
}

fn grid_for(spec: &ShiftSpec, m: usize) -> Grid1D {
    match spec.boundary {
        ShiftBoundary::Periodic => grid(m, Boundary::Periodic),
        ShiftBoundary::ConstantExtrapolation => grid(m, Boundary::NonPeriodic),
    }
}

/// Dense operator assembled entry by entry from the stencil definition.
fn reference_matrix(d: f64, g: &Grid1D, spec: &ShiftSpec) -> DMatrix<f64> {
    let s = build_stencil(d, g, spec).unwrap();
    let m = g.m() as isize;
    let mut t = DMatrix::zeros(g.m(), g.m());
    for i in 0..m {
        for (k, w) in s.weights.iter().enumerate() {
            let idx = i + s.offset + k as isize;
            let idx = match spec.boundary {
                ShiftBoundary::Periodic => idx.rem_euclid(m),
                ShiftBoundary::ConstantExtrapolation => idx.clamp(0, m - 1),
            };
            t[(i as usize, idx as usize)] += w;
        }
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn clamped_unit_shifts_match_fixture_matrices() {
    let g = Grid1D::new(4, 1.0, Boundary::NonPeriodic).unwrap();
    let spec = ShiftSpec::constant(1);
    #[rustfmt::skip]
    let down = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
    ]);
    #[rustfmt::skip]
    let up = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, 1.0,
    ]);
    assert_eq!(dense_operator(1.0, &g, &spec).unwrap(), down);
    assert_eq!(dense_operator(-1.0, &g, &spec).unwrap(), up);
    assert_eq!(dense_operator(2.0, &g, &spec).unwrap(), &down * &down);
    assert_eq!(dense_operator(-3.0, &g, &ShiftSpec::constant(3)).unwrap(), &up * &up * &up);

    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(apply_shift(&v, 1.0, &g, &spec).unwrap(), vec![1.0, 1.0, 2.0, 3.0]);
    assert_eq!(apply_shift(&v, -1.0, &g, &spec).unwrap(), vec![2.0, 3.0, 4.0, 4.0]);
}

#[test]
fn periodic_unit_shift_rotates() {
    let g = Grid1D::new(4, 1.0, Boundary::Periodic).unwrap();
    let v = [1.0, 2.0, 3.0, 4.0];
    let spec = ShiftSpec::periodic(3);
    assert_eq!(apply_shift(&v, 1.0, &g, &spec).unwrap(), vec![4.0, 1.0, 2.0, 3.0]);
    assert_eq!(apply_shift(&v, -1.0, &g, &spec).unwrap(), vec![2.0, 3.0, 4.0, 1.0]);
    assert_eq!(apply_shift(&v, 5.0, &g, &spec).unwrap(), vec![4.0, 1.0, 2.0, 3.0]);
}

#[test]
fn half_cell_linear_and_quarter_cell_cubic_weights() {
    let g = grid(16, Boundary::Periodic);
    let s = build_stencil(0.5 * g.h(), &g, &ShiftSpec::periodic(1)).unwrap();
    assert_eq!(s.weights, vec![0.5, 0.5]);

    // Lagrange basis on nodes i-2..i+1 evaluated at i - 1/4, worked by hand
    let s = build_stencil(0.25 * g.h(), &g, &ShiftSpec::periodic(3)).unwrap();
    let expected = [-0.0390625, 0.2734375, 0.8203125, -0.0546875];
    for (w, e) in s.weights.iter().zip(expected) {
        assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
    }
    assert_eq!(s.offset, -2);
    assert_abs_diff_eq!(s.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);

    let s = build_stencil(0.0, &g, &ShiftSpec::constant(3)).unwrap();
    assert!(s.is_identity());
}

#[test]
fn unsupported_degree_is_rejected() {
    let g = grid(8, Boundary::Periodic);
    for deg in [0, 2, 4] {
        let spec = ShiftSpec { boundary: ShiftBoundary::Periodic, interp_degree: deg };
        assert!(matches!(build_stencil(0.3, &g, &spec), Err(Error::Config(_))));
        assert!(ShiftSpec::new(ShiftBoundary::Periodic, deg).is_err());
    }
    assert!(matches!(build_stencil(f64::NAN, &g, &ShiftSpec::periodic(1)), Err(Error::NonFinite(_))));
}

#[test]
fn adjoint_identity_and_dense_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for spec in specs() {
        for m in [4, 5, 17, 50] {
            let g = grid_for(&spec, m);
            for _ in 0..20 {
                let d = rng.random_range(-1.5..1.5);
                let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let tv = apply_shift(&v, d, &g, &spec).unwrap();
                let ttw = apply_shift_transpose(&w, d, &g, &spec).unwrap();
                assert!((dot(&tv, &w) - dot(&v, &ttw)).abs() < 1e-12, "{spec:?} m={m} d={d}");

                let dense = reference_matrix(d, &g, &spec);
                let dv = &dense * nalgebra::DVector::from_column_slice(&v);
                let dtw = dense.transpose() * nalgebra::DVector::from_column_slice(&w);
                for i in 0..m {
                    assert!((dv[i] - tv[i]).abs() < 1e-12);
                    assert!((dtw[i] - ttw[i]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn periodic_grid_shifts_are_exact_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = grid(32, Boundary::Periodic);
    for deg in [1, 3] {
        let spec = ShiftSpec::periodic(deg);
        for k in -40i32..40 {
            let d = k as f64 * g.h();
            let v: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tv = apply_shift(&v, d, &g, &spec).unwrap();
            let tw = apply_shift(&w, d, &g, &spec).unwrap();
            let mut sorted_v = v.clone();
            let mut sorted_tv = tv.clone();
            sorted_v.sort_by(f64::total_cmp);
            sorted_tv.sort_by(f64::total_cmp);
            assert_eq!(sorted_v, sorted_tv);
            assert_abs_diff_eq!(dot(&tv, &tw), dot(&v, &w), epsilon = 1e-14);
            let back = apply_shift(&tv, -d, &g, &spec).unwrap();
            assert_eq!(back, v);
            assert_eq!(apply_shift_transpose(&v, d, &g, &spec).unwrap(), apply_shift(&v, -d, &g, &spec).unwrap());
        }
    }
}

#[test]
fn zero_shift_is_identity_for_both_maps() {
    let v = [0.3, -1.0, 2.5, 7.0, 1.0];
    for spec in specs() {
        let g = grid_for(&spec, 5);
        assert_eq!(apply_shift(&v, 0.0, &g, &spec).unwrap(), v.to_vec());
        assert_eq!(apply_shift_transpose(&v, 0.0, &g, &spec).unwrap(), v.to_vec());
    }
}

#[test]
fn length_mismatch_is_an_input_error() {
    let g = grid(8, Boundary::Periodic);
    assert!(matches!(apply_shift(&[1.0; 7], 0.1, &g, &ShiftSpec::periodic(1)), Err(Error::Input(_))));
}

proptest! {
    #[test]
    fn constants_are_preserved(d in -3.0f64..3.0, c in -5.0f64..5.0, m in 4usize..40, idx in 0usize..4) {
        let spec = specs()[idx];
        let g = grid_for(&spec, m);
        let out = apply_shift(&vec![c; m], d, &g, &spec).unwrap();
        for o in out {
            prop_assert!((o - c).abs() < 1e-12);
        }
        let s = build_stencil(d, &g, &spec).unwrap();
        prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn matrix_free_matches_dense(d in -2.0f64..2.0, m in 4usize..24, idx in 0usize..4, seed in 0u64..1000) {
        let spec = specs()[idx];
        let g = grid_for(&spec, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = reference_matrix(d, &g, &spec);
        prop_assert!((dense_operator(d, &g, &spec).unwrap() - &dense).amax() < 1e-15);
        let want = &dense * nalgebra::DVector::from_column_slice(&v);
        let got = apply_shift(&v, d, &g, &spec).unwrap();
        let got_t = apply_shift_transpose(&v, d, &g, &spec).unwrap();
        let want_t = dense.transpose() * nalgebra::DVector::from_column_slice(&v);
        for i in 0..m {
            prop_assert!((want[i] - got[i]).abs() < 1e-12);
            prop_assert!((want_t[i] - got_t[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_round_trip_on_grid(k in -100i64..100, m in 3usize..30) {
        let g = grid(m, Boundary::Periodic);
        let v: Vec<f64> = (0..m).map(|i| (i * i) as f64).collect();
        let spec = ShiftSpec::periodic(3);
        let d = k as f64 * g.h();
        let there = apply_shift(&v, d, &g, &spec).unwrap();
        prop_assert_eq!(apply_shift(&there, -d, &g, &spec).unwrap(), v);
    }
}
