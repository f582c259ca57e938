mod common;

use common::*;
use nalgebra::DMatrix;
use spod::linalg::leading_left_singular_vectors;
use spod::shift::dense_operator;
use spod::synth::{wave_snapshots, CrossingFrontsParams, WaveParams};
use spod::*;

fn orient(mut w: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in w.column_iter_mut() {
        if c[c.iamax()] < 0.0 {
            c.neg_mut();
        }
    }
    w
}

#[test]
fn zero_shift_initialization_is_pod() {
    let mut rng = rng(41);
    let x = random_matrix(&mut rng, 20, 9);
    let g = Grid1D::with_length(20, 1.0, Boundary::Periodic).unwrap();
    let shifts = FrameShifts::from_rows(&[vec![0.0; 9]], ShiftSpec::periodic(1)).unwrap();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let init = initialize_frames(&problem, &[3]).unwrap();
    let pod = orient(pod_truncate(&x, 3).unwrap().modes);
    assert!((orient(init[0].modes().clone()) - pod).amax() < 1e-10);
    assert!(matches!(initialize_frames(&problem, &[10]), Err(Error::Input(_))));
}

#[test]
fn back_shift_matches_dense_assembly() {
    let mut rng = rng(42);
    let (m, n) = (16, 5);
    let g = Grid1D::with_length(m, 1.0, Boundary::NonPeriodic).unwrap();
    let d: Vec<f64> = (0..n).map(|j| 0.037 * j as f64 - 0.05).collect();
    let spec = ShiftSpec::constant(3);
    let shifts = FrameShifts::from_rows(&[d.clone()], spec).unwrap();
    let x = random_matrix(&mut rng, 2 * m, n);
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let back = problem.back_shifted(0, &x).unwrap();
    for j in 0..n {
        let t = dense_operator(-d[j], &g, &spec).unwrap();
        let top = &t * x.column(j).rows(0, m);
        let bottom = &t * x.column(j).rows(m, m);
        assert!((back.column(j).rows(0, m) - top).amax() < 1e-14);
        assert!((back.column(j).rows(m, m) - bottom).amax() < 1e-14);
    }
}

#[test]
fn wave_initial_modes_follow_the_pulse() {
    let p = WaveParams::default();
    let s = wave_snapshots(&p).unwrap();
    let problem = SpodProblem::new(s.data(), *s.grid(), p.frame_shifts(ShiftSpec::periodic(3)).unwrap()).unwrap();
    let frames = problem.initialize_frames(&[1, 1]).unwrap();
    let analytic = p.analytic_decomposition(ShiftSpec::periodic(3)).unwrap();
    let corr = |w: &FrameBasis, e: &FrameBasis| {
        let (w, e) = (w.modes().column(0), e.modes().column(0));
        w.dot(&e).abs() / (w.norm() * e.norm())
    };
    // the mean of the other frame's pulse leaks into the leading singular
    // vector of each back-shifted matrix (measured 0.988)
    for (f, exact) in frames.iter().zip(&analytic.frames) {
        assert!(corr(f, exact) > 0.98, "{}", corr(f, exact));
    }
}

#[test]
fn wave_case_needs_no_greedy_iteration() {
    let p = WaveParams { m: 256, n: 64, ..Default::default() };
    let s = wave_snapshots(&p).unwrap();
    let problem = SpodProblem::new(s.data(), *s.grid(), p.frame_shifts(ShiftSpec::periodic(3)).unwrap()).unwrap();
    let (dec, report) = spod_decompose(&problem, &GreedyConfig::new(vec![1, 1], 1e-3, 10)).unwrap();
    assert_eq!(report.termination, GreedyTermination::ToleranceReached);
    assert!(report.iterations.is_empty());
    assert!(report.final_error < 1e-6);
    assert_eq!(dec.total_modes(), 2);
}

fn small_problem() -> (DMatrix<f64>, Grid1D, FrameShifts) {
    let mut p = CrossingFrontsParams::default();
    p.m = 64;
    p.n = 24;
    let cf = synth::crossing_fronts(&p).unwrap();
    let g = *cf.snapshots.grid();
    let rows: Vec<Vec<f64>> = (0..2).map(|l| cf.shifts.frame(l)).collect();
    let shifts = FrameShifts::from_rows(&rows, *cf.shifts.spec()).unwrap();
    (cf.snapshots.into_data(), g, shifts)
}

#[test]
fn greedy_report_invariants() {
    let (x, g, shifts) = small_problem();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let mut config = GreedyConfig::new(vec![1, 0], 1e-9, 3);
    config.optimizer.max_iters = 60;
    let (dec, report) = spod_decompose(&problem, &config).unwrap();
    assert_eq!(report.termination, GreedyTermination::IterationCap);
    assert_eq!(report.iterations.len(), 3);
    assert_eq!(report.error_history.len(), 4);
    assert_eq!(report.solves.len(), 1 + 3 * 2);
    let mut counts = report.initial_mode_counts.clone();
    for (it, hist) in report.iterations.iter().zip(&report.error_history[1..]) {
        let best = it.candidate_errors.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(it.candidate_errors[it.chosen_frame], best);
        assert!(it.candidate_errors[..it.chosen_frame].iter().all(|&e| e > best));
        assert_eq!(it.error, *hist);
        counts[it.chosen_frame] += 1;
        assert_eq!(it.mode_counts, counts);
    }
    assert_eq!(report.final_mode_counts, counts);
    assert_eq!(dec.mode_counts(), counts);
    assert_eq!(report.total_modes(), 4);
    let recomputed = relative_error(&x, &dec.reconstruct().unwrap()).unwrap();
    assert!((recomputed - report.final_error).abs() < 1e-12);
    for f in &dec.frames {
        assert!(f.modes().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn cold_start_also_adds_one_mode_per_iteration() {
    let (x, g, shifts) = small_problem();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let mut config = GreedyConfig::new(vec![1, 1], 1e-9, 2);
    config.optimizer.max_iters = 40;
    config.warm_start = false;
    let (dec, report) = spod_decompose(&problem, &config).unwrap();
    assert_eq!(dec.total_modes(), 4);
    assert!(report.error_history.iter().all(|e| e.is_finite() && *e >= 0.0));
}

#[test]
fn iteration_cap_zero_returns_initial_solution() {
    let (x, g, shifts) = small_problem();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let mut config = GreedyConfig::new(vec![1, 1], 1e-12, 0);
    config.optimizer.max_iters = 20;
    let (dec, report) = spod_decompose(&problem, &config).unwrap();
    assert_eq!(report.termination, GreedyTermination::IterationCap);
    assert!(report.iterations.is_empty());
    assert_eq!(dec.mode_counts(), vec![1, 1]);
    assert_eq!(report.final_error, report.initial_error);
}

#[test]
fn single_unshifted_frame_matches_pod() {
    let mut rng = rng(43);
    let x = random_matrix(&mut rng, 24, 10);
    let g = Grid1D::with_length(24, 1.0, Boundary::Periodic).unwrap();
    let shifts = FrameShifts::from_rows(&[vec![0.0; 10]], ShiftSpec::periodic(1)).unwrap();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    for r in 1..5 {
        let (_, report) = spod_decompose(&problem, &GreedyConfig::new(vec![r], 1e-12, 0)).unwrap();
        let pod = relative_error(&x, &pod_truncate(&x, r).unwrap().reconstruct()).unwrap();
        assert!((report.final_error - pod).abs() < 1e-8, "r={r}: {} vs {pod}", report.final_error);
    }
}

#[test]
fn single_shifted_frame_matches_back_shifted_pod() {
    let mut rng = rng(44);
    let (m, n) = (32, 10);
    let g = Grid1D::with_length(m, 1.0, Boundary::Periodic).unwrap();
    let d: Vec<f64> = (0..n).map(|j| (2 * j) as f64 * g.h()).collect();
    let shifts = FrameShifts::from_rows(&[d], ShiftSpec::periodic(1)).unwrap();
    let x = random_matrix(&mut rng, m, n);
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let back = problem.back_shifted(0, &x).unwrap();
    let total = x.norm_squared();
    for r in 1..4 {
        let (_, report) = spod_decompose(&problem, &GreedyConfig::new(vec![r], 1e-12, 0)).unwrap();
        let pod = eigen_tail(&back, r) / total;
        assert!((report.final_error - pod).abs() < 1e-8);
        let w = leading_left_singular_vectors(&back, r);
        assert_eq!(w.ncols(), r);
    }
}

#[test]
fn progress_reports_every_candidate() {
    let (x, g, shifts) = small_problem();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    let mut config = GreedyConfig::new(vec![1, 1], 1e-12, 1);
    config.optimizer.max_iters = 10;
    let mut events = Vec::new();
    spod_decompose_with_progress(&problem, &config, |p| {
        events.push(match p {
            Progress::Initial { .. } => "initial",
            Progress::Candidate { .. } => "candidate",
            Progress::Accepted { .. } => "accepted",
        })
    })
    .unwrap();
    assert_eq!(events, vec!["initial", "candidate", "candidate", "accepted"]);
}

#[test]
fn configuration_errors() {
    let (x, g, shifts) = small_problem();
    let problem = SpodProblem::new(&x, g, shifts).unwrap();
    assert!(matches!(spod_decompose(&problem, &GreedyConfig::new(vec![1], 0.1, 1)), Err(Error::Config(_))));
    assert!(matches!(spod_decompose(&problem, &GreedyConfig::new(vec![1, 1], 0.0, 1)), Err(Error::Config(_))));
    assert!(problem.clone().with_masks(vec![Some(vec![true; 3]), None]).is_err());
}
