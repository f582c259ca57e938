//! Oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spod::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Minimum-norm solution of `K a = x` through the eigen-decomposition of the
/// normal matrix `K^T K`, discarding eigenvalues below `rel * lambda_max`.
pub fn normal_equations_pinv(k: &DMatrix<f64>, x: &DVector<f64>, rel: f64) -> DVector<f64> {
    let gram = k.transpose() * k;
    let rhs = k.transpose() * x;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut a = DVector::zeros(k.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > rel * lmax {
            let v = eig.eigenvectors.column(i);
            a += v * (v.dot(&rhs) / l);
        }
    }
    a
}

/// Full-rank least squares through a Cholesky factorization of `K^T K`.
pub fn normal_equations_solve(k: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let chol = (k.transpose() * k).cholesky().expect("full column rank");
    chol.solve(&(k.transpose() * x))
}

/// Best rank-`r` Frobenius error of `x`, from the eigenvalues of `x x^T`.
pub fn eigen_tail(x: &DMatrix<f64>, r: usize) -> f64 {
    let gram = x * x.transpose();
    let mut ev: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.iter().skip(r).sum()
}

/// Random multi-frame problem with fractional shifts.
pub struct Instance {
    pub x: DMatrix<f64>,
    pub grid: Grid1D,
    pub shifts: FrameShifts,
    pub modes: Vec<DMatrix<f64>>,
    pub masks: Vec<Option<Vec<bool>>>,
}

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    blocks: usize,
    n: usize,
    ranks: &[usize],
    spec: ShiftSpec,
) -> Instance {
    let boundary = match spec.boundary {
        ShiftBoundary::Periodic => Boundary::Periodic,
        ShiftBoundary::ConstantExtrapolation => Boundary::NonPeriodic,
    };
    let grid = Grid1D::with_length(m, 1.0, boundary).unwrap();
    let rows = m * blocks;
    let x = random_matrix(rng, rows, n);
    let values = DMatrix::from_fn(ranks.len(), n, |_, _| rng.random_range(-0.4..0.4));
    let shifts = FrameShifts::new(values, spec).unwrap();
    let modes = ranks.iter().map(|&r| random_matrix(rng, rows, r)).collect();
    Instance { x, grid, shifts, modes, masks: vec![None; ranks.len()] }
}

pub fn evaluate(inst: &Instance, modes: &[DMatrix<f64>]) -> Evaluation {
    let ops = FrameOperators::new(&inst.shifts, &inst.grid, inst.x.nrows()).unwrap();
    let obj = SpodObjective::new(&inst.x, &ops, inst.masks.clone(), DEFAULT_RANK_TOL).unwrap();
    obj.evaluate(modes).unwrap()
}

/// Largest relative deviation between central differences of the residual
/// and the analytic directional derivative over `directions` random
/// directions.
pub fn gradient_check(inst: &Instance, rng: &mut ChaCha8Rng, directions: usize) -> f64 {
    let base = evaluate(inst, &inst.modes);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let mut dir: Vec<DMatrix<f64>> =
            inst.modes.iter().map(|w| random_matrix(rng, w.nrows(), w.ncols())).collect();
        for (d, mask) in dir.iter_mut().zip(&inst.masks) {
            if let Some(mask) = mask {
                for (i, &masked) in mask.iter().enumerate() {
                    if masked {
                        d.row_mut(i).fill(0.0);
                    }
                }
            }
        }
        let step = |s: f64| -> f64 {
            let moved: Vec<DMatrix<f64>> =
                inst.modes.iter().zip(&dir).map(|(w, d)| w + d * s).collect();
            evaluate(inst, &moved).residual
        };
        let fd = (step(eps) - step(-eps)) / (2.0 * eps);
        let analytic: f64 = base.gradients.iter().zip(&dir).map(|(g, d)| g.dot(d)).sum();
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-300);
        worst = worst.max(rel);
    }
    worst
}
