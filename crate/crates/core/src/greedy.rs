//! Greedy sPOD driver: optimize the modes for an initial mode-count vector,
//! then repeatedly try one extra mode in every frame and keep the frame
//! whose candidate gives the smallest relative error.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::leading_left_singular_vectors;
use crate::objective::{
    apply_mask, flatten_modes, unflatten_modes, Decomposition, FrameBasis, FrameOperators,
    FrameShifts, SpodObjective, DEFAULT_RANK_TOL,
};
use crate::optimizer::{minimize, OptimizerOptions, Termination};
use crate::shift::build_stencil;
use crate::snapshot::{relative_error, Grid1D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Initial number of modes per frame.
    pub r0: Vec<usize>,
    /// Bound on the relative Frobenius error: the loop stops once
    /// `relative_error <= tol^2`.
    pub tol: f64,
    pub p_max: usize,
    pub optimizer: OptimizerOptions,
    pub rank_tol: f64,
    /// Reuse the incumbent modes for candidate solves instead of
    /// re-initializing from shifted-snapshot SVDs.
    pub warm_start: bool,
}

impl GreedyConfig {
    pub fn new(r0: Vec<usize>, tol: f64, p_max: usize) -> Self {
        Self {
            r0,
            tol,
            p_max,
            optimizer: OptimizerOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
            warm_start: true,
        }
    }

    pub fn validate(&self, frames: usize) -> Result<()> {
        if self.r0.len() != frames {
            return Err(Error::config(format!(
                "r0 has {} entries for {frames} frames",
                self.r0.len()
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("tolerance must be positive, got {}", self.tol)));
        }
        self.optimizer.validate().map_err(|e| Error::config(e.to_string()))
    }
}

/// Snapshots, grid, shifts and per-frame masks of one sPOD run.
#[derive(Debug, Clone)]
pub struct SpodProblem<'a> {
    snapshots: &'a DMatrix<f64>,
    grid: Grid1D,
    shifts: FrameShifts,
    masks: Vec<Option<Vec<bool>>>,
    ops: FrameOperators,
}

impl<'a> SpodProblem<'a> {
    pub fn new(snapshots: &'a DMatrix<f64>, grid: Grid1D, shifts: FrameShifts) -> Result<Self> {
        if shifts.n() != snapshots.ncols() {
            return Err(Error::input(format!(
                "{} shift columns for {} snapshots",
                shifts.n(),
                snapshots.ncols()
            )));
        }
        let ops = FrameOperators::new(&shifts, &grid, snapshots.nrows())?;
        let masks = vec![None; shifts.frames()];
        Ok(Self { snapshots, grid, shifts, masks, ops })
    }

    pub fn with_masks(mut self, masks: Vec<Option<Vec<bool>>>) -> Result<Self> {
        if masks.len() != self.frames() {
            return Err(Error::input(format!(
                "{} masks for {} frames",
                masks.len(),
                self.frames()
            )));
        }
        if let Some(m) = masks.iter().flatten().find(|m| m.len() != self.rows()) {
            return Err(Error::input(format!(
                "mask has {} entries, snapshots have {} rows",
                m.len(),
                self.rows()
            )));
        }
        self.masks = masks;
        Ok(self)
    }

    pub fn frames(&self) -> usize {
        self.shifts.frames()
    }

    pub fn rows(&self) -> usize {
        self.snapshots.nrows()
    }

    pub fn n(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn snapshots(&self) -> &DMatrix<f64> {
        self.snapshots
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn shifts(&self) -> &FrameShifts {
        &self.shifts
    }

    pub fn masks(&self) -> &[Option<Vec<bool>>] {
        &self.masks
    }

    pub fn operators(&self) -> &FrameOperators {
        &self.ops
    }

    pub fn objective(&self, rank_tol: f64) -> Result<SpodObjective<'_>> {
        SpodObjective::new(self.snapshots, &self.ops, self.masks.clone(), rank_tol)
    }

    /// `[T(-d^l_1) M_1 ... T(-d^l_n) M_n]` for frame `l`.
    pub fn back_shifted(&self, frame: usize, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let stencil = build_stencil(-self.shifts.get(frame, j), &self.grid, self.shifts.spec())?;
            stencil.apply_stacked_into(
                m.column(j).as_slice(),
                self.grid.m(),
                out.column_mut(j).as_mut_slice(),
            );
        }
        Ok(out)
    }

    /// Leading `r0[l]` left singular vectors of the back-shifted snapshot
    /// matrix of every frame, masked afterwards.
    pub fn initialize_frames(&self, r0: &[usize]) -> Result<Vec<FrameBasis>> {
        if r0.len() != self.frames() {
            return Err(Error::input(format!(
                "r0 has {} entries for {} frames",
                r0.len(),
                self.frames()
            )));
        }
        let limit = self.rows().min(self.n());
        if let Some((l, r)) = r0.iter().enumerate().find(|(_, &r)| r > limit) {
            return Err(Error::input(format!(
                "frame {l} asks for {r} modes, at most {limit} are available"
            )));
        }
        r0.iter()
            .enumerate()
            .map(|(l, &r)| {
                let mask = self.masks[l].clone();
                if r == 0 {
                    return Ok(FrameBasis::empty(self.rows(), mask));
                }
                let back = self.back_shifted(l, self.snapshots)?;
                FrameBasis::new(leading_left_singular_vectors(&back, r), mask)
            })
            .collect()
    }
}

/// Shifted-snapshot SVD initialization for frame modes.
pub fn initialize_frames(problem: &SpodProblem<'_>, r0: &[usize]) -> Result<Vec<FrameBasis>> {
    problem.initialize_frames(r0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyTermination {
    ToleranceReached,
    IterationCap,
    /// Every candidate of an iteration (or the initial solve) failed.
    OptimizerFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Greedy iteration; 0 is the initial solve.
    pub iteration: usize,
    /// Frame that received the extra mode, `None` for the initial solve.
    pub frame: Option<usize>,
    pub mode_counts: Vec<usize>,
    pub error: f64,
    pub optimizer_iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    pub initial_grad_norm: f64,
    pub final_grad_norm: f64,
    /// Snapshots whose frame matrix was rank deficient at the final modes.
    pub rank_deficient_snapshots: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub iteration: usize,
    /// Relative error of the candidate with one more mode in frame `i`.
    pub candidate_errors: Vec<f64>,
    pub chosen_frame: usize,
    pub error: f64,
    pub mode_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyReport {
    pub initial_mode_counts: Vec<usize>,
    pub initial_error: f64,
    pub iterations: Vec<GreedyIteration>,
    /// Error after the initial solve and after every iteration.
    pub error_history: Vec<f64>,
    pub final_mode_counts: Vec<usize>,
    pub final_error: f64,
    pub termination: GreedyTermination,
    pub solves: Vec<SolveDiagnostics>,
}

impl GreedyReport {
    pub fn total_modes(&self) -> usize {
        self.final_mode_counts.iter().sum()
    }
}

/// Progress notifications emitted while the driver runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Progress<'r> {
    Initial { error: f64, mode_counts: &'r [usize] },
    Candidate { iteration: usize, frame: usize, error: f64 },
    Accepted { iteration: usize, frame: usize, error: f64, mode_counts: &'r [usize] },
}

struct Solved {
    modes: Vec<DMatrix<f64>>,
    amplitudes: Vec<DMatrix<f64>>,
    error: f64,
    diagnostics: SolveDiagnostics,
}

fn counts_of(modes: &[DMatrix<f64>]) -> Vec<usize> {
    modes.iter().map(|w| w.ncols()).collect()
}

fn solve(
    problem: &SpodProblem<'_>,
    objective: &SpodObjective<'_>,
    initial: Vec<DMatrix<f64>>,
    opts: &OptimizerOptions,
    iteration: usize,
    frame: Option<usize>,
) -> Result<Solved> {
    let rows = problem.rows();
    let ranks = counts_of(&initial);
    let mut diagnostics = SolveDiagnostics {
        iteration,
        frame,
        mode_counts: ranks.clone(),
        error: f64::INFINITY,
        optimizer_iterations: 0,
        evaluations: 0,
        termination: None,
        initial_grad_norm: 0.0,
        final_grad_norm: 0.0,
        rank_deficient_snapshots: 0,
        failed: false,
    };

    let modes = if ranks.iter().sum::<usize>() == 0 {
        initial
    } else {
        let callback = |x: &[f64], grad: &mut [f64]| -> f64 {
            let modes = unflatten_modes(x, rows, &ranks);
            match objective.evaluate(&modes) {
                Ok(eval) => {
                    let flat = flatten_modes(&eval.gradients);
                    grad.copy_from_slice(&flat);
                    eval.residual
                }
                Err(_) => f64::NAN,
            }
        };
        match minimize(callback, flatten_modes(&initial), opts) {
            Ok(min) => {
                diagnostics.optimizer_iterations = min.trace.iterations();
                diagnostics.evaluations = min.trace.evaluations;
                diagnostics.termination = min.trace.termination;
                diagnostics.initial_grad_norm = min.trace.grad_norms[0];
                diagnostics.final_grad_norm = *min.trace.grad_norms.last().expect("start recorded");
                unflatten_modes(&min.x, rows, &ranks)
            }
            Err(_) => {
                diagnostics.failed = true;
                initial
            }
        }
    };

    let eval = objective.evaluate(&modes)?;
    let refs: Vec<&DMatrix<f64>> = modes.iter().collect();
    let approx = problem.operators().reconstruct(&refs, &eval.amplitudes);
    let error = relative_error(problem.snapshots(), &approx)?;
    diagnostics.error = error;
    diagnostics.rank_deficient_snapshots = eval.rank_deficient;
    Ok(Solved { modes, amplitudes: eval.amplitudes, error, diagnostics })
}

/// Initial guess for the candidate with one more mode in `frame`.
fn candidate_start(
    problem: &SpodProblem<'_>,
    incumbent: &Solved,
    counts: &[usize],
    frame: usize,
    warm_start: bool,
) -> Result<Vec<DMatrix<f64>>> {
    if !warm_start {
        let mut r = counts.to_vec();
        r[frame] += 1;
        return Ok(problem
            .initialize_frames(&r)?
            .into_iter()
            .map(FrameBasis::into_modes)
            .collect());
    }
    let refs: Vec<&DMatrix<f64>> = incumbent.modes.iter().collect();
    let residual = problem.snapshots() - problem.operators().reconstruct(&refs, &incumbent.amplitudes);
    let back = problem.back_shifted(frame, &residual)?;
    let mut extra = leading_left_singular_vectors(&back, 1);
    if let Some(mask) = &problem.masks()[frame] {
        apply_mask(&mut extra, mask);
    }
    let mut modes = incumbent.modes.clone();
    let w = &modes[frame];
    let mut grown = DMatrix::zeros(w.nrows(), w.ncols() + 1);
    grown.columns_mut(0, w.ncols()).copy_from(w);
    grown.column_mut(w.ncols()).copy_from(&extra.column(0));
    modes[frame] = grown;
    Ok(modes)
}

pub fn spod_decompose(
    problem: &SpodProblem<'_>,
    config: &GreedyConfig,
) -> Result<(Decomposition, GreedyReport)> {
    spod_decompose_with_progress(problem, config, |_| {})
}

pub fn spod_decompose_with_progress<P>(
    problem: &SpodProblem<'_>,
    config: &GreedyConfig,
    mut progress: P,
) -> Result<(Decomposition, GreedyReport)>
where
    P: FnMut(Progress<'_>),
{
    config.validate(problem.frames())?;
    let objective = problem.objective(config.rank_tol)?;
    let initial: Vec<DMatrix<f64>> = problem
        .initialize_frames(&config.r0)?
        .into_iter()
        .map(FrameBasis::into_modes)
        .collect();

    let mut current = solve(problem, &objective, initial, &config.optimizer, 0, None)?;
    let mut counts = config.r0.clone();
    let mut solves = vec![current.diagnostics.clone()];
    let mut iterations = Vec::new();
    let mut history = vec![current.error];
    let initial_error = current.error;
    progress(Progress::Initial { error: current.error, mode_counts: &counts });

    let mut termination = if current.diagnostics.failed {
        GreedyTermination::OptimizerFailure
    } else {
        GreedyTermination::IterationCap
    };
    let mut p = 0;
    while termination != GreedyTermination::OptimizerFailure
        && current.error > config.tol * config.tol
        && p < config.p_max
    {
        p += 1;
        let candidates: Vec<Result<Solved>> = (0..problem.frames())
            .into_par_iter()
            .map(|i| {
                let start = candidate_start(problem, &current, &counts, i, config.warm_start)?;
                solve(problem, &objective, start, &config.optimizer, p, Some(i))
            })
            .collect();
        let candidates = candidates.into_iter().collect::<Result<Vec<_>>>()?;

        let mut best: Option<usize> = None;
        let mut candidate_errors = Vec::with_capacity(candidates.len());
        for (i, cand) in candidates.iter().enumerate() {
            solves.push(cand.diagnostics.clone());
            let err = if cand.diagnostics.failed { f64::INFINITY } else { cand.error };
            candidate_errors.push(err);
            progress(Progress::Candidate { iteration: p, frame: i, error: err });
            if err.is_finite() && best.is_none_or(|b| err < candidate_errors[b]) {
                best = Some(i);
            }
        }
        let Some(q) = best else {
            termination = GreedyTermination::OptimizerFailure;
            break;
        };
        current = candidates.into_iter().nth(q).expect("index in range");
        counts[q] += 1;
        history.push(current.error);
        progress(Progress::Accepted { iteration: p, frame: q, error: current.error, mode_counts: &counts });
        iterations.push(GreedyIteration {
            iteration: p,
            candidate_errors,
            chosen_frame: q,
            error: current.error,
            mode_counts: counts.clone(),
        });
    }
    if termination != GreedyTermination::OptimizerFailure && current.error <= config.tol * config.tol {
        termination = GreedyTermination::ToleranceReached;
    }

    let frames = current
        .modes
        .into_iter()
        .zip(problem.masks())
        .map(|(w, mask)| FrameBasis::new(w, mask.clone()))
        .collect::<Result<Vec<_>>>()?;
    let decomposition =
        Decomposition::new(frames, current.amplitudes, problem.shifts().clone(), *problem.grid())?;
    let report = GreedyReport {
        initial_mode_counts: config.r0.clone(),
        initial_error,
        iterations,
        error_history: history,
        final_mode_counts: counts,
        final_error: current.error,
        termination,
        solves,
    };
    Ok((decomposition, report))
}
