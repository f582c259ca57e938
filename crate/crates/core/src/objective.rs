//! Discrete sPOD objective for fixed shifts.
//!
//! For snapshot `j`, the frame matrix `K_j` collects every shifted mode
//! `T(d^l_j) w^l_k`. Amplitudes are the minimum-norm least-squares
//! coefficients of `X_j` in the columns of `K_j`; eliminating them leaves an
//! objective that depends on the modes only:
//!
//! ```text
//! J~(w) = -sum_j |U_j1^T X_j|^2 = J(w) - |X|_F^2,   J(w) = sum_j |(I - U_j1 U_j1^T) X_j|^2
//! ```
//!
//! with `U_j1` an orthonormal basis of the numerical range of `K_j`. The
//! gradient with respect to mode `w^l_k` is
//! `-2 sum_j a^l_{k,j} T(d^l_j)^T (I - U_j1 U_j1^T) X_j`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::min_norm_solve;
use crate::shift::{build_stencil, ShiftSpec, ShiftStencil};
use crate::snapshot::Grid1D;

/// Default relative threshold below which singular values of `K_j` count
/// as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Snapshots per parallel work item. Fixed so that floating-point sums do
/// not depend on the number of threads.
const SNAPSHOT_CHUNK: usize = 8;

/// Shifts `d^l_j` of every frame at every snapshot, in space units.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameShifts {
    values: DMatrix<f64>,
    spec: ShiftSpec,
}

impl FrameShifts {
    /// `values` is `Ns x n`, one row per frame.
    pub fn new(values: DMatrix<f64>, spec: ShiftSpec) -> Result<Self> {
        spec.validate()?;
        if values.nrows() == 0 {
            return Err(Error::input("at least one frame is required"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("shift value {bad}")));
        }
        Ok(Self { values, spec })
    }

    pub fn from_rows(rows: &[Vec<f64>], spec: ShiftSpec) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::input("all frames need one shift per snapshot"));
        }
        let values = DMatrix::from_fn(rows.len(), n, |l, j| rows[l][j]);
        Self::new(values, spec)
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, frame: usize, j: usize) -> f64 {
        self.values[(frame, j)]
    }

    pub fn frame(&self, frame: usize) -> Vec<f64> {
        self.values.row(frame).iter().copied().collect()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn spec(&self) -> &ShiftSpec {
        &self.spec
    }
}

/// Modes of one frame, with optional entries pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBasis {
    modes: DMatrix<f64>,
    mask: Option<Vec<bool>>,
}

impl FrameBasis {
    /// Masked rows of `modes` are zeroed.
    pub fn new(mut modes: DMatrix<f64>, mask: Option<Vec<bool>>) -> Result<Self> {
        if let Some(mask) = &mask {
            if mask.len() != modes.nrows() {
                return Err(Error::input(format!(
                    "mask has {} entries, modes have {} rows",
                    mask.len(),
                    modes.nrows()
                )));
            }
            apply_mask(&mut modes, mask);
        }
        Ok(Self { modes, mask })
    }

    pub fn empty(rows: usize, mask: Option<Vec<bool>>) -> Self {
        Self { modes: DMatrix::zeros(rows, 0), mask }
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn rows(&self) -> usize {
        self.modes.nrows()
    }

    pub fn into_modes(self) -> DMatrix<f64> {
        self.modes
    }
}

pub(crate) fn apply_mask(modes: &mut DMatrix<f64>, mask: &[bool]) {
    for (i, &masked) in mask.iter().enumerate() {
        if masked {
            modes.row_mut(i).fill(0.0);
        }
    }
}

/// Result of a decomposition: modes, amplitudes and shifts of every frame.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub frames: Vec<FrameBasis>,
    /// Per frame an `r^l x n` amplitude matrix.
    pub amplitudes: Vec<DMatrix<f64>>,
    pub shifts: FrameShifts,
    pub grid: Grid1D,
}

impl Decomposition {
    pub fn new(
        frames: Vec<FrameBasis>,
        amplitudes: Vec<DMatrix<f64>>,
        shifts: FrameShifts,
        grid: Grid1D,
    ) -> Result<Self> {
        if frames.len() != shifts.frames() || amplitudes.len() != frames.len() {
            return Err(Error::input(format!(
                "{} frames, {} amplitude blocks, {} shift rows",
                frames.len(),
                amplitudes.len(),
                shifts.frames()
            )));
        }
        let rows = frames.first().map_or(0, FrameBasis::rows);
        if rows == 0 || !rows.is_multiple_of(grid.m()) {
            return Err(Error::input(format!(
                "mode length {rows} is not a multiple of the grid size {}",
                grid.m()
            )));
        }
        for (l, (f, a)) in frames.iter().zip(&amplitudes).enumerate() {
            if f.rows() != rows {
                return Err(Error::input(format!("frame {l} modes have {} rows", f.rows())));
            }
            if a.nrows() != f.rank() || a.ncols() != shifts.n() {
                return Err(Error::input(format!(
                    "frame {l}: amplitudes are {:?}, expected ({}, {})",
                    a.shape(),
                    f.rank(),
                    shifts.n()
                )));
            }
        }
        Ok(Self { frames, amplitudes, shifts, grid })
    }

    /// Mode-count vector `r`.
    pub fn mode_counts(&self) -> Vec<usize> {
        self.frames.iter().map(FrameBasis::rank).collect()
    }

    pub fn total_modes(&self) -> usize {
        self.mode_counts().iter().sum()
    }

    pub fn rows(&self) -> usize {
        self.frames[0].rows()
    }

    pub fn n(&self) -> usize {
        self.shifts.n()
    }

    /// `X~_j = sum_l T(d^l_j) sum_k a^l_{k,j} w^l_k`.
    pub fn reconstruct(&self) -> Result<DMatrix<f64>> {
        let ops = FrameOperators::new(&self.shifts, &self.grid, self.rows())?;
        let modes: Vec<&DMatrix<f64>> = self.frames.iter().map(FrameBasis::modes).collect();
        Ok(ops.reconstruct(&modes, &self.amplitudes))
    }
}

/// Precomputed shift stencils for every frame and snapshot.
#[derive(Debug, Clone)]
pub struct FrameOperators {
    forward: Vec<Vec<ShiftStencil>>,
    block_len: usize,
    rows: usize,
}

impl FrameOperators {
    /// `rows` is the length of a stacked snapshot; it must be a multiple of
    /// `grid.m()` and every block is shifted by the same amount.
    pub fn new(shifts: &FrameShifts, grid: &Grid1D, rows: usize) -> Result<Self> {
        if rows == 0 || !rows.is_multiple_of(grid.m()) {
            return Err(Error::input(format!(
                "snapshot length {rows} is not a multiple of the grid size {}",
                grid.m()
            )));
        }
        let forward = (0..shifts.frames())
            .map(|l| {
                (0..shifts.n())
                    .map(|j| build_stencil(shifts.get(l, j), grid, shifts.spec()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { forward, block_len: grid.m(), rows })
    }

    pub fn frames(&self) -> usize {
        self.forward.len()
    }

    pub fn n(&self) -> usize {
        self.forward.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn stencil(&self, frame: usize, j: usize) -> &ShiftStencil {
        &self.forward[frame][j]
    }

    /// `out = T(d^frame_j) v`.
    pub fn shift_into(&self, frame: usize, j: usize, v: &[f64], out: &mut [f64]) {
        self.forward[frame][j].apply_stacked_into(v, self.block_len, out);
    }

    /// `out += T(d^frame_j)^T v`.
    pub fn shift_transpose_add(&self, frame: usize, j: usize, v: &[f64], out: &mut [f64]) {
        self.forward[frame][j].apply_transpose_stacked_add(v, self.block_len, out);
    }

    /// `K_j`: shifted modes of all frames, frame-major.
    pub fn frame_matrix(&self, modes: &[&DMatrix<f64>], j: usize) -> DMatrix<f64> {
        let total: usize = modes.iter().map(|w| w.ncols()).sum();
        let mut k = DMatrix::zeros(self.rows, total);
        let mut c = 0;
        for (l, w) in modes.iter().enumerate() {
            for col in w.column_iter() {
                self.shift_into(l, j, col.as_slice(), k.column_mut(c).as_mut_slice());
                c += 1;
            }
        }
        k
    }

    pub fn reconstruct(&self, modes: &[&DMatrix<f64>], amplitudes: &[DMatrix<f64>]) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(self.rows, n);
        let mut shifted = vec![0.0; self.rows];
        for j in 0..n {
            for (l, (w, a)) in modes.iter().zip(amplitudes).enumerate() {
                if w.ncols() == 0 {
                    continue;
                }
                let local = *w * a.column(j);
                self.shift_into(l, j, local.as_slice(), &mut shifted);
                for (o, s) in out.column_mut(j).iter_mut().zip(&shifted) {
                    *o += s;
                }
            }
        }
        out
    }

    fn check_modes(&self, modes: &[&DMatrix<f64>]) -> Result<()> {
        if modes.len() != self.frames() {
            return Err(Error::input(format!(
                "{} mode sets for {} frames",
                modes.len(),
                self.frames()
            )));
        }
        if let Some(w) = modes.iter().find(|w| w.nrows() != self.rows) {
            return Err(Error::input(format!(
                "modes have {} rows, snapshots have {}",
                w.nrows(),
                self.rows
            )));
        }
        Ok(())
    }
}

/// `K_j` for the given frames.
pub fn assemble_frame_matrix(
    frames: &[FrameBasis],
    ops: &FrameOperators,
    j: usize,
) -> Result<DMatrix<f64>> {
    let modes: Vec<&DMatrix<f64>> = frames.iter().map(FrameBasis::modes).collect();
    ops.check_modes(&modes)?;
    if j >= ops.n() {
        return Err(Error::input(format!("snapshot index {j} out of range")));
    }
    Ok(ops.frame_matrix(&modes, j))
}

/// Minimum-norm amplitudes `a_j = V_1 S_1^{-1} U_1^T x_j`.
pub fn optimal_amplitudes(k: &DMatrix<f64>, x: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    if k.nrows() != x.len() {
        return Err(Error::input(format!(
            "K_j has {} rows, snapshot has {}",
            k.nrows(),
            x.len()
        )));
    }
    Ok(min_norm_solve(k, x.as_view(), rank_tol).coefficients)
}

/// Objective value, gradient and optimal amplitudes at one set of modes.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Reduced objective `J~ = -sum_j |U_j1^T X_j|^2`.
    pub reduced: f64,
    /// Residual `J = sum_j |X_j - K_j a_j|^2`, accumulated directly.
    pub residual: f64,
    /// Per frame, `rows x r^l`; masked rows are zero.
    pub gradients: Vec<DMatrix<f64>>,
    /// Per frame, `r^l x n`.
    pub amplitudes: Vec<DMatrix<f64>>,
    /// Snapshots whose `K_j` was numerically rank deficient.
    pub rank_deficient: usize,
}

struct ChunkSums {
    reduced: f64,
    residual: f64,
    gradients: Vec<DMatrix<f64>>,
    rank_deficient: usize,
}

/// Objective evaluator for fixed snapshots, shifts and masks.
#[derive(Debug, Clone)]
pub struct SpodObjective<'a> {
    snapshots: &'a DMatrix<f64>,
    ops: &'a FrameOperators,
    masks: Vec<Option<Vec<bool>>>,
    rank_tol: f64,
}

impl<'a> SpodObjective<'a> {
    pub fn new(
        snapshots: &'a DMatrix<f64>,
        ops: &'a FrameOperators,
        masks: Vec<Option<Vec<bool>>>,
        rank_tol: f64,
    ) -> Result<Self> {
        if snapshots.nrows() != ops.rows() || snapshots.ncols() != ops.n() {
            return Err(Error::input(format!(
                "snapshots are {:?}, shift operators expect ({}, {})",
                snapshots.shape(),
                ops.rows(),
                ops.n()
            )));
        }
        if masks.len() != ops.frames() {
            return Err(Error::input(format!(
                "{} masks for {} frames",
                masks.len(),
                ops.frames()
            )));
        }
        if let Some(m) = masks.iter().flatten().find(|m| m.len() != ops.rows()) {
            return Err(Error::input(format!("mask has {} entries", m.len())));
        }
        if !(0.0..1.0).contains(&rank_tol) {
            return Err(Error::config(format!("rank tolerance {rank_tol} outside [0, 1)")));
        }
        Ok(Self { snapshots, ops, masks, rank_tol })
    }

    pub fn snapshots(&self) -> &DMatrix<f64> {
        self.snapshots
    }

    pub fn operators(&self) -> &FrameOperators {
        self.ops
    }

    pub fn masks(&self) -> &[Option<Vec<bool>>] {
        &self.masks
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn evaluate(&self, modes: &[DMatrix<f64>]) -> Result<Evaluation> {
        let refs: Vec<&DMatrix<f64>> = modes.iter().collect();
        self.evaluate_refs(&refs)
    }

    pub fn evaluate_refs(&self, modes: &[&DMatrix<f64>]) -> Result<Evaluation> {
        self.ops.check_modes(modes)?;
        let n = self.ops.n();
        let ranks: Vec<usize> = modes.iter().map(|w| w.ncols()).collect();
        let mut amplitudes: Vec<DMatrix<f64>> =
            ranks.iter().map(|&r| DMatrix::zeros(r, n)).collect();

        let starts: Vec<usize> = (0..n).step_by(SNAPSHOT_CHUNK).collect();
        let chunks: Vec<(ChunkSums, Vec<DVector<f64>>)> = starts
            .par_iter()
            .map(|&start| self.chunk(modes, &ranks, start, (start + SNAPSHOT_CHUNK).min(n)))
            .collect();

        let mut reduced = 0.0;
        let mut residual = 0.0;
        let mut rank_deficient = 0;
        let mut gradients: Vec<DMatrix<f64>> =
            ranks.iter().map(|&r| DMatrix::zeros(self.ops.rows(), r)).collect();
        for (&start, (sums, coeffs)) in starts.iter().zip(chunks) {
            reduced += sums.reduced;
            residual += sums.residual;
            rank_deficient += sums.rank_deficient;
            for (g, part) in gradients.iter_mut().zip(&sums.gradients) {
                *g += part;
            }
            for (offset, a) in coeffs.iter().enumerate() {
                let mut c = 0;
                for (l, &r) in ranks.iter().enumerate() {
                    for k in 0..r {
                        amplitudes[l][(k, start + offset)] = a[c];
                        c += 1;
                    }
                }
            }
        }
        for (g, mask) in gradients.iter_mut().zip(&self.masks) {
            if let Some(mask) = mask {
                apply_mask(g, mask);
            }
        }
        if !reduced.is_finite() || gradients.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("sPOD objective or gradient".into()));
        }
        Ok(Evaluation { reduced, residual, gradients, amplitudes, rank_deficient })
    }

    fn chunk(
        &self,
        modes: &[&DMatrix<f64>],
        ranks: &[usize],
        start: usize,
        end: usize,
    ) -> (ChunkSums, Vec<DVector<f64>>) {
        let rows = self.ops.rows();
        let mut sums = ChunkSums {
            reduced: 0.0,
            residual: 0.0,
            gradients: ranks.iter().map(|&r| DMatrix::zeros(rows, r)).collect(),
            rank_deficient: 0,
        };
        let mut coeffs = Vec::with_capacity(end - start);
        let mut back = vec![0.0; rows];
        for j in start..end {
            let x = self.snapshots.column(j);
            let k = self.ops.frame_matrix(modes, j);
            let sol = min_norm_solve(&k, x, self.rank_tol);
            if sol.rank < k.ncols() {
                sums.rank_deficient += 1;
            }
            let proj = sol.range_basis.tr_mul(&x);
            sums.reduced -= proj.norm_squared();
            let r = x - &sol.range_basis * &proj;
            sums.residual += r.norm_squared();

            let mut c = 0;
            for (l, &rank) in ranks.iter().enumerate() {
                if rank == 0 {
                    continue;
                }
                back.fill(0.0);
                self.ops.shift_transpose_add(l, j, r.as_slice(), &mut back);
                for kk in 0..rank {
                    let coef = -2.0 * sol.coefficients[c + kk];
                    if coef == 0.0 {
                        continue;
                    }
                    for (g, b) in sums.gradients[l].column_mut(kk).iter_mut().zip(&back) {
                        *g += coef * b;
                    }
                }
                c += rank;
            }
            coeffs.push(sol.coefficients);
        }
        (sums, coeffs)
    }

    /// Builds the decomposition for `modes` with optimal amplitudes.
    pub fn decomposition(
        &self,
        modes: Vec<DMatrix<f64>>,
        shifts: &FrameShifts,
        grid: &Grid1D,
    ) -> Result<(Decomposition, Evaluation)> {
        let eval = self.evaluate(&modes)?;
        let frames = modes
            .into_iter()
            .zip(&self.masks)
            .map(|(w, mask)| FrameBasis::new(w, mask.clone()))
            .collect::<Result<Vec<_>>>()?;
        let dec = Decomposition::new(frames, eval.amplitudes.clone(), shifts.clone(), *grid)?;
        Ok((dec, eval))
    }
}

/// `J~`, gradients and amplitudes for a set of frames.
pub fn objective_and_gradient(
    snapshots: &DMatrix<f64>,
    frames: &[FrameBasis],
    ops: &FrameOperators,
    rank_tol: f64,
) -> Result<Evaluation> {
    let masks = frames.iter().map(|f| f.mask().map(<[bool]>::to_vec)).collect();
    let objective = SpodObjective::new(snapshots, ops, masks, rank_tol)?;
    let modes: Vec<&DMatrix<f64>> = frames.iter().map(FrameBasis::modes).collect();
    objective.evaluate_refs(&modes)
}

/// Residual `J = sum_j |X_j - X~_j|^2` of an arbitrary decomposition.
pub fn residual_cost(snapshots: &DMatrix<f64>, decomposition: &Decomposition) -> Result<f64> {
    let approx = decomposition.reconstruct()?;
    if approx.shape() != snapshots.shape() {
        return Err(Error::input("decomposition and snapshots differ in shape"));
    }
    Ok((snapshots - approx).norm_squared())
}

/// Concatenates mode matrices frame-major, mode-major, row-minor.
pub fn flatten_modes(modes: &[DMatrix<f64>]) -> Vec<f64> {
    modes.iter().flat_map(|w| w.as_slice().iter().copied()).collect()
}

/// Inverse of [`flatten_modes`].
pub fn unflatten_modes(flat: &[f64], rows: usize, ranks: &[usize]) -> Vec<DMatrix<f64>> {
    let mut offset = 0;
    ranks
        .iter()
        .map(|&r| {
            let len = rows * r;
            let w = DMatrix::from_column_slice(rows, r, &flat[offset..offset + len]);
            offset += len;
            w
        })
        .collect()
}
