//! Discrete shift operators `T(d)` on uniform 1D grids.
//!
//! `T(d)` translates a grid function by `d` space units: `(T(d) v)(x) = v(x - d)`,
//! so a positive shift moves features towards larger `x`. Shifts that are
//! multiples of the mesh width act as index permutations (periodic) or as
//! powers of the clamped down-shift matrix (constant extrapolation). Other
//! shifts interpolate with Lagrange polynomials of degree 1 or 3.
//!
//! All operators are applied matrix-free through a [`ShiftStencil`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::Grid1D;

/// Shifts within this many mesh widths of an integer are treated as exact
/// grid multiples.
const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftBoundary {
    Periodic,
    ConstantExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub boundary: ShiftBoundary,
    pub interp_degree: usize,
}

impl ShiftSpec {
    pub fn new(boundary: ShiftBoundary, interp_degree: usize) -> Result<Self> {
        let spec = Self { boundary, interp_degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn periodic(interp_degree: usize) -> Self {
        Self { boundary: ShiftBoundary::Periodic, interp_degree }
    }

    pub fn constant(interp_degree: usize) -> Self {
        Self { boundary: ShiftBoundary::ConstantExtrapolation, interp_degree }
    }

    pub fn validate(&self) -> Result<()> {
        match self.interp_degree {
            1 | 3 => Ok(()),
            d => Err(Error::config(format!(
                "interpolation degree {d} not supported (use 1 or 3)"
            ))),
        }
    }
}

/// `out[i] = sum_s weights[s] * v[i + offset + s]`, with out-of-range
/// indices wrapped or clamped according to `boundary`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStencil {
    pub offset: isize,
    pub weights: Vec<f64>,
    pub boundary: ShiftBoundary,
}

impl ShiftStencil {
    #[inline]
    fn index(&self, i: isize, m: usize) -> usize {
        match self.boundary {
            ShiftBoundary::Periodic => i.rem_euclid(m as isize) as usize,
            ShiftBoundary::ConstantExtrapolation => i.clamp(0, m as isize - 1) as usize,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.offset == 0 && self.weights == [1.0]
    }

    /// Output indices `i` whose stencil `i + offset .. i + offset + len`
    /// lies inside `0..m`.
    fn interior(&self, m: usize) -> std::ops::Range<usize> {
        let len = self.weights.len() as isize;
        let lo = (-self.offset).clamp(0, m as isize) as usize;
        let hi = (m as isize - self.offset - len + 1).clamp(lo as isize, m as isize) as usize;
        lo..hi
    }

    /// `out = T v` on one grid block.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let m = v.len();
        debug_assert_eq!(out.len(), m);
        let inner = self.interior(m);
        let len = self.weights.len();
        for i in (0..inner.start).chain(inner.end..m) {
            let base = i as isize + self.offset;
            let mut acc = 0.0;
            for (s, w) in self.weights.iter().enumerate() {
                acc += w * v[self.index(base + s as isize, m)];
            }
            out[i] = acc;
        }
        let start = (inner.start as isize + self.offset) as usize;
        let windows = v[start.min(m)..].windows(len);
        for (o, win) in out[inner].iter_mut().zip(windows) {
            *o = win.iter().zip(&self.weights).map(|(a, w)| w * a).sum();
        }
    }

    /// `out += T^T v` on one grid block.
    pub fn apply_transpose_add(&self, v: &[f64], out: &mut [f64]) {
        let m = v.len();
        debug_assert_eq!(out.len(), m);
        let inner = self.interior(m);
        let len = self.weights.len();
        for i in (0..inner.start).chain(inner.end..m) {
            let vi = v[i];
            let base = i as isize + self.offset;
            for (s, w) in self.weights.iter().enumerate() {
                out[self.index(base + s as isize, m)] += w * vi;
            }
        }
        for i in inner {
            let vi = v[i];
            let base = (i as isize + self.offset) as usize;
            for (o, w) in out[base..base + len].iter_mut().zip(&self.weights) {
                *o += w * vi;
            }
        }
    }

    /// Applies the stencil independently to each consecutive block of
    /// `block_len` entries of a stacked vector.
    pub fn apply_stacked_into(&self, v: &[f64], block_len: usize, out: &mut [f64]) {
        for (vb, ob) in v.chunks(block_len).zip(out.chunks_mut(block_len)) {
            self.apply_into(vb, ob);
        }
    }

    pub fn apply_transpose_stacked_add(&self, v: &[f64], block_len: usize, out: &mut [f64]) {
        for (vb, ob) in v.chunks(block_len).zip(out.chunks_mut(block_len)) {
            self.apply_transpose_add(vb, ob);
        }
    }
}

/// Lagrange basis polynomials for `nodes`, evaluated at `x`.
pub fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (xi - xj))
                .product()
        })
        .collect()
}

/// Stencil of `T(d)` on `grid`.
///
/// With `d = (k + rho) h`, `rho` in `[0, 1)`, the value at node `i` is
/// sampled at fractional index `i - k - rho`. For `rho = 0` this is a
/// single weight; otherwise the degree-1 stencil uses the two enclosing
/// nodes and the degree-3 stencil the four nodes around them.
pub fn build_stencil(d: f64, grid: &Grid1D, spec: &ShiftSpec) -> Result<ShiftStencil> {
    spec.validate()?;
    if !d.is_finite() {
        return Err(Error::NonFinite(format!("shift {d}")));
    }
    let u = d / grid.h();
    let nearest = u.round();
    if (u - nearest).abs() < GRID_SNAP {
        return Ok(ShiftStencil {
            offset: -(nearest as isize),
            weights: vec![1.0],
            boundary: spec.boundary,
        });
    }
    let k = u.floor();
    let rho = u - k;
    // sample position relative to node (i - k - 1)
    let sigma = 1.0 - rho;
    let k = k as isize;
    let (offset, weights) = match spec.interp_degree {
        1 => (-k - 1, vec![rho, sigma]),
        3 => (-k - 2, lagrange_weights(&[-1.0, 0.0, 1.0, 2.0], sigma)),
        _ => unreachable!("validated above"),
    };
    Ok(ShiftStencil { offset, weights, boundary: spec.boundary })
}

pub fn apply_shift(v: &[f64], d: f64, grid: &Grid1D, spec: &ShiftSpec) -> Result<Vec<f64>> {
    check_len(v, grid)?;
    let stencil = build_stencil(d, grid, spec)?;
    let mut out = vec![0.0; v.len()];
    stencil.apply_into(v, &mut out);
    Ok(out)
}

/// Exact transpose of [`apply_shift`] for the same `(d, grid, spec)`.
pub fn apply_shift_transpose(
    v: &[f64],
    d: f64,
    grid: &Grid1D,
    spec: &ShiftSpec,
) -> Result<Vec<f64>> {
    check_len(v, grid)?;
    let stencil = build_stencil(d, grid, spec)?;
    let mut out = vec![0.0; v.len()];
    stencil.apply_transpose_add(v, &mut out);
    Ok(out)
}

/// Dense `m x m` matrix of `T(d)`. Only meant for checking the matrix-free
/// routines.
pub fn dense_operator(d: f64, grid: &Grid1D, spec: &ShiftSpec) -> Result<DMatrix<f64>> {
    let m = grid.m();
    let stencil = build_stencil(d, grid, spec)?;
    let mut t = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    let mut col = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        stencil.apply_into(&e, &mut col);
        t.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(t)
}

fn check_len(v: &[f64], grid: &Grid1D) -> Result<()> {
    if v.len() != grid.m() {
        return Err(Error::input(format!(
            "vector has length {}, grid has {} nodes",
            v.len(),
            grid.m()
        )));
    }
    Ok(())
}
