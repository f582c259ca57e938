//! Snapshot data model: grids, time axes, variable blocks and the
//! normalisations applied to snapshot matrices before decomposition.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    NonPeriodic,
}

/// Uniform one-dimensional grid with `m` nodes `x_i = i h`.
///
/// A periodic grid of length `L` identifies `x = L` with `x = 0`, so
/// `L = m h`; a non-periodic grid includes both end points, `L = (m - 1) h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    m: usize,
    h: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(m: usize, h: f64, boundary: Boundary) -> Result<Self> {
        if m < 2 {
            return Err(Error::input(format!("grid needs at least 2 nodes, got {m}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::input(format!("mesh width must be positive, got {h}")));
        }
        Ok(Self { m, h, boundary })
    }

    /// Grid with `m` nodes covering `[0, length]`.
    pub fn with_length(m: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if m < 2 {
            return Err(Error::input(format!("grid needs at least 2 nodes, got {m}")));
        }
        let cells = match boundary {
            Boundary::Periodic => m as f64,
            Boundary::NonPeriodic => (m - 1) as f64,
        };
        Self::new(m, length / cells, boundary)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.m as f64 * self.h,
            Boundary::NonPeriodic => (self.m - 1) as f64 * self.h,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|i| self.x(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    t: Vec<f64>,
}

impl TimeAxis {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::input("time axis needs at least one sample"));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time axis".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("time values must be strictly increasing"));
        }
        Ok(Self { t })
    }

    /// `n` samples `t_j = j dt`.
    pub fn uniform(n: usize, dt: f64) -> Result<Self> {
        Self::new((0..n).map(|j| j as f64 * dt).collect())
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    pub fn final_time(&self) -> f64 {
        *self.t.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub name: String,
    pub rows: Range<usize>,
}

impl VariableBlock {
    pub fn height(&self) -> usize {
        self.rows.len()
    }
}

/// Snapshot matrix together with its grid, time axis and the partition of
/// its rows into physical variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    data: DMatrix<f64>,
    grid: Grid1D,
    time: TimeAxis,
    blocks: Vec<VariableBlock>,
}

impl SnapshotSet {
    /// Builds a snapshot set from a stacked matrix and the ordered names of
    /// its variable blocks, each `grid.m()` rows tall.
    pub fn new(data: DMatrix<f64>, grid: Grid1D, time: TimeAxis, names: &[&str]) -> Result<Self> {
        let blocks = names
            .iter()
            .enumerate()
            .map(|(b, name)| VariableBlock {
                name: (*name).to_string(),
                rows: b * grid.m()..(b + 1) * grid.m(),
            })
            .collect();
        Self::from_blocks(data, grid, time, blocks)
    }

    pub fn from_blocks(
        data: DMatrix<f64>,
        grid: Grid1D,
        time: TimeAxis,
        blocks: Vec<VariableBlock>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::input("snapshot set needs at least one variable block"));
        }
        let mut next = 0;
        for block in &blocks {
            if block.rows.start != next {
                return Err(Error::input(format!(
                    "block `{}` starts at row {} but row {next} is next",
                    block.name, block.rows.start
                )));
            }
            if block.height() != grid.m() {
                return Err(Error::input(format!(
                    "block `{}` has {} rows, grid has {} nodes",
                    block.name,
                    block.height(),
                    grid.m()
                )));
            }
            next = block.rows.end;
        }
        if data.nrows() != next {
            return Err(Error::input(format!(
                "matrix has {} rows, blocks cover {next}",
                data.nrows()
            )));
        }
        if data.ncols() != time.n() {
            return Err(Error::input(format!(
                "matrix has {} columns, time axis has {} samples",
                data.ncols(),
                time.n()
            )));
        }
        Ok(Self { data, grid, time, blocks })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Rows of one variable block as an owned `m x n` matrix.
    pub fn block_data(&self, name: &str) -> Option<DMatrix<f64>> {
        self.block(name)
            .map(|b| self.data.rows(b.rows.start, b.height()).into_owned())
    }

    /// Same metadata, different matrix of identical shape.
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        Self::from_blocks(data, self.grid, self.time.clone(), self.blocks.clone())
    }
}

/// Squared-norm ratio `sum_j |X_j - Xt_j|^2 / sum_j |X_j|^2`.
pub fn relative_error(x: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != approx.shape() {
        return Err(Error::input(format!(
            "shape mismatch: {:?} vs {:?}",
            x.shape(),
            approx.shape()
        )));
    }
    let denom = x.norm_squared();
    if denom == 0.0 {
        return Err(Error::DivisionByZero("snapshot matrix is identically zero"));
    }
    Ok((x - approx).norm_squared() / denom)
}

/// Rescales every variable block to the Frobenius norm of the first block.
/// Returns the scaled set and one factor per block.
pub fn scale_variables(set: &SnapshotSet) -> Result<(SnapshotSet, Vec<f64>)> {
    let norms: Vec<f64> = set
        .blocks
        .iter()
        .map(|b| set.data.rows(b.rows.start, b.height()).norm())
        .collect();
    if let Some(pos) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateBlock(set.blocks[pos].name.clone()));
    }
    let target = norms[0];
    let factors: Vec<f64> = norms.iter().map(|&n| target / n).collect();
    let mut data = set.data.clone();
    for (block, &f) in set.blocks.iter().zip(&factors) {
        data.rows_mut(block.rows.start, block.height()).scale_mut(f);
    }
    Ok((set.with_data(data)?, factors))
}

/// Inverse of [`scale_variables`].
pub fn unscale_variables(set: &SnapshotSet, factors: &[f64]) -> Result<SnapshotSet> {
    if factors.len() != set.blocks.len() {
        return Err(Error::input(format!(
            "{} scale factors for {} blocks",
            factors.len(),
            set.blocks.len()
        )));
    }
    let mut data = set.data.clone();
    for (block, &f) in set.blocks.iter().zip(factors) {
        data.rows_mut(block.rows.start, block.height()).scale_mut(1.0 / f);
    }
    set.with_data(data)
}

/// Subtracts the temporal mean from every row of the matrix.
pub fn center_matrix_rows(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (centered, mean)
}

pub fn center_rows(set: &SnapshotSet) -> Result<(SnapshotSet, DVector<f64>)> {
    let (data, mean) = center_matrix_rows(&set.data);
    Ok((set.with_data(data)?, mean))
}
