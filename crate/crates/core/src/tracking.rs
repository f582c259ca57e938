//! Front tracking on snapshot data.
//!
//! The default statistic locates, for every pair of consecutive snapshots,
//! the grid node where `X_{j+1} - X_j` is largest. Optional windows restrict
//! the search to a space interval that may change over time, which lets
//! several transports in one field be tracked separately.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::Grid1D;

/// Search region active for the tracked columns in `time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub time: Range<usize>,
    pub space: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSchedule {
    windows: Vec<Window>,
}

impl WindowSchedule {
    /// Windows must be non-empty and ordered in time without overlap.
    pub fn new(windows: Vec<Window>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::config("window schedule is empty"));
        }
        for (idx, w) in windows.iter().enumerate() {
            if w.time.is_empty() || w.space.is_empty() {
                return Err(Error::config(format!("window {idx} is empty: {w:?}")));
            }
        }
        for pair in windows.windows(2) {
            if pair[1].time.start < pair[0].time.end {
                return Err(Error::config(format!(
                    "windows overlap or are out of order: {:?} then {:?}",
                    pair[0].time, pair[1].time
                )));
            }
        }
        Ok(Self { windows })
    }

    /// One window covering everything.
    pub fn full(columns: usize, m: usize) -> Result<Self> {
        Self::new(vec![Window { time: 0..columns, space: 0..m }])
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// Checks that the schedule covers exactly `0..columns` and fits in `m`
    /// nodes.
    fn check(&self, columns: usize, m: usize) -> Result<()> {
        let mut next = 0;
        for w in &self.windows {
            if w.time.start != next {
                return Err(Error::config(format!(
                    "tracked column {next} is not covered by any window"
                )));
            }
            if w.space.end > m {
                return Err(Error::config(format!(
                    "window space range {:?} exceeds {m} grid nodes",
                    w.space
                )));
            }
            next = w.time.end;
        }
        if next != columns {
            return Err(Error::config(format!(
                "windows cover columns 0..{next}, expected 0..{columns}"
            )));
        }
        Ok(())
    }

    fn space_at(&self, column: usize) -> &Range<usize> {
        &self
            .windows
            .iter()
            .find(|w| w.time.contains(&column))
            .expect("coverage checked")
            .space
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontStatistic {
    /// Argmax of `X_{j+1} - X_j`; yields `n - 1` positions.
    #[default]
    TemporalDifference,
    /// Argmax of `|X_{i+1,j} - X_{i,j}|`; yields `n` positions located
    /// between the two nodes of the steepest cell.
    SpatialGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrackOptions {
    pub statistic: FrontStatistic,
    /// Width of a centered moving average over the tracked positions;
    /// 0 or 1 disables smoothing.
    pub smoothing: usize,
}

/// First index of the maximum; ties go to the smallest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Front position for every snapshot of one variable block (`m x n`).
pub fn track_front(
    block: &DMatrix<f64>,
    grid: &Grid1D,
    windows: Option<&WindowSchedule>,
    opts: &TrackOptions,
) -> Result<Vec<f64>> {
    let (m, n) = block.shape();
    if m != grid.m() {
        return Err(Error::input(format!("block has {m} rows, grid has {} nodes", grid.m())));
    }
    if n < 2 && opts.statistic == FrontStatistic::TemporalDifference {
        return Err(Error::input("tracking needs at least two snapshots"));
    }
    let columns = match opts.statistic {
        FrontStatistic::TemporalDifference => n - 1,
        FrontStatistic::SpatialGradient => n,
    };
    let full;
    let schedule = match windows {
        Some(w) => w,
        None => {
            full = WindowSchedule::full(columns, m)?;
            &full
        }
    };
    schedule.check(columns, m)?;

    let mut positions = Vec::with_capacity(n);
    for j in 0..columns {
        let space = schedule.space_at(j).clone();
        let pos = match opts.statistic {
            FrontStatistic::TemporalDifference => {
                let i = argmax(space.clone().map(|i| block[(i, j + 1)] - block[(i, j)]));
                grid.x(space.start + i)
            }
            FrontStatistic::SpatialGradient => {
                if space.len() < 2 {
                    return Err(Error::config(format!(
                        "window {space:?} needs two nodes for a spatial gradient"
                    )));
                }
                let cells = space.start..space.end - 1;
                let i = argmax(cells.map(|i| (block[(i + 1, j)] - block[(i, j)]).abs()));
                grid.x(space.start + i) + 0.5 * grid.h()
            }
        };
        positions.push(pos);
    }
    if let Some(&last) = positions.last() {
        positions.resize(n, last);
    }
    if opts.smoothing > 1 {
        positions = moving_average(&positions, opts.smoothing);
    }
    Ok(positions)
}

fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half_lo = (width - 1) / 2;
    let half_hi = width / 2;
    (0..values.len())
        .map(|j| {
            let lo = j.saturating_sub(half_lo);
            let hi = (j + half_hi + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// `d_j = x_j - L/2`: shifts that bring the tracked front to the domain
/// center under `T(-d_j)`.
pub fn center_shifts(positions: &[f64], grid: &Grid1D) -> Vec<f64> {
    let mid = 0.5 * grid.length();
    positions.iter().map(|x| x - mid).collect()
}

/// Shifts of a frame that does not move.
pub fn zero_frame(n: usize) -> Vec<f64> {
    vec![0.0; n]
}
