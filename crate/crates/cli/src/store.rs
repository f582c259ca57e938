//! Decomposition directories.
//!
//! ```text
//! decomposition.json      grid, time axis, blocks, shift spec, frames, transforms
//! shifts.csv              j,t,<frame>...
//! modes_<frame>.csv       row,mode_0,...        (rows x r)
//! amplitudes_<frame>.csv  j,a_0,...             (n x r)
//! mean.csv                row,mean              (only for centered runs)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use spod::{
    unscale_variables, Decomposition, FrameBasis, FrameShifts, Grid1D, ShiftSpec, SnapshotSet, TimeAxis,
};

use crate::error::{io_err, CliError, CliResult};
use crate::format::{read_matrix, read_shift_column, write_matrix, write_shifts_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub name: String,
    pub rank: usize,
    /// Variable blocks pinned to zero in this frame's modes.
    pub mask: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMeta {
    pub snapshots: PathBuf,
    pub grid: Grid1D,
    pub time: Vec<f64>,
    pub blocks: Vec<String>,
    pub shift_spec: ShiftSpec,
    pub frames: Vec<FrameMeta>,
    /// Per-block factors the snapshots were multiplied by before decomposing.
    pub scale_factors: Option<Vec<f64>>,
    pub centered: bool,
}

/// A decomposition together with what is needed to map it back onto the
/// original snapshots.
pub struct Stored {
    pub meta: DecompositionMeta,
    pub decomposition: Decomposition,
    pub mean: Option<DVector<f64>>,
}

/// Row mask for the named blocks of `set`.
pub fn block_mask(blocks: &[String], m: usize, names: &[String]) -> CliResult<Option<Vec<bool>>> {
    if names.is_empty() {
        return Ok(None);
    }
    let mut mask = vec![false; m * blocks.len()];
    for name in names {
        let b = blocks
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| CliError::usage(format!("mask names unknown variable block `{name}`")))?;
        mask[b * m..(b + 1) * m].iter_mut().for_each(|v| *v = true);
    }
    Ok(Some(mask))
}

impl Stored {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let json = serde_json::to_string_pretty(&self.meta)?;
        let meta_path = dir.join("decomposition.json");
        fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
        let names: Vec<String> = self.meta.frames.iter().map(|f| f.name.clone()).collect();
        write_shifts_csv(&dir.join("shifts.csv"), &names, &self.meta.time, &self.decomposition.shifts)?;
        for (l, f) in self.meta.frames.iter().enumerate() {
            write_matrix(&dir.join(format!("modes_{}.csv", f.name)), "row", "mode_", self.decomposition.frames[l].modes())?;
            write_matrix(
                &dir.join(format!("amplitudes_{}.csv", f.name)),
                "j",
                "a_",
                &self.decomposition.amplitudes[l].transpose(),
            )?;
        }
        if let Some(mean) = &self.mean {
            write_matrix(&dir.join("mean.csv"), "row", "mean", &DMatrix::from_column_slice(mean.len(), 1, mean.as_slice()))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let meta_path = dir.join("decomposition.json");
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: DecompositionMeta = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", meta_path.display())))?;
        let m = meta.grid.m();
        let rows = m * meta.blocks.len();
        let n = meta.time.len();
        let shift_path = dir.join("shifts.csv");
        let mut shift_rows = Vec::new();
        let mut frames = Vec::new();
        let mut amplitudes = Vec::new();
        for f in &meta.frames {
            shift_rows.push(read_shift_column(&shift_path, &f.name)?);
            let modes = read_matrix(&dir.join(format!("modes_{}.csv", f.name)))?;
            let amps = read_matrix(&dir.join(format!("amplitudes_{}.csv", f.name)))?.transpose();
            let modes = if modes.nrows() == 0 { DMatrix::zeros(rows, 0) } else { modes };
            let amps = if amps.ncols() == 0 { DMatrix::zeros(0, n) } else { amps };
            if modes.shape() != (rows, f.rank) || amps.shape() != (f.rank, n) {
                return Err(CliError::data(format!(
                    "frame `{}`: modes {:?} / amplitudes {:?} do not match rank {} on {rows} x {n}",
                    f.name,
                    modes.shape(),
                    amps.shape(),
                    f.rank
                )));
            }
            frames.push(FrameBasis::new(modes, block_mask(&meta.blocks, m, &f.mask)?)?);
            amplitudes.push(amps);
        }
        let shifts = FrameShifts::from_rows(&shift_rows, meta.shift_spec)?;
        let decomposition = Decomposition::new(frames, amplitudes, shifts, meta.grid)?;
        let mean = if meta.centered {
            let mean = read_matrix(&dir.join("mean.csv"))?;
            if mean.shape() != (rows, 1) {
                return Err(CliError::data(format!("mean.csv has shape {:?}, expected ({rows}, 1)", mean.shape())));
            }
            Some(DVector::from_column_slice(mean.as_slice()))
        } else {
            None
        };
        Ok(Self { meta, decomposition, mean })
    }

    /// Reconstruction in the units of the original snapshots.
    pub fn reconstruct(&self) -> CliResult<SnapshotSet> {
        let mut data = self.decomposition.reconstruct()?;
        if let Some(mean) = &self.mean {
            for mut col in data.column_iter_mut() {
                col += mean;
            }
        }
        let names: Vec<&str> = self.meta.blocks.iter().map(String::as_str).collect();
        let set = SnapshotSet::new(data, self.meta.grid, TimeAxis::new(self.meta.time.clone())?, &names)?;
        Ok(match &self.meta.scale_factors {
            Some(f) => unscale_variables(&set, f)?,
            None => set,
        })
    }
}
