//! On-disk formats.
//!
//! # Snapshot files
//!
//! A text header followed by raw data:
//!
//! ```text
//! SPOD-SNAPSHOTS 1
//! m=4 n=2 h=0.25 boundary=periodic
//! block=q:4
//! time=0,0.5
//! data
//! <rows * n little-endian f64 values, column-major>
//! ```
//!
//! Header lines hold whitespace-separated `key=value` tokens; `#` starts a
//! comment. `block=name:height` may repeat and lists the variable blocks in
//! row order (default: a single block `q`). `time` is optional and defaults
//! to `t_j = j`. The header ends with a line reading `data`; the remaining
//! bytes must hold exactly `rows * n` finite values.
//!
//! # CSV files
//!
//! Snapshot CSVs carry one row per grid node and variable
//! (`variable,node,x,<t_0>,<t_1>,...`). Shift CSVs carry one row per
//! snapshot (`j,t,<frame>,...`). Numbers are written in shortest
//! round-trip form, so CSV output is lossless as well.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use spod::{Boundary, FrameShifts, Grid1D, ShiftSpec, SnapshotSet, TimeAxis, VariableBlock};

use crate::error::{io_err, CliError, CliResult};

pub const MAGIC: &str = "SPOD-SNAPSHOTS 1";

pub fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::NonPeriodic => "non-periodic",
    }
}

pub fn parse_boundary(s: &str) -> Option<Boundary> {
    match s {
        "periodic" => Some(Boundary::Periodic),
        "non-periodic" | "nonperiodic" => Some(Boundary::NonPeriodic),
        _ => None,
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn encode_snapshots(set: &SnapshotSet) -> Vec<u8> {
    let grid = set.grid();
    let data = set.data();
    let mut out = format!(
        "{MAGIC}\nm={} n={} h={} boundary={}\n",
        grid.m(),
        data.ncols(),
        grid.h(),
        boundary_name(grid.boundary())
    );
    for b in set.blocks() {
        out.push_str(&format!("block={}:{}\n", b.name, b.height()));
    }
    out.push_str(&format!("time={}\ndata\n", join(set.time().values())));
    let mut bytes = out.into_bytes();
    bytes.reserve(data.len() * 8);
    for v in data.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn write_snapshots(set: &SnapshotSet, path: &Path) -> CliResult<()> {
    fs::write(path, encode_snapshots(set)).map_err(io_err(path))
}

fn header_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::data(format!("header line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| header_err(line, format!("cannot parse {key}=`{v}`")))
}

pub fn decode_snapshots(bytes: &[u8]) -> CliResult<SnapshotSet> {
    let mut pos = 0;
    let mut lineno = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| *pos + i);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).into_owned();
        *pos = (end + 1).min(bytes.len());
        Some(line)
    };

    match next_line(&mut pos) {
        Some(l) if l.trim_end() == MAGIC => lineno += 1,
        _ => return Err(header_err(1, format!("missing `{MAGIC}` signature"))),
    }

    let (mut m, mut n, mut h, mut boundary) = (None, None, None, None);
    let mut blocks: Vec<(String, usize)> = Vec::new();
    let mut time: Option<Vec<f64>> = None;
    let mut found_data = false;
    while let Some(raw) = next_line(&mut pos) {
        lineno += 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line == "data" {
            found_data = true;
            break;
        }
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| header_err(lineno, format!("expected key=value, got `{token}`")))?;
            match key {
                "m" => m = Some(parse_num::<usize>(lineno, key, value)?),
                "n" => n = Some(parse_num::<usize>(lineno, key, value)?),
                "h" => h = Some(parse_num::<f64>(lineno, key, value)?),
                "boundary" => {
                    boundary = Some(
                        parse_boundary(value)
                            .ok_or_else(|| header_err(lineno, format!("unknown boundary `{value}`")))?,
                    )
                }
                "block" => {
                    let (name, height) = value
                        .split_once(':')
                        .ok_or_else(|| header_err(lineno, format!("block needs name:height, got `{value}`")))?;
                    blocks.push((name.to_string(), parse_num(lineno, "block height", height)?));
                }
                "time" => {
                    let t = value
                        .split(',')
                        .map(|v| parse_num::<f64>(lineno, "time", v))
                        .collect::<CliResult<Vec<_>>>()?;
                    time = Some(t);
                }
                _ => return Err(header_err(lineno, format!("unknown key `{key}`"))),
            }
        }
    }
    if !found_data {
        return Err(header_err(lineno, "header ended without a `data` line"));
    }
    let missing = |k: &str| header_err(lineno, format!("missing `{k}`"));
    let m = m.ok_or_else(|| missing("m"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let h = h.ok_or_else(|| missing("h"))?;
    let boundary = boundary.ok_or_else(|| missing("boundary"))?;
    if blocks.is_empty() {
        blocks.push(("q".into(), m));
    }
    if let Some((name, height)) = blocks.iter().find(|(_, height)| *height != m) {
        return Err(CliError::data(format!(
            "block `{name}` has height {height}, but m={m}"
        )));
    }
    let time = match time {
        Some(t) if t.len() != n => {
            return Err(CliError::data(format!("time axis has {} values, but n={n}", t.len())))
        }
        Some(t) => t,
        None => (0..n).map(|j| j as f64).collect(),
    };
    let rows = m * blocks.len();

    let payload = &bytes[pos..];
    let expected = rows * n;
    if payload.len() != expected * 8 {
        return Err(CliError::data(format!(
            "data section holds {} elements ({} bytes), expected {expected} elements ({rows} x {n})",
            payload.len() / 8,
            payload.len()
        )));
    }
    let mut values = Vec::with_capacity(expected);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(CliError::data(format!(
                "non-finite value {v} at element {k} (row {}, column {}, byte offset {})",
                k % rows,
                k / rows,
                pos + 8 * k
            )));
        }
        values.push(v);
    }
    let grid = Grid1D::new(m, h, boundary)?;
    let blocks = blocks
        .into_iter()
        .enumerate()
        .map(|(b, (name, _))| VariableBlock { name, rows: b * m..(b + 1) * m })
        .collect();
    Ok(SnapshotSet::from_blocks(
        DMatrix::from_vec(rows, n, values),
        grid,
        TimeAxis::new(time)?,
        blocks,
    )?)
}

pub fn read_snapshots(path: &Path) -> CliResult<SnapshotSet> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_snapshots(&bytes).map_err(|e| match e {
        CliError::Data(msg) => CliError::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a binary snapshot file, or a snapshot CSV if the extension is
/// `.csv` (CSV files do not record the boundary; periodic is assumed).
pub fn load_snapshots(path: &Path) -> CliResult<SnapshotSet> {
    if is_csv(path) {
        read_snapshots_csv(path, Boundary::Periodic)
    } else {
        read_snapshots(path)
    }
}

pub fn save_snapshots(set: &SnapshotSet, path: &Path) -> CliResult<()> {
    if is_csv(path) {
        write_snapshots_csv(set, path)
    } else {
        write_snapshots(set, path)
    }
}

pub fn write_snapshots_csv(set: &SnapshotSet, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["variable".to_string(), "node".into(), "x".into()];
    header.extend(set.time().values().iter().map(|t| t.to_string()));
    w.write_record(&header)?;
    let grid = set.grid();
    for b in set.blocks() {
        for (i, row) in b.rows.clone().enumerate() {
            let mut rec = vec![b.name.clone(), i.to_string(), grid.x(i).to_string()];
            rec.extend(set.data().row(row).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_snapshots_csv(path: &Path, boundary: Boundary) -> CliResult<SnapshotSet> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 4 || &header[0] != "variable" || &header[2] != "x" {
        return Err(CliError::data(format!(
            "{}: expected header `variable,node,x,<times>...`",
            path.display()
        )));
    }
    let time = header
        .iter()
        .skip(3)
        .map(|t| t.parse::<f64>().map_err(|_| CliError::data(format!("bad time `{t}` in header"))))
        .collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<String> = Vec::new();
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let cell = |k: usize| -> CliResult<f64> {
            let v: f64 = rec[k].parse().map_err(|_| {
                CliError::data(format!("{}: record {}: bad number `{}`", path.display(), line + 2, &rec[k]))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::data(format!("{}: record {}: non-finite value", path.display(), line + 2)))
            }
        };
        if names.last().map(String::as_str) != Some(&rec[0]) {
            names.push(rec[0].to_string());
        }
        if names.len() == 1 {
            xs.push(cell(2)?);
        }
        for k in 3..rec.len() {
            values.push(cell(k)?);
        }
    }
    let m = xs.len();
    if m < 2 {
        return Err(CliError::data(format!("{}: need at least two grid nodes", path.display())));
    }
    let rows = m * names.len();
    let n = time.len();
    if values.len() != rows * n {
        return Err(CliError::data(format!(
            "{}: found {} values, expected {} ({rows} x {n})",
            path.display(),
            values.len(),
            rows * n
        )));
    }
    let data = DMatrix::from_row_slice(rows, n, &values);
    let grid = Grid1D::new(m, xs[1] - xs[0], boundary)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(SnapshotSet::new(data, grid, TimeAxis::new(time)?, &refs)?)
}

pub fn write_shifts_csv(path: &Path, names: &[String], time: &[f64], shifts: &FrameShifts) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["j".to_string(), "t".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (j, t) in time.iter().enumerate() {
        let mut rec = vec![j.to_string(), t.to_string()];
        rec.extend((0..shifts.frames()).map(|l| shifts.get(l, j).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))
}

/// Column `name` of a shift CSV (or the only shift column when `name` is
/// absent from a file with a single one).
pub fn read_shift_column(path: &Path, name: &str) -> CliResult<Vec<f64>> {
    let table = read_table(path)?;
    let shift_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&k| table.headers[k] != "j" && table.headers[k] != "t")
        .collect();
    let col = match table.headers.iter().position(|h| h == name) {
        Some(k) => k,
        None if shift_cols.len() == 1 => shift_cols[0],
        None => {
            return Err(CliError::data(format!(
                "{}: no column `{name}` (columns: {})",
                path.display(),
                table.headers.join(", ")
            )))
        }
    };
    Ok(table.rows.iter().map(|r| r[col]).collect())
}

pub fn shift_frames(rows: &[Vec<f64>], spec: ShiftSpec) -> CliResult<FrameShifts> {
    Ok(FrameShifts::from_rows(rows, spec)?)
}

/// Numeric CSV with a header row.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::data(format!("{}: record {}: bad number `{c}`", path.display(), line + 2))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

pub fn write_table(path: &Path, headers: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Matrix as CSV: a leading index column followed by one column per matrix
/// column.
pub fn write_matrix(path: &Path, index: &str, prefix: &str, a: &DMatrix<f64>) -> CliResult<()> {
    let mut headers = vec![index.to_string()];
    headers.extend((0..a.ncols()).map(|k| format!("{prefix}{k}")));
    write_table(
        path,
        &headers,
        (0..a.nrows()).map(|i| {
            let mut rec = vec![i.to_string()];
            rec.extend(a.row(i).iter().map(|v| v.to_string()));
            rec
        }),
    )
}

pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let t = read_table(path)?;
    let cols = t.headers.len().saturating_sub(1);
    Ok(DMatrix::from_fn(t.rows.len(), cols, |i, k| t.rows[i][k + 1]))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
