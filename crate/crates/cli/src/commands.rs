use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spod::pod::{decay_table, rank_for_tolerance, singular_values, truncation_errors};
use spod::synth::{
    crossing_fronts, three_signal_shifts, three_signal_snapshots, wave_snapshots, CrossingFrontsParams, WaveParams,
};
use spod::{
    center_rows, center_shifts, relative_error, scale_variables, spod_decompose_with_progress, track_front,
    Boundary, FrameShifts, GreedyConfig, GreedyReport, GreedyTermination, Grid1D, Progress, ShiftSpec, SnapshotSet,
    SpodProblem, TimeAxis, TrackOptions, Window, WindowSchedule,
};

use crate::config::{FrameSource, RunConfig};
use crate::error::{io_err, CliError, CliResult};
use crate::format::{
    load_snapshots, parse_boundary, read_shift_column, read_snapshots_csv, save_snapshots, write_shifts_csv,
    write_table, write_text,
};
use crate::store::{block_mask, DecompositionMeta, FrameMeta, Stored};
use crate::{
    Command, ConvertArgs, CurvesArgs, ErrorArgs, GenerateArgs, PodArgs, ReconstructArgs, Scenario, SpodArgs, TrackArgs,
};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Track(a) => track(&a),
        Command::Pod(a) => pod(&a),
        Command::Spod(a) => spod(&a),
        Command::Reconstruct(a) => reconstruct(&a),
        Command::Error(a) => error(&a),
        Command::ExportCurves(a) => export_curves(&a),
        Command::Convert(a) => convert(&a),
    }
}

fn percent(e: f64) -> f64 {
    100.0 * e.sqrt()
}

/// Summary written to `report.json` next to the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: Vec<String>,
    /// Relative error of the reconstruction against the input snapshots.
    pub relative_error: f64,
    pub relative_error_percent: f64,
    pub total_modes: usize,
    pub greedy: GreedyReport,
}

fn generate(a: &GenerateArgs) -> CliResult<()> {
    let (set, shifts, names) = match a.scenario {
        Scenario::Wave => {
            let mut p = WaveParams::default();
            p.m = a.m.unwrap_or(p.m);
            p.n = a.n.unwrap_or(p.n);
            p.final_time = a.final_time.unwrap_or(p.final_time);
            p.c = a.c.unwrap_or(p.c);
            p.rho_ref = a.rho_ref.unwrap_or(p.rho_ref);
            p.pulse_width = a.pulse_width.unwrap_or(p.pulse_width);
            let set = wave_snapshots(&p)?;
            (set, p.frame_shifts(ShiftSpec::periodic(3))?, vec!["left".to_string(), "right".into()])
        }
        Scenario::ThreeSignal => {
            let (m, n) = (a.m.unwrap_or(256), a.n.unwrap_or(64));
            let grid = Grid1D::with_length(m, 2.0 * PI, Boundary::Periodic)?;
            let dt = a.final_time.map_or(2.0 * grid.h(), |t| t / n as f64);
            let time = TimeAxis::uniform(n, dt)?;
            let q1 = |x: f64| (-((x - 2.0) / 0.3).powi(2)).exp();
            let q2 = |x: f64| 0.5 * (-((x - 4.0) / 0.4).powi(2)).exp();
            let q3 = |x: f64| (3.0 * x).sin();
            let set = three_signal_snapshots(&q1, &q2, &q3, &grid, &time)?;
            let shifts = three_signal_shifts(&time, ShiftSpec::periodic(3))?;
            (set, shifts, vec!["left".to_string(), "right".into(), "standing".into()])
        }
        Scenario::CrossingFronts => {
            let mut p = CrossingFrontsParams::default();
            p.m = a.m.unwrap_or(p.m);
            p.n = a.n.unwrap_or(p.n);
            p.final_time = a.final_time.unwrap_or(p.final_time);
            let names = p.transports.iter().map(|t| t.name.clone()).collect();
            let cf = crossing_fronts(&p)?;
            (cf.snapshots, cf.shifts, names)
        }
    };
    save_snapshots(&set, &a.output)?;
    eprintln!(
        "wrote {} ({} x {} snapshots)",
        a.output.display(),
        set.data().nrows(),
        set.data().ncols()
    );
    if let Some(path) = &a.shifts {
        write_shifts_csv(path, &names, set.time().values(), &shifts)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Shift sequence of every configured frame, in frame order.
fn frame_shift_rows(cfg: &RunConfig, set: &SnapshotSet) -> CliResult<Vec<Vec<f64>>> {
    let t = set.time().values();
    let n = t.len();
    let grid = set.grid();
    let mut rows = Vec::with_capacity(cfg.frames.len());
    for f in &cfg.frames {
        let row = match &f.source {
            FrameSource::Velocity { velocity, offset } => t.iter().map(|t| offset + velocity * t).collect(),
            FrameSource::File { path, column } => {
                let values = read_shift_column(path, column.as_deref().unwrap_or(&f.name))?;
                if values.len() != n {
                    return Err(CliError::data(format!(
                        "{}: {} shifts for {n} snapshots",
                        path.display(),
                        values.len()
                    )));
                }
                values
            }
            FrameSource::Track { block, windows, statistic, smoothing } => {
                let data = set.block_data(block).ok_or_else(|| {
                    CliError::usage(format!("frame `{}` tracks unknown variable block `{block}`", f.name))
                })?;
                let opts = TrackOptions { statistic: *statistic, smoothing: *smoothing };
                let columns = match statistic {
                    spod::FrontStatistic::TemporalDifference => n.saturating_sub(1),
                    spod::FrontStatistic::SpatialGradient => n,
                };
                let schedule = if windows.is_empty() {
                    None
                } else {
                    let ws = windows
                        .iter()
                        .map(|w| Window { time: w.time.resolve(columns), space: w.space.resolve(grid.m()) })
                        .collect();
                    Some(WindowSchedule::new(ws)?)
                };
                let positions = track_front(&data, grid, schedule.as_ref(), &opts)
                    .map_err(|e| CliError::usage(format!("frame `{}`: {e}", f.name)))?;
                center_shifts(&positions, grid)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn load_config(path: &Path, output: Option<&Path>) -> CliResult<(RunConfig, SnapshotSet)> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(o) = output {
        cfg.output = o.to_path_buf();
    }
    let set = load_snapshots(&cfg.snapshots)?;
    cfg.resolve(set.time().n(), set.grid().boundary() == Boundary::Periodic);
    Ok((cfg, set))
}

fn shift_spec(cfg: &RunConfig) -> CliResult<ShiftSpec> {
    Ok(ShiftSpec::new(cfg.shift_boundary.expect("resolved"), cfg.degree)?)
}

fn track(a: &TrackArgs) -> CliResult<()> {
    let (cfg, set) = load_config(&a.config, a.output.as_deref())?;
    let rows = frame_shift_rows(&cfg, &set)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let spec = shift_spec(&cfg)?;
    let t = set.time().values();
    for (f, row) in cfg.frames.iter().zip(&rows) {
        if matches!(f.source, FrameSource::Track { .. }) {
            let path = dir.join(format!("{}.csv", f.name));
            write_shifts_csv(&path, std::slice::from_ref(&f.name), t, &FrameShifts::from_rows(std::slice::from_ref(row), spec)?)?;
            println!("{}", path.display());
        }
    }
    let path = dir.join("shifts.csv");
    write_shifts_csv(&path, &cfg.frame_names(), t, &FrameShifts::from_rows(&rows, spec)?)?;
    println!("{}", path.display());
    Ok(())
}

/// Scaled and/or centered snapshots, with the scale factors and row mean.
type Transformed = (SnapshotSet, Option<Vec<f64>>, Option<nalgebra::DVector<f64>>);

fn transformed(set: &SnapshotSet, scale: bool, center: bool) -> CliResult<Transformed> {
    let (set, factors) = if scale {
        let (s, f) = scale_variables(set)?;
        (s, Some(f))
    } else {
        (set.clone(), None)
    };
    let (set, mean) = if center {
        let (s, mean) = center_rows(&set)?;
        (s, Some(mean))
    } else {
        (set, None)
    };
    Ok((set, factors, mean))
}

fn pod(a: &PodArgs) -> CliResult<()> {
    if !(a.tol > 0.0) {
        return Err(CliError::usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let set = load_snapshots(&a.snapshots)?;
    let (work, _, _) = transformed(&set, a.scale, a.center)?;
    let sv = singular_values(work.data());
    let errors = truncation_errors(&sv);
    let r = rank_for_tolerance(&errors, a.tol);
    if let Some(path) = &a.decay {
        let headers: Vec<String> = ["mode", "singular_value", "normalized", "relative_error", "relative_error_percent"]
            .map(String::from)
            .to_vec();
        write_table(
            path,
            &headers,
            decay_table(&sv).into_iter().map(|d| {
                vec![
                    d.index.to_string(),
                    d.singular_value.to_string(),
                    d.normalized.to_string(),
                    d.truncation_error.to_string(),
                    percent(d.truncation_error).to_string(),
                ]
            }),
        )?;
    }
    eprintln!(
        "POD needs {r} modes for relative error below {} ({:.4} %)",
        a.tol,
        percent(errors[r])
    );
    println!("{r}");
    Ok(())
}

fn spod(a: &SpodArgs) -> CliResult<()> {
    let (cfg, set) = load_config(&a.config, a.output.as_deref())?;
    let spec = shift_spec(&cfg)?;
    let shifts = FrameShifts::from_rows(&frame_shift_rows(&cfg, &set)?, spec)?;
    let blocks: Vec<String> = set.blocks().iter().map(|b| b.name.clone()).collect();
    let m = set.grid().m();
    let masks = cfg
        .frames
        .iter()
        .map(|f| block_mask(&blocks, m, &f.mask))
        .collect::<CliResult<Vec<_>>>()?;
    let (work, factors, mean) = transformed(&set, cfg.scale, cfg.center)?;

    let problem = SpodProblem::new(work.data(), *set.grid(), shifts)?.with_masks(masks)?;
    let greedy = GreedyConfig {
        r0: cfg.r0.clone().expect("resolved"),
        tol: cfg.tol,
        p_max: cfg.p_max.expect("resolved"),
        optimizer: cfg.optimizer,
        rank_tol: cfg.rank_tol,
        warm_start: cfg.warm_start,
    };
    let names = cfg.frame_names();
    let start = Instant::now();
    let (decomposition, report) = spod_decompose_with_progress(&problem, &greedy, |p| {
        if a.quiet {
            return;
        }
        match p {
            Progress::Initial { error, mode_counts } => {
                eprintln!("initial solve: modes {mode_counts:?}, error {:.4} %", percent(error))
            }
            Progress::Candidate { iteration, frame, error } => {
                eprintln!("  iteration {iteration}: +1 mode in `{}` -> {:.4} %", names[frame], percent(error))
            }
            Progress::Accepted { iteration, frame, error, mode_counts } => eprintln!(
                "iteration {iteration}: accepted `{}`, modes {mode_counts:?}, error {:.4} %",
                names[frame],
                percent(error)
            ),
        }
    })?;
    let elapsed = start.elapsed();

    let stored = Stored {
        meta: DecompositionMeta {
            snapshots: std::path::absolute(&cfg.snapshots).unwrap_or_else(|_| cfg.snapshots.clone()),
            grid: *set.grid(),
            time: set.time().values().to_vec(),
            blocks,
            shift_spec: spec,
            frames: cfg
                .frames
                .iter()
                .zip(decomposition.mode_counts())
                .map(|(f, rank)| FrameMeta { name: f.name.clone(), rank, mask: f.mask.clone() })
                .collect(),
            scale_factors: factors,
            centered: mean.is_some(),
        },
        decomposition,
        mean,
    };
    let dir = &cfg.output;
    stored.save(dir)?;
    write_text(&dir.join("manifest.cfg"), &cfg.manifest())?;
    let rec = stored.reconstruct()?;
    let err = relative_error(set.data(), rec.data())?;
    let summary = RunSummary {
        frames: names.clone(),
        relative_error: err,
        relative_error_percent: percent(err),
        total_modes: report.total_modes(),
        greedy: report,
    };
    let report_path = dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&summary)? + "\n").map_err(io_err(&report_path))?;

    let report = &summary.greedy;
    let counts: Vec<String> = names.iter().zip(&report.final_mode_counts).map(|(n, r)| format!("{n}={r}")).collect();
    println!("termination: {:?}", report.termination);
    println!("greedy iterations: {}", report.iterations.len());
    println!("modes: {} (total {})", counts.join(" "), summary.total_modes);
    println!("relative_error = {:e}", err);
    println!("relative_error_percent = {}", percent(err));
    eprintln!("finished in {:.2} s, output in {}", elapsed.as_secs_f64(), dir.display());
    match report.termination {
        GreedyTermination::ToleranceReached => Ok(()),
        t => Err(CliError::Convergence(format!(
            "stopped with {t:?} at {:.4} % (tolerance {} %)",
            percent(report.final_error),
            100.0 * cfg.tol
        ))),
    }
}

fn reconstruct(a: &ReconstructArgs) -> CliResult<()> {
    let stored = Stored::load(&a.decomposition)?;
    let set = stored.reconstruct()?;
    save_snapshots(&set, &a.output)?;
    eprintln!("wrote {}", a.output.display());
    Ok(())
}

fn error(a: &ErrorArgs) -> CliResult<()> {
    let x = load_snapshots(&a.reference)?;
    let y = load_snapshots(&a.approximation)?;
    if x.data().shape() != y.data().shape() {
        return Err(CliError::data(format!(
            "shapes differ: {:?} vs {:?}",
            x.data().shape(),
            y.data().shape()
        )));
    }
    let e = relative_error(x.data(), y.data())?;
    println!("relative_error = {e:e}");
    println!("relative_error_percent = {}", percent(e));
    Ok(())
}

fn export_curves(a: &CurvesArgs) -> CliResult<()> {
    let stored = Stored::load(&a.decomposition)?;
    let report_path = a.decomposition.join("report.json");
    let text = fs::read_to_string(&report_path).map_err(io_err(&report_path))?;
    let summary: RunSummary =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", report_path.display())))?;

    let path = a.snapshots.clone().unwrap_or_else(|| stored.meta.snapshots.clone());
    let set = load_snapshots(&path)?;
    let mut data = set.data().clone();
    if let Some(factors) = &stored.meta.scale_factors {
        if factors.len() != set.blocks().len() {
            return Err(CliError::data("scale factors do not match the snapshot blocks"));
        }
        for (b, f) in set.blocks().iter().zip(factors) {
            data.rows_mut(b.rows.start, b.height()).scale_mut(*f);
        }
    }
    let work = set.with_data(data)?;
    let work = if stored.meta.centered { center_rows(&work)?.0 } else { work };
    let errors = truncation_errors(&singular_values(work.data()));
    let max = a.max_modes.unwrap_or(errors.len() - 1).min(errors.len() - 1);

    let g = &summary.greedy;
    let mut spod_rows = vec![(g.initial_mode_counts.iter().sum::<usize>(), g.initial_error)];
    spod_rows.extend(g.iterations.iter().map(|it| (it.mode_counts.iter().sum(), it.error)));
    let row = |method: &str, k: usize, e: f64| vec![method.to_string(), k.to_string(), e.to_string(), percent(e).to_string()];
    let headers: Vec<String> = ["method", "modes", "relative_error", "relative_error_percent"].map(String::from).to_vec();
    write_table(
        &a.output,
        &headers,
        (0..=max)
            .map(|k| row("pod", k, errors[k]))
            .chain(spod_rows.into_iter().map(|(k, e)| row("spod", k, e))),
    )?;
    eprintln!("wrote {}", a.output.display());
    Ok(())
}

fn convert(a: &ConvertArgs) -> CliResult<()> {
    let boundary = parse_boundary(&a.boundary)
        .ok_or_else(|| CliError::usage(format!("unknown boundary `{}`", a.boundary)))?;
    let is_csv = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let set = if is_csv { read_snapshots_csv(&a.input, boundary)? } else { load_snapshots(&a.input)? };
    save_snapshots(&set, &a.output)?;
    eprintln!("wrote {}", a.output.display());
    Ok(())
}
