//! Run configuration files.
//!
//! Line-oriented, `#` comments, `key = value` pairs grouped in sections:
//!
//! ```text
//! [run]
//! snapshots = wave.bin      # relative paths resolve against the config file
//! output = wave-out
//! tol = 0.01                # bound on the relative Frobenius error
//! p_max = 256               # greedy iterations (default: n)
//! r0 = 1, 1                 # initial modes per frame, in frame order (default: 1 each)
//! shift_boundary = periodic # or constant (default: from the grid)
//! degree = 3                # interpolation degree, 1 or 3
//! scale = false             # rescale every block to the norm of the first block
//! center = false            # subtract the temporal row mean
//! warm_start = true
//! rank_tol = 1e-12
//!
//! [optimizer]
//! memory = 10
//! grad_tol = 1e-6
//! grad_abs_tol = 0
//! max_iters = 500
//! c1 = 1e-4
//! c2 = 0.9
//! max_line_search_evals = 30
//!
//! [frame left]
//! velocity = -1             # d_j = offset + velocity * t_j
//! offset = 0
//! mask = velocity           # blocks pinned to zero in this frame's modes
//!
//! [frame right]
//! shifts = shifts.csv       # column `right` (or the only shift column)
//! column = right
//!
//! [frame front]
//! track = density           # variable block to track
//! window = 0..40 : 0..512   # tracked columns : grid nodes, ends exclusive
//! window = 40.. : 100..     # open ends run to the last column / node
//! statistic = temporal-difference  # or spatial-gradient
//! smoothing = 0
//! ```
//!
//! Every frame needs exactly one of `velocity`, `shifts` or `track`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spod::{FrontStatistic, OptimizerOptions, ShiftBoundary, DEFAULT_RANK_TOL};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub snapshots: PathBuf,
    pub output: PathBuf,
    pub tol: f64,
    pub p_max: Option<usize>,
    pub r0: Option<Vec<usize>>,
    pub shift_boundary: Option<ShiftBoundary>,
    pub degree: usize,
    pub scale: bool,
    pub center: bool,
    pub warm_start: bool,
    pub rank_tol: f64,
    pub optimizer: OptimizerOptions,
    pub frames: Vec<FrameConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub name: String,
    pub source: FrameSource,
    pub mask: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    File { path: PathBuf, column: Option<String> },
    Velocity { velocity: f64, offset: f64 },
    Track { block: String, windows: Vec<WindowSpec>, statistic: FrontStatistic, smoothing: usize },
}

/// Half-open index range whose end may be left open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: Option<usize>,
}

impl Span {
    pub fn resolve(&self, len: usize) -> std::ops::Range<usize> {
        self.start..self.end.unwrap_or(len)
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.end {
            Some(e) => write!(f, "{}..{e}", self.start),
            None => write!(f, "{}..", self.start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub time: Span,
    pub space: Span,
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("config line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| err(line, format!("cannot parse `{key}` value `{v}`")))
}

fn boolean(line: usize, key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_span(line: usize, s: &str) -> CliResult<Span> {
    let (a, b) = s
        .trim()
        .split_once("..")
        .ok_or_else(|| err(line, format!("expected a range `a..b`, got `{s}`")))?;
    let start = if a.trim().is_empty() { 0 } else { num(line, "range start", a.trim())? };
    let end = if b.trim().is_empty() { None } else { Some(num(line, "range end", b.trim())?) };
    Ok(Span { start, end })
}

pub fn parse_window(line: usize, s: &str) -> CliResult<WindowSpec> {
    let (t, x) = s
        .split_once(':')
        .ok_or_else(|| err(line, format!("window needs `time : space`, got `{s}`")))?;
    Ok(WindowSpec { time: parse_span(line, t)?, space: parse_span(line, x)? })
}

pub fn parse_statistic(s: &str) -> Option<FrontStatistic> {
    match s {
        "temporal-difference" | "temporal" => Some(FrontStatistic::TemporalDifference),
        "spatial-gradient" | "spatial" => Some(FrontStatistic::SpatialGradient),
        _ => None,
    }
}

pub fn statistic_name(s: FrontStatistic) -> &'static str {
    match s {
        FrontStatistic::TemporalDifference => "temporal-difference",
        FrontStatistic::SpatialGradient => "spatial-gradient",
    }
}

fn shift_boundary_name(b: ShiftBoundary) -> &'static str {
    match b {
        ShiftBoundary::Periodic => "periodic",
        ShiftBoundary::ConstantExtrapolation => "constant",
    }
}

#[derive(Default)]
struct FrameDraft {
    name: String,
    line: usize,
    velocity: Option<f64>,
    offset: Option<f64>,
    shifts: Option<PathBuf>,
    column: Option<String>,
    track: Option<String>,
    windows: Vec<WindowSpec>,
    statistic: Option<FrontStatistic>,
    smoothing: Option<usize>,
    mask: Vec<String>,
}

impl FrameDraft {
    fn finish(self) -> CliResult<FrameConfig> {
        let line = self.line;
        let sources =
            self.velocity.is_some() as usize + self.shifts.is_some() as usize + self.track.is_some() as usize;
        if sources != 1 {
            return Err(err(
                line,
                format!(
                    "frame `{}` needs exactly one of `velocity`, `shifts` or `track` ({sources} given)",
                    self.name
                ),
            ));
        }
        let tracking_keys = !self.windows.is_empty() || self.statistic.is_some() || self.smoothing.is_some();
        if self.track.is_none() && tracking_keys {
            return Err(err(line, format!("frame `{}`: window/statistic/smoothing need `track`", self.name)));
        }
        if self.velocity.is_none() && self.offset.is_some() {
            return Err(err(line, format!("frame `{}`: `offset` needs `velocity`", self.name)));
        }
        if self.shifts.is_none() && self.column.is_some() {
            return Err(err(line, format!("frame `{}`: `column` needs `shifts`", self.name)));
        }
        let source = if let Some(velocity) = self.velocity {
            FrameSource::Velocity { velocity, offset: self.offset.unwrap_or(0.0) }
        } else if let Some(path) = self.shifts {
            FrameSource::File { path, column: self.column }
        } else {
            FrameSource::Track {
                block: self.track.expect("one source"),
                windows: self.windows,
                statistic: self.statistic.unwrap_or_default(),
                smoothing: self.smoothing.unwrap_or(0),
            }
        };
        Ok(FrameConfig { name: self.name, source, mask: self.mask })
    }
}

enum Section {
    None,
    Run,
    Optimizer,
    Frame(Box<FrameDraft>),
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Usage(msg) => CliError::usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let path_of = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut snapshots = None;
        let mut output = None;
        let mut cfg = RunConfig {
            snapshots: PathBuf::new(),
            output: PathBuf::new(),
            tol: 0.01,
            p_max: None,
            r0: None,
            shift_boundary: None,
            degree: 3,
            scale: false,
            center: false,
            warm_start: true,
            rank_tol: DEFAULT_RANK_TOL,
            optimizer: OptimizerOptions::default(),
            frames: Vec::new(),
        };
        let mut section = Section::None;
        let finish = |section: Section, frames: &mut Vec<FrameConfig>| -> CliResult<()> {
            if let Section::Frame(draft) = section {
                frames.push(draft.finish()?);
            }
            Ok(())
        };

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(head) = content.strip_prefix('[') {
                let head = head
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("unterminated section header `{content}`")))?
                    .trim();
                finish(std::mem::replace(&mut section, Section::None), &mut cfg.frames)?;
                section = match head.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["run"] => Section::Run,
                    ["optimizer"] => Section::Optimizer,
                    ["frame", name] => {
                        if cfg.frames.iter().any(|f| f.name == *name) {
                            return Err(err(line, format!("frame `{name}` defined twice")));
                        }
                        Section::Frame(Box::new(FrameDraft { name: name.to_string(), line, ..Default::default() }))
                    }
                    _ => return Err(err(line, format!("unknown section `[{head}]`"))),
                };
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            match &mut section {
                Section::None => return Err(err(line, "key outside of any section")),
                Section::Run => match key {
                    "snapshots" => snapshots = Some(path_of(value)),
                    "output" => output = Some(path_of(value)),
                    "tol" => cfg.tol = num(line, key, value)?,
                    "p_max" => cfg.p_max = Some(num(line, key, value)?),
                    "r0" => {
                        cfg.r0 = Some(
                            value
                                .split(|c: char| c == ',' || c.is_whitespace())
                                .filter(|s| !s.is_empty())
                                .map(|s| num(line, key, s))
                                .collect::<CliResult<_>>()?,
                        )
                    }
                    "shift_boundary" => {
                        cfg.shift_boundary = Some(match value {
                            "periodic" => ShiftBoundary::Periodic,
                            "constant" => ShiftBoundary::ConstantExtrapolation,
                            _ => return Err(err(line, format!("unknown shift boundary `{value}`"))),
                        })
                    }
                    "degree" => cfg.degree = num(line, key, value)?,
                    "scale" => cfg.scale = boolean(line, key, value)?,
                    "center" => cfg.center = boolean(line, key, value)?,
                    "warm_start" => cfg.warm_start = boolean(line, key, value)?,
                    "rank_tol" => cfg.rank_tol = num(line, key, value)?,
                    _ => return Err(err(line, format!("unknown key `{key}` in [run]"))),
                },
                Section::Optimizer => {
                    let o = &mut cfg.optimizer;
                    match key {
                        "memory" => o.memory = num(line, key, value)?,
                        "grad_tol" => o.grad_tol = num(line, key, value)?,
                        "grad_abs_tol" => o.grad_abs_tol = num(line, key, value)?,
                        "max_iters" => o.max_iters = num(line, key, value)?,
                        "c1" => o.c1 = num(line, key, value)?,
                        "c2" => o.c2 = num(line, key, value)?,
                        "max_line_search_evals" => o.max_line_search_evals = num(line, key, value)?,
                        _ => return Err(err(line, format!("unknown key `{key}` in [optimizer]"))),
                    }
                }
                Section::Frame(f) => match key {
                    "velocity" => f.velocity = Some(num(line, key, value)?),
                    "offset" => f.offset = Some(num(line, key, value)?),
                    "shifts" => f.shifts = Some(path_of(value)),
                    "column" => f.column = Some(value.to_string()),
                    "track" => f.track = Some(value.to_string()),
                    "window" => f.windows.push(parse_window(line, value)?),
                    "statistic" => {
                        f.statistic = Some(
                            parse_statistic(value)
                                .ok_or_else(|| err(line, format!("unknown statistic `{value}`")))?,
                        )
                    }
                    "smoothing" => f.smoothing = Some(num(line, key, value)?),
                    "mask" => f.mask.extend(
                        value
                            .split(|c: char| c == ',' || c.is_whitespace())
                            .filter(|s| !s.is_empty())
                            .map(str::to_string),
                    ),
                    _ => return Err(err(line, format!("unknown key `{key}` in [frame {}]", f.name))),
                },
            }
        }
        finish(section, &mut cfg.frames)?;

        cfg.snapshots = snapshots.ok_or_else(|| CliError::usage("[run] needs `snapshots`"))?;
        cfg.output = output.ok_or_else(|| CliError::usage("[run] needs `output`"))?;
        if cfg.frames.is_empty() {
            return Err(CliError::usage("at least one [frame NAME] section is required"));
        }
        if let Some(r0) = &cfg.r0 {
            if r0.len() != cfg.frames.len() {
                return Err(CliError::usage(format!(
                    "r0 has {} entries for {} frames",
                    r0.len(),
                    cfg.frames.len()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn frame_names(&self) -> Vec<String> {
        self.frames.iter().map(|f| f.name.clone()).collect()
    }

    /// Fills in the defaults that depend on the snapshot data.
    pub fn resolve(&mut self, n: usize, periodic_grid: bool) {
        self.p_max.get_or_insert(n);
        let frames = self.frames.len();
        self.r0.get_or_insert_with(|| vec![1; frames]);
        self.shift_boundary.get_or_insert(if periodic_grid {
            ShiftBoundary::Periodic
        } else {
            ShiftBoundary::ConstantExtrapolation
        });
    }

    /// Every setting written out in config syntax; parsing the result gives
    /// back the same configuration.
    pub fn manifest(&self) -> String {
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string();
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "snapshots = {}", abs(&self.snapshots));
        let _ = writeln!(s, "output = {}", abs(&self.output));
        let _ = writeln!(s, "tol = {:?}", self.tol);
        if let Some(p) = self.p_max {
            let _ = writeln!(s, "p_max = {p}");
        }
        if let Some(r0) = &self.r0 {
            let r0: Vec<String> = r0.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "r0 = {}", r0.join(", "));
        }
        if let Some(b) = self.shift_boundary {
            let _ = writeln!(s, "shift_boundary = {}", shift_boundary_name(b));
        }
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "scale = {}", self.scale);
        let _ = writeln!(s, "center = {}", self.center);
        let _ = writeln!(s, "warm_start = {}", self.warm_start);
        let _ = writeln!(s, "rank_tol = {:?}", self.rank_tol);
        let o = &self.optimizer;
        let _ = writeln!(s, "\n[optimizer]");
        let _ = writeln!(s, "memory = {}", o.memory);
        let _ = writeln!(s, "grad_tol = {:?}", o.grad_tol);
        let _ = writeln!(s, "grad_abs_tol = {:?}", o.grad_abs_tol);
        let _ = writeln!(s, "max_iters = {}", o.max_iters);
        let _ = writeln!(s, "c1 = {:?}", o.c1);
        let _ = writeln!(s, "c2 = {:?}", o.c2);
        let _ = writeln!(s, "max_line_search_evals = {}", o.max_line_search_evals);
        for f in &self.frames {
            let _ = writeln!(s, "\n[frame {}]", f.name);
            match &f.source {
                FrameSource::Velocity { velocity, offset } => {
                    let _ = writeln!(s, "velocity = {velocity:?}");
                    let _ = writeln!(s, "offset = {offset:?}");
                }
                FrameSource::File { path, column } => {
                    let _ = writeln!(s, "shifts = {}", abs(path));
                    if let Some(c) = column {
                        let _ = writeln!(s, "column = {c}");
                    }
                }
                FrameSource::Track { block, windows, statistic, smoothing } => {
                    let _ = writeln!(s, "track = {block}");
                    for w in windows {
                        let _ = writeln!(s, "window = {} : {}", w.time, w.space);
                    }
                    let _ = writeln!(s, "statistic = {}", statistic_name(*statistic));
                    let _ = writeln!(s, "smoothing = {smoothing}");
                }
            }
            if !f.mask.is_empty() {
                let _ = writeln!(s, "mask = {}", f.mask.join(", "));
            }
        }
        s
    }
}
