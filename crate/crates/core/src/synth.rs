//! Synthetic snapshot generators with known transport structure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Decomposition, FrameBasis, FrameShifts};
use crate::shift::ShiftSpec;
use crate::snapshot::{Boundary, Grid1D, SnapshotSet, TimeAxis};

/// Linear acoustics on a periodic domain, started from a Gaussian density
/// pulse at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub rho_ref: f64,
    pub c: f64,
    pub length: f64,
    pub m: usize,
    pub n: usize,
    /// Snapshots are taken at `t_j = j T / n`, `j = 0..n`.
    pub final_time: f64,
    pub pulse_center: f64,
    pub pulse_width: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        Self {
            rho_ref: 1.0,
            c: 1.0,
            length: 1.0,
            m: 1024,
            n: 256,
            final_time: 1.0,
            pulse_center: 0.5,
            pulse_width: 0.01,
        }
    }
}

impl WaveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.rho_ref > 0.0 && self.pulse_width > 0.0) {
            return Err(Error::config("wave speed, reference density and pulse width must be positive"));
        }
        if !(self.length > 0.0 && self.final_time > 0.0) || self.n == 0 {
            return Err(Error::config("domain length, final time and snapshot count must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::with_length(self.m, self.length, Boundary::Periodic)
    }

    pub fn time(&self) -> Result<TimeAxis> {
        TimeAxis::uniform(self.n, self.final_time / self.n as f64)
    }

    /// Initial density `rho_0`, periodically extended.
    pub fn rho0(&self, x: f64) -> f64 {
        let l = self.length;
        let mut dist = (x - self.pulse_center).rem_euclid(l);
        if dist >= 0.5 * l {
            dist -= l;
        }
        (-(dist / self.pulse_width).powi(2)).exp()
    }

    /// Shifts of the left-going (`-c t`) and right-going (`+c t`) frames.
    pub fn frame_shifts(&self, spec: ShiftSpec) -> Result<FrameShifts> {
        let t = self.time()?;
        let left: Vec<f64> = t.values().iter().map(|t| -self.c * t).collect();
        let right: Vec<f64> = t.values().iter().map(|t| self.c * t).collect();
        FrameShifts::from_rows(&[left, right], spec)
    }

    /// Exact two-mode decomposition: modes `rho_0 [1, -c/rho_ref]` and
    /// `rho_0 [1, c/rho_ref]` with constant amplitude 1/2.
    pub fn analytic_decomposition(&self, spec: ShiftSpec) -> Result<Decomposition> {
        let grid = self.grid()?;
        let m = grid.m();
        let ratio = self.c / self.rho_ref;
        let profile: Vec<f64> = grid.nodes().map(|x| self.rho0(x)).collect();
        let mode = |sign: f64| {
            DMatrix::from_fn(2 * m, 1, |i, _| {
                if i < m {
                    profile[i]
                } else {
                    sign * ratio * profile[i - m]
                }
            })
        };
        let frames = vec![
            FrameBasis::new(mode(-1.0), None)?,
            FrameBasis::new(mode(1.0), None)?,
        ];
        let amps = vec![DMatrix::from_element(1, self.n, 0.5); 2];
        Decomposition::new(frames, amps, self.frame_shifts(spec)?, grid)
    }
}

/// Density and velocity snapshots of the acoustic pulse.
pub fn wave_snapshots(params: &WaveParams) -> Result<SnapshotSet> {
    params.validate()?;
    let grid = params.grid()?;
    let time = params.time()?;
    let m = grid.m();
    let (rho_ref, c) = (params.rho_ref, params.c);
    let mut data = DMatrix::zeros(2 * m, time.n());
    for (j, &t) in time.values().iter().enumerate() {
        for i in 0..m {
            let x = grid.x(i);
            let q_minus = params.rho0(x + c * t) / (2.0 * rho_ref);
            let q_plus = params.rho0(x - c * t) / (2.0 * rho_ref);
            data[(i, j)] = rho_ref * (q_minus + q_plus);
            data[(m + i, j)] = c * (q_plus - q_minus);
        }
    }
    SnapshotSet::new(data, grid, time, &["density", "velocity"])
}

/// `q(x,t) = q1(x + t) + q2(x - t) + cos(t) q3(x)` on a periodic grid.
/// The samplers receive arguments wrapped into `[0, L)`.
pub fn three_signal_snapshots(
    q1: &dyn Fn(f64) -> f64,
    q2: &dyn Fn(f64) -> f64,
    q3: &dyn Fn(f64) -> f64,
    grid: &Grid1D,
    time: &TimeAxis,
) -> Result<SnapshotSet> {
    if grid.boundary() != Boundary::Periodic {
        return Err(Error::config("three-signal field needs a periodic grid"));
    }
    let l = grid.length();
    let data = DMatrix::from_fn(grid.m(), time.n(), |i, j| {
        let (x, t) = (grid.x(i), time.values()[j]);
        q1((x + t).rem_euclid(l)) + q2((x - t).rem_euclid(l)) + t.cos() * q3(x)
    });
    SnapshotSet::new(data, *grid, time.clone(), &["q"])
}

/// Frame shifts `(-t, t, 0)` matching [`three_signal_snapshots`].
pub fn three_signal_shifts(time: &TimeAxis, spec: ShiftSpec) -> Result<FrameShifts> {
    let t = time.values();
    FrameShifts::from_rows(
        &[
            t.iter().map(|t| -t).collect(),
            t.to_vec(),
            vec![0.0; t.len()],
        ],
        spec,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 1 behind (left of) the front, 0 ahead.
    StepDown,
    /// 0 left of the front, 1 right of it.
    StepUp,
    Pulse,
}

impl Profile {
    fn eval(self, xi: f64, width: f64) -> f64 {
        match self {
            Profile::StepDown => 0.5 * (1.0 - (xi / width).tanh()),
            Profile::StepUp => 0.5 * (1.0 + (xi / width).tanh()),
            Profile::Pulse => (-(xi / width).powi(2)).exp(),
        }
    }
}

/// One moving feature of the crossing-fronts field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub name: String,
    /// `(t, x)` knots of a piecewise-linear trajectory, increasing in `t`;
    /// held constant outside the knot range.
    pub knots: Vec<(f64, f64)>,
    pub profile: Profile,
    pub width: f64,
    /// Relative growth of the width per unit time.
    pub width_growth: f64,
    /// Amplitude in every variable block.
    pub amplitudes: Vec<f64>,
    /// Time the feature appears; its amplitude ramps up over `ramp`.
    pub onset: Option<f64>,
    pub ramp: f64,
}

impl Transport {
    pub fn position(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, x0), (t1, x1)) = (w[0], w[1]);
            if t <= t1 {
                return x0 + (x1 - x0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    fn envelope(&self, t: f64) -> f64 {
        match self.onset {
            None => 1.0,
            Some(t0) if t < t0 => 0.0,
            Some(t0) if self.ramp > 0.0 && t < t0 + self.ramp => {
                let s = (t - t0) / self.ramp;
                s * s * (3.0 - 2.0 * s)
            }
            Some(_) => 1.0,
        }
    }

    fn width_at(&self, t: f64) -> f64 {
        self.width * (1.0 + self.width_growth * t)
    }
}

/// Stationary bump whose amplitude oscillates in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub center: f64,
    pub width: f64,
    pub amplitudes: Vec<f64>,
    pub oscillation: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingFrontsParams {
    pub m: usize,
    pub n: usize,
    pub length: f64,
    pub final_time: f64,
    pub blocks: Vec<String>,
    pub transports: Vec<Transport>,
    pub background: Option<Background>,
}

impl Default for CrossingFrontsParams {
    /// Reaction front and leading shock that separate and merge again, a
    /// wave reflected off the left boundary, its partial re-reflection, and
    /// a stationary oscillating bump, over density and species blocks.
    fn default() -> Self {
        let w = 0.008;
        let t_nozzle = 0.5 + 0.15 / (0.35 / 0.3);
        Self {
            m: 256,
            n: 256,
            length: 1.0,
            final_time: 1.0,
            blocks: vec!["density".into(), "species".into()],
            transports: vec![
                Transport {
                    name: "reaction-front".into(),
                    knots: vec![(0.0, 0.20), (0.5, 0.40), (1.0, 0.70)],
                    profile: Profile::StepDown,
                    width: w,
                    width_growth: 1.0,
                    amplitudes: vec![0.4, 1.0],
                    onset: None,
                    ramp: 0.0,
                },
                Transport {
                    name: "leading-shock".into(),
                    knots: vec![(0.0, 0.20), (0.25, 0.38), (0.5, 0.40), (1.0, 0.70)],
                    profile: Profile::StepDown,
                    width: w,
                    width_growth: 0.0,
                    amplitudes: vec![0.6, 0.0],
                    onset: None,
                    ramp: 0.0,
                },
                Transport {
                    name: "reflected-wave".into(),
                    knots: vec![(0.5, 0.40), (0.8, 0.05), (1.0, 0.25)],
                    profile: Profile::StepUp,
                    width: w,
                    width_growth: 0.0,
                    amplitudes: vec![0.3, 0.0],
                    onset: Some(0.5),
                    ramp: 0.05,
                },
                Transport {
                    name: "re-reflected-wave".into(),
                    knots: vec![(t_nozzle, 0.25), (1.0, 0.55)],
                    profile: Profile::StepDown,
                    width: w,
                    width_growth: 0.0,
                    amplitudes: vec![0.15, 0.0],
                    onset: Some(t_nozzle),
                    ramp: 0.05,
                },
            ],
            background: Some(Background {
                center: 0.2,
                width: 0.05,
                amplitudes: vec![0.2, 0.0],
                oscillation: 0.5,
                frequency: 2.0,
            }),
        }
    }
}

impl CrossingFrontsParams {
    /// A single step front moving at constant `velocity` from `start`.
    pub fn single_front(m: usize, n: usize, start: f64, velocity: f64) -> Self {
        Self {
            m,
            n,
            length: 1.0,
            final_time: 1.0,
            blocks: vec!["q".into()],
            transports: vec![Transport {
                name: "front".into(),
                knots: vec![(0.0, start), (1.0, start + velocity)],
                profile: Profile::StepDown,
                width: 2.0 / (m - 1) as f64,
                width_growth: 0.0,
                amplitudes: vec![1.0],
                onset: None,
                ramp: 0.0,
            }],
            background: None,
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::with_length(self.m, self.length, Boundary::NonPeriodic)
    }

    /// `t_j = j T / (n - 1)`.
    pub fn time(&self) -> Result<TimeAxis> {
        if self.n < 2 {
            return Err(Error::config("crossing fronts need at least two snapshots"));
        }
        TimeAxis::uniform(self.n, self.final_time / (self.n - 1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::config("at least one variable block is required"));
        }
        for tr in &self.transports {
            if tr.knots.is_empty() || tr.knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::config(format!(
                    "transport `{}` needs knots with increasing times",
                    tr.name
                )));
            }
            if let Some(&(_, x)) = tr.knots.iter().find(|(_, x)| *x < 0.0 || *x > self.length) {
                return Err(Error::config(format!(
                    "transport `{}` leaves the domain [0, {}] (x = {x})",
                    tr.name, self.length
                )));
            }
            if tr.amplitudes.len() != self.blocks.len() || !(tr.width > 0.0) {
                return Err(Error::config(format!(
                    "transport `{}` needs one amplitude per block and a positive width",
                    tr.name
                )));
            }
        }
        if let Some(bg) = &self.background {
            if bg.amplitudes.len() != self.blocks.len() || !(bg.width > 0.0) {
                return Err(Error::config("background needs one amplitude per block"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CrossingFronts {
    pub snapshots: SnapshotSet,
    /// Centered shifts `x(t_j) - L/2` of every transport, constant
    /// extrapolation with cubic interpolation.
    pub shifts: FrameShifts,
    /// Trajectories `x(t_j)` of every transport.
    pub positions: Vec<Vec<f64>>,
}

pub fn crossing_fronts(params: &CrossingFrontsParams) -> Result<CrossingFronts> {
    params.validate()?;
    let grid = params.grid()?;
    let time = params.time()?;
    let (m, n) = (grid.m(), time.n());
    let nb = params.blocks.len();
    let mut data = DMatrix::zeros(nb * m, n);
    for (j, &t) in time.values().iter().enumerate() {
        let mut col = DVector::zeros(nb * m);
        for tr in &params.transports {
            let env = tr.envelope(t);
            if env == 0.0 {
                continue;
            }
            let (xc, w) = (tr.position(t), tr.width_at(t));
            for (b, &amp) in tr.amplitudes.iter().enumerate() {
                if amp == 0.0 {
                    continue;
                }
                for i in 0..m {
                    col[b * m + i] += env * amp * tr.profile.eval(grid.x(i) - xc, w);
                }
            }
        }
        if let Some(bg) = &params.background {
            let a = 1.0 + bg.oscillation * (2.0 * std::f64::consts::PI * bg.frequency * t).sin();
            for (b, &amp) in bg.amplitudes.iter().enumerate() {
                for i in 0..m {
                    col[b * m + i] += a * amp * Profile::Pulse.eval(grid.x(i) - bg.center, bg.width);
                }
            }
        }
        data.set_column(j, &col);
    }
    let names: Vec<&str> = params.blocks.iter().map(String::as_str).collect();
    let snapshots = SnapshotSet::new(data, grid, time.clone(), &names)?;
    let positions: Vec<Vec<f64>> = params
        .transports
        .iter()
        .map(|tr| time.values().iter().map(|&t| tr.position(t)).collect())
        .collect();
    let half = 0.5 * grid.length();
    let rows: Vec<Vec<f64>> = positions
        .iter()
        .map(|p| p.iter().map(|x| x - half).collect())
        .collect();
    let shifts = if rows.is_empty() {
        FrameShifts::from_rows(&[vec![0.0; n]], ShiftSpec::constant(3))?
    } else {
        FrameShifts::from_rows(&rows, ShiftSpec::constant(3))?
    };
    Ok(CrossingFronts { snapshots, shifts, positions })
}
