//! Shifted proper orthogonal decomposition (sPOD) of space-time snapshot
//! matrices.
//!
//! Snapshots of transport-dominated fields are approximated as sums of
//! modes that are translated by frame-specific, time-dependent shifts:
//!
//! ```text
//! X_j ~ sum_l T(d^l_j) sum_k a^l_{k,j} w^l_k
//! ```
//!
//! For given shifts the modes are found by minimizing the residual over the
//! modes only (amplitudes are eliminated by least squares), and modes are
//! added greedily to the frame that reduces the error most.

pub mod error;
pub mod greedy;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod pod;
pub mod shift;
pub mod snapshot;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
pub use greedy::{
    initialize_frames, spod_decompose, spod_decompose_with_progress, GreedyConfig, GreedyIteration,
    GreedyReport, GreedyTermination, Progress, SolveDiagnostics, SpodProblem,
};
pub use objective::{
    assemble_frame_matrix, objective_and_gradient, optimal_amplitudes, residual_cost,
    Decomposition, Evaluation, FrameBasis, FrameOperators, FrameShifts, SpodObjective,
    DEFAULT_RANK_TOL,
};
pub use optimizer::{minimize, Minimum, OptimizeError, OptimizerOptions, OptimizerTrace, Termination};
pub use pod::{modes_for_tolerance, pod_truncate, PodResult};
pub use shift::{apply_shift, apply_shift_transpose, build_stencil, ShiftBoundary, ShiftSpec, ShiftStencil};
pub use snapshot::{
    center_rows, relative_error, scale_variables, unscale_variables, Boundary, Grid1D, SnapshotSet,
    TimeAxis, VariableBlock,
};
pub use tracking::{center_shifts, track_front, zero_frame, FrontStatistic, TrackOptions, Window, WindowSchedule};
