use alloc::boxed::Box;
use alloc::string::String;

use crate::synthesis::SynthesisDiagnostics;

/// Errors produced by the solver and synthesizer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two objects that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A scalar argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Control evaluated outside its time horizon.
    #[error("time {t} outside the control horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    /// An endpoint-truncated integral kept growing past the divergence cap.
    #[error("integral of {0} does not converge near the endpoints")]
    NotIntegrable(String),

    /// The ground-state construction needs a strictly positive profile.
    #[error("target not strictly positive")]
    TargetNotPositive,

    /// The implicit QL sweep failed to isolate an eigenvalue.
    #[error("eigensolver did not converge at row {row} after {iterations} iterations")]
    EigenNoConvergence { row: usize, iterations: usize },

    /// Loss of diagonal dominance in the implicit step.
    #[error("tridiagonal solve breakdown (pivot {pivot} at row {row}); reduce dt")]
    SolveBreakdown { row: usize, pivot: f64 },

    /// The fixed-point iteration did not contract within the allowed sweeps.
    #[error("fixed-point iteration still moving after {iterations} sweeps (last gap {last_gap}); horizon too long for picard mode")]
    PicardNoContraction { iterations: usize, last_gap: f64 },

    /// Fewer trajectory samples than an operation requires.
    #[error("trajectory needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// Stage-2 planning: the state lost its component along the target.
    #[error("ground-state coefficient nonpositive; scale too large or hypotheses violated")]
    GroundStateCoefficient,

    /// Stage-2 planning: the prescribed coefficient match happens at negative time.
    #[error("scale not small enough for the stage-2 horizon")]
    StageTwoHorizon,

    /// Stage-3 planning: no admissible segment length exists at this scale.
    #[error("tolerance unreachable at this scale; decrease the scale")]
    EpsilonUnreachable,

    /// The sign-relaxed synthesizer requires a positive inner product
    /// between the initial state and the target.
    #[error("initial state and target must have a strictly positive inner product")]
    TargetNotReachableFromInitial,

    /// The outer scale search ran out of candidates.
    #[error("tolerance {eps} not achieved after {tried} scale refinements; best error {best_error}")]
    ToleranceNotAchieved {
        eps: f64,
        tried: usize,
        best_error: f64,
        diagnostics: Box<SynthesisDiagnostics>,
    },
}
