//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by construction, propagation, and verification routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A level label appears more than once across the two partitions.
    #[error("duplicate level label `{0}`")]
    DuplicateLabel(String),

    /// An edge connects two labels of the same partition.
    #[error("edge ({0}, {1}) lies within a single partition; transitions must cross V1/V2")]
    IntraSetEdge(String, String),

    /// A level or basis label is not known to the graph or basis.
    #[error("unknown label `{0}`")]
    InvalidLabel(String),

    /// A dense representation was requested beyond the configured cap.
    #[error("dimension {dim} exceeds the dense-mode cap {cap}")]
    DimensionOverflow { dim: u128, cap: usize },

    /// Operand dimensions do not match.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// A pulse interval was requested with a non-positive area.
    #[error("pulse area must be positive, got {0}")]
    NonPositiveArea(f64),

    /// Two drive envelopes that must keep a constant ratio differ in shape,
    /// timing, or relative phase.
    #[error("amplitude ratio is not constant in time: {0}")]
    RatioNotConstant(String),

    /// States required to be mutually orthogonal are not.
    #[error("states are not orthogonal: |<a|b>| = {0:.3e}")]
    NonOrthogonalStates(f64),

    /// A state has support outside the span it must live in.
    #[error("state has support outside the allowed span (residual {0:.3e})")]
    SupportOutsideSpan(f64),

    /// Substep refinement did not reach the requested tolerance.
    #[error("propagator refinement did not converge: residual {residual:.3e} at {substeps} substeps")]
    NoConvergence { residual: f64, substeps: usize },

    /// Two transfers in one step act on overlapping state pairs.
    #[error("transfers within a step overlap: {0}")]
    OverlappingTransfers(String),

    /// Block count outside the range covered by the construction.
    #[error("unsupported block count {0} (enable the generic extension for m > 4)")]
    UnsupportedBlockCount(usize),

    /// The phase-jump calibration failed to reproduce the requested phase.
    #[error("calibration failed: requested {requested:.6}, realized {realized:.6}")]
    CalibrationFailed { requested: f64, realized: f64 },

    /// The detuning is below the hard validity floor of the effective model.
    #[error("detuning too small: |delta| = {delta:.3e} <= 2 * max|eta*omega| = {floor:.3e}")]
    DetuningTooSmall { delta: f64, floor: f64 },

    /// Invalid Fock-space cutoff.
    #[error("invalid phonon cutoff: {0}")]
    InvalidCutoff(String),

    /// Generic invalid input that does not fit the categories above.
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
