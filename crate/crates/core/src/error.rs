use thiserror::Error;

use crate::operator::OperatorTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator dimension {dim} exceeds the dense oracle cap {cap}")]
    DimensionExceedsCap { dim: usize, cap: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("eigen-decomposition did not converge for a {tag} operator")]
    EigenFailure { tag: OperatorTag },

    /// The restricted block is singular to working precision: z0 sits in or
    /// next to the spectrum.
    #[error("singular restriction: condition number {cond:.3e} exceeds cap {cap:.1e} (z0 in or near the spectrum)")]
    SingularRestriction { cond: f64, cap: f64 },

    #[error("rank of the projected reference block varies over frequencies ({min} to {max})")]
    RankDrop { min: usize, max: usize },

    #[error("supplied vector field is not curl-free on the grid (spectral curl residual {residual:.3e})")]
    CurlCheck { residual: f64 },

    #[error("Neumann iteration diverged after {iterations} iterations (residual {residual:.3e}); the reference medium L0 is free, try a different one or the krylov method")]
    Divergence { iterations: usize, residual: f64 },

    #[error("z0 must be nonzero for this conversion")]
    ZeroZ0,

    #[error("local block is singular at grid point {point}")]
    PointwiseSingular { point: usize },

    #[error("L has a null space at grid point {point}; shift L by a null-T operator (shift_by_null_T) before solving")]
    DegenerateL { point: usize },

    #[error("basis is empty after projection onto the range of the projector")]
    EmptyBasis,

    #[error("translation operator is not Q*-convex on the samples (min eigenvalue {min:.3e})")]
    UncertifiedT { min: f64 },

    #[error("coupled translation degenerates: min over k of sum v_i . Gamma(k) v_i is {min:.3e}")]
    NuInfinite { min: f64 },

    #[error("block operator is singular at w0 = {re} + {im}i")]
    BlockSingular { re: f64, im: f64 },

    #[error("L1 is singular (condition number {cond:.3e})")]
    L1Singular { cond: f64 },

    #[error("v = {re} + {im}i lies on the branch cut (-inf, 0]")]
    BranchCut { re: f64, im: f64 },

    #[error("measure density fails positivity at lambda = {lambda:.6e}: min eigenvalue {min_eig:.3e}")]
    PsdViolation { lambda: f64, min_eig: f64 },

    #[error("source is not in the range of the projector (residual {residual:.3e})")]
    SourceNotInRange { residual: f64 },

    #[error("contour passes within {distance:.3e} of the spectrum (required margin {margin:.3e})")]
    ContourTouchesSpectrum { distance: f64, margin: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal a spectral singularity rather than bad input.
    pub fn is_singularity(&self) -> bool {
        matches!(
            self,
            Error::SingularRestriction { .. }
                | Error::PointwiseSingular { .. }
                | Error::DegenerateL { .. }
                | Error::BlockSingular { .. }
                | Error::L1Singular { .. }
                | Error::ContourTouchesSpectrum { .. }
                | Error::ZeroZ0
        )
    }
}
