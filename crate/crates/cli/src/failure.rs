use std::fmt;

use resolvent_lab::Error;

/// Why a run stopped or failed; each maps to one process exit code.
#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    Config(String),
    Assertion { invariant: String, detail: String },
    Singularity(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Assertion { .. } => 3,
            Failure::Singularity(_) => 4,
        }
    }

    pub fn assertion(invariant: &str, detail: impl Into<String>) -> Self {
        Failure::Assertion { invariant: invariant.to_string(), detail: detail.into() }
    }

    /// Like `From<Error>` but any non-singular error counts as bad input.
    pub fn from_config(e: Error) -> Self {
        if e.is_singularity() {
            Failure::Singularity(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_singularity() {
            return Failure::Singularity(e.to_string());
        }
        let invariant = match &e {
            Error::DimensionExceedsCap { .. }
            | Error::ShapeMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::SourceNotInRange { .. }
            | Error::CurlCheck { .. }
            | Error::BranchCut { .. } => return Failure::Config(e.to_string()),
            Error::EigenFailure { .. } => "eigensolver-convergence",
            Error::RankDrop { .. } => "reference-rank",
            Error::Divergence { .. } => "neumann-convergence",
            Error::EmptyBasis => "nonempty-basis",
            Error::UncertifiedT { .. } => "qstar-convexity",
            Error::NuInfinite { .. } => "finite-nu",
            Error::PsdViolation { .. } => "measure-psd",
            _ => "numerical",
        };
        Failure::assertion(invariant, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Assertion { invariant, detail } => write!(f, "assertion failed [{invariant}]: {detail}"),
            Failure::Singularity(m) => write!(f, "singularity: {m}"),
        }
    }
}

impl std::error::Error for Failure {}
