use alloc::string::String;

/// Errors raised by the construction pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A space failed validation; `invariant` names the violated rule.
    #[error("invalid space: {invariant} (points {indices:?})")]
    InvalidSpace {
        invariant: &'static str,
        indices: alloc::vec::Vec<usize>,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `delta` is above the strict-mode bound `A0^-10 / 1000`.
    #[error("delta {delta} exceeds the strict-mode bound {bound} (A0 = {a0}); use relaxed mode or a smaller delta")]
    StrictDelta { delta: f64, bound: f64, a0: f64 },

    /// A geometric conclusion that the construction relies on failed at runtime.
    /// In relaxed mode this means `delta` is too large for the space.
    #[error("geometry violation at level {level}: {what}; decrease delta")]
    GeometryViolation { level: i32, what: String },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("level {level} outside [{k_coarse}, {k_fine}]")]
    LevelOutOfRange { level: i32, k_coarse: i32, k_fine: i32 },

    #[error("degenerate decay fit: {0}")]
    DegenerateFit(&'static str),

    #[error("internal invariant broken: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
