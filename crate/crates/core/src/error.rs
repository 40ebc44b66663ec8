use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("vorticity profile changes sign on [0, R0]")]
    SignChangingProfile,

    #[error("support radius {found} exceeds declared radius {declared}")]
    SupportExceeded { found: f64, declared: f64 },

    #[error("evaluation point lies within one grid spacing of the source support")]
    TooCloseToSource,

    #[error("m != 0 requires a disk domain (no collar width makes the error vanish otherwise)")]
    NonzeroMassOnNonDisk,

    #[error("incompatible Neumann data: boundary flux mean {0:.3e}")]
    IncompatibleFlux(f64),

    #[error("R-grid entry {r} violates the far-field condition (need R >= {min})")]
    BelowFarField { r: f64, min: f64 },

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        field,
        reason: reason.into(),
    }
}
