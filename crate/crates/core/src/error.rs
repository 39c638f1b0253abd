//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A frame or other linear map is numerically singular (reciprocal
    /// condition estimate below threshold).
    #[error("singular frame: reciprocal condition {rcond:.3e} below {threshold:.3e}")]
    SingularFrame { rcond: f64, threshold: f64 },

    /// A bilinear form that must be nondegenerate is not.
    #[error("degenerate bilinear form: {0}")]
    DegenerateForm(String),

    /// A point lies outside the chart (or too close to the boundary for the
    /// requested stencil).
    #[error("point outside chart domain: {0}")]
    OutOfDomain(String),

    /// Matrix/vector dimensions are inconsistent.
    #[error("shape error: {0}")]
    ShapeError(String),

    /// Auxiliary data of a G-structure violates its defining constraint.
    #[error("G-structure constraint violated: {0}")]
    SpecViolation(String),

    /// A frame handed to the solver does not lie in the prescribed structure.
    #[error("frame not in structure: residual {0:.3e}")]
    FrameNotInStructure(f64),

    /// Compatibility residuals exceed the solver gate.
    #[error("compatibility residuals too large for solve: max {max:.3e} > gate {gate:.3e} ({family})")]
    ResidualGate { family: String, max: f64, gate: f64 },

    /// Integration produced non-finite or unbounded state.
    #[error("integration diverged: {0}")]
    IntegrationDiverged(String),

    /// Requested target model has no realization.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// Run configuration is malformed or internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
