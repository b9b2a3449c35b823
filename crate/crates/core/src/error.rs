//! Error type shared by all reconstruction maps and propagators.

use thiserror::Error;

/// Errors surfaced by the reconstruction maps and the forward propagators.
#[derive(Debug, Clone, Error)]
pub enum PulseError {
    /// A sample or derived quantity is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Vector/matrix dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Two quantities that must share a time grid do not.
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    /// A scalar parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Function argument outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A site density fell to (or below) the floor where the map divides by it.
    #[error("density at index {index} is {value:.3e} at t = {time:.6}; the map breaks down at a node")]
    VanishingDensity { index: usize, time: f64, value: f64 },

    /// The prescribed observable cannot be produced by any admissible drive.
    #[error("observable not representable: {0}")]
    NotRepresentable(String),

    /// The kinetic branch sign cannot be read off the initial state.
    #[error("ambiguous kinetic sign on link {link}: |K(t0)| = {value:.3e}")]
    AmbiguousSign { link: usize, value: f64 },

    /// Bloch trajectory touches the equator with nonzero azimuthal speed.
    #[error("equatorial singularity at t = {time:.6}: phi_dot = {phi_dot:.3e} with theta at pi/2")]
    EquatorSingularity { time: f64, phi_dot: f64 },

    /// phi_dot/gamma is 0/0 with no analytic limit supplied.
    #[error("undefined limit phi_dot/gamma at t = {time:.6}")]
    UndefinedLimit { time: f64 },

    /// An input matrix that must be Hermitian is not.
    #[error("non-Hermitian input: {0}")]
    NonHermitian(String),

    /// Per-step normalization of a prescribed observable drifted.
    #[error("normalization drift: {0}")]
    NormalizationDrift(String),

    /// Base density/potential/energy triple fails the stationary residual check.
    #[error("base state validation failed: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    BaseStateInvalid { residual: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, PulseError>;

impl PulseError {
    /// True for errors that mean "this observable trajectory is not
    /// reproducible by an admissible drive" rather than a malformed input.
    pub fn is_representability(&self) -> bool {
        matches!(
            self,
            PulseError::VanishingDensity { .. }
                | PulseError::NotRepresentable(_)
                | PulseError::AmbiguousSign { .. }
                | PulseError::EquatorSingularity { .. }
                | PulseError::UndefinedLimit { .. }
        )
    }
}
