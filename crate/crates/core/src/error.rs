use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector is too close to zero to normalize (norm {0:e})")]
    ZeroVector(f64),
    #[error("non-finite coordinate in input vector")]
    NonFinite,
    #[error("point is antipodal to the base point; logarithm map is undefined")]
    AntipodalPoint,
    #[error("tangent vector norm {0} is outside the injectivity radius (must be < pi)")]
    OutOfInjectivityRadius(f64),
    #[error("frame hint is parallel to the base point")]
    DegenerateHint,
    #[error("vectors are not orthonormal: {0}")]
    NotOrthonormal(String),
    #[error("vector is not tangent to the base point (|v.base| = {0:e})")]
    NotTangent(f64),

    #[error(
        "invalid quadrature size ({n_polar}, {n_azimuth}); need n_polar >= 2 and n_azimuth >= 4"
    )]
    InvalidRuleSize { n_polar: usize, n_azimuth: usize },
    #[error("integrand is not finite at a quadrature node")]
    NonFiniteIntegrand,
    #[error("quadrature did not converge: last two estimates {previous:e} and {last:e}")]
    NoConvergence { previous: f64, last: f64 },
    #[error("relative tolerance {0:e} is below the supported minimum of 1e-12")]
    ToleranceTooSmall(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rejection envelope violated: log ratio {log_ratio} exceeds bound {log_bound}")]
    EnvelopeViolation { log_ratio: f64, log_bound: f64 },

    #[error("foci are antipodal")]
    AntipodalFoci,
    #[error("semi-major axis {alpha} is outside ({lower}, {upper})")]
    AxisConstraintViolated { alpha: f64, lower: f64, upper: f64 },
    #[error("ellipse with alpha = {alpha}, beta = {beta} has no focal representation")]
    NoFocalForm { alpha: f64, beta: f64 },
    #[error("contour semi-major axis {0} is not below pi")]
    ContourTooLarge(f64),
    #[error("concentration parameters must both be positive to draw a contour")]
    DegenerateConcentration,
    #[error("log-density varies by {0:e} along the traced contour")]
    ContourNotConstant(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("{0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
