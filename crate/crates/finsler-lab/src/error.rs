//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Requested jet order or dimension outside the supported range.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A partial derivative of higher total order than the jet carries.
    #[error("derivative order {requested} exceeds jet order {available}")]
    OrderExceeded { requested: usize, available: usize },

    /// Metric parameters violate a family constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation point outside the admissible domain of the metric.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// A quantity that must stay positive (F, 1 - |beta|^2, ...) failed to.
    #[error("positivity violation: {0}")]
    PositivityViolation(String),

    /// Fundamental tensor singular or badly conditioned.
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    /// Flag edge parallel to the flagpole.
    #[error("degenerate flag: {0}")]
    DegenerateFlag(String),

    /// An identity or reference value is undefined for this metric.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// mu + 4c^2 vanishes; the constant-curvature branch applies instead.
    #[error("singular case: {0}")]
    SingularCase(String),

    /// Adaptive step size underflowed during integration.
    #[error("stiffness: {0}")]
    Stiffness(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
