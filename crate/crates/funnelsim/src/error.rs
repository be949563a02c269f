use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative of order {order} not supported (max {max})")]
    UnsupportedDerivative { order: usize, max: usize },

    #[error("funnel class undecidable: {0}")]
    ClassUndecidable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument outside the open unit ball (norm {norm})")]
    DomainViolation { norm: f64 },

    #[error("funnel breach in {tag} (stage {stage}, margin value {value})")]
    FunnelBreach {
        tag: &'static str,
        stage: usize,
        value: f64,
    },

    #[error("numerical rank deficiency: {0}")]
    NumericalRank(String),

    #[error("evaluation point is a pole")]
    Pole,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("insufficient history at t = {t}")]
    InsufficientHistory { t: f64 },

    #[error("design error: {0}")]
    Design(String),

    #[error("inconsistent initialization (residual {residual:e})")]
    InconsistentInitialization { residual: f64 },

    #[error("singular matrix pencil")]
    SingularPencil,

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that a guarded integrator treats as step rejection.
    pub fn is_breach(&self) -> bool {
        matches!(self, Error::FunnelBreach { .. } | Error::DomainViolation { .. })
    }

    pub(crate) fn breach(tag: &'static str, stage: usize, value: f64) -> Self {
        Error::FunnelBreach { tag, stage, value }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
