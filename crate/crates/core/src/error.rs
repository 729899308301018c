use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeoError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("point {point:?} lies outside the chart of {space}")]
    OutOfChart { space: String, point: Vec<f64> },

    #[error("trajectory has {have} samples around t={t}, need at least 3")]
    InsufficientSamples { t: f64, have: usize },

    #[error("adaptive step fell below {floor:e} at t={t} (chart singularity?)")]
    StepUnderflow { t: f64, floor: f64 },

    #[error("geodesic is inextendible: integration stopped at t={reached} before t={wanted}")]
    Inextendible { reached: f64, wanted: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("unknown space `{0}`")]
    UnknownSpace(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("unknown covering `{0}`")]
    UnknownCovering(String),

    #[error("Klein offset has norm {0} >= 1; the chord misses the disc")]
    OutsideDisc(f64),

    #[error("foot minimization failed: {0}")]
    FootNotFound(String),

    #[error("minimization diverged: {0}")]
    MinimizationDiverged(String),

    #[error("no root found from {starts} starts")]
    NoRootFound { starts: usize },

    #[error("no connecting geodesic found")]
    NoConnectionFound,

    #[error("geodesic is not closed within t_max={t_max}")]
    NotClosed { t_max: f64 },

    #[error("sheet {sheet:?} is not valid for covering `{covering}`")]
    BadSheet { covering: String, sheet: Vec<i64> },

    #[error("chart `{chart}` is not supported for space {space}")]
    UnsupportedChart { chart: String, space: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl GeoError {
    /// Short machine-readable tag used in serialized error objects.
    pub fn code(&self) -> &'static str {
        match self {
            GeoError::OutOfChart { .. } => "out_of_chart",
            GeoError::InsufficientSamples { .. } => "insufficient_samples",
            GeoError::StepUnderflow { .. } => "step_underflow",
            GeoError::Inextendible { .. } => "inextendible",
            GeoError::NoConvergence { .. } => "no_convergence",
            GeoError::UnknownSpace(_) => "unknown_space",
            GeoError::BadParams(_) => "bad_params",
            GeoError::UnknownCovering(_) => "unknown_covering",
            GeoError::OutsideDisc(_) => "outside_disc",
            GeoError::FootNotFound(_) => "foot_not_found",
            GeoError::MinimizationDiverged(_) => "minimization_diverged",
            GeoError::NoRootFound { .. } => "no_root_found",
            GeoError::NoConnectionFound => "no_connection_found",
            GeoError::NotClosed { .. } => "not_closed",
            GeoError::BadSheet { .. } => "bad_sheet",
            GeoError::UnsupportedChart { .. } => "unsupported_chart",
            GeoError::Parse(_) => "parse",
        }
    }
}
