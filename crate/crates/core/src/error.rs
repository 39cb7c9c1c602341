use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid radar configuration: {0}")]
    Config(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("range frequency of {reflector} ({fr_hz:.3} Hz) is not below f_s/2 = {limit_hz:.3} Hz")]
    AmbiguousRange {
        reflector: String,
        fr_hz: f64,
        limit_hz: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("input spectrum carries no signal energy")]
    NoSignal,

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("solver did not converge after {iterations} iterations (rms residual {residual_m:.3e} m)")]
    NonConvergence {
        position: Vec<f64>,
        residual_m: f64,
        iterations: usize,
    },

    #[error("angle estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),
}
