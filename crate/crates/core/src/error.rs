use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("transport instance too large: {rows}x{cols} exceeds cap {cap}")]
    InstanceTooLarge { rows: usize, cols: usize, cap: usize },
    #[error("transport solver failed: {0}")]
    TransportFailed(String),
    #[error("incompatible flows: {0}")]
    IncompatibleFlows(String),
    #[error("divergent norm: refinement levels {levels:?} do not settle")]
    DivergentNorm { levels: Vec<f64> },
    #[error("degenerate diffusion at probe {probe}")]
    DegenerateDiffusion { probe: usize },
    #[error("envelope violation at probe {probe}: |b| = {drift_norm} but f = 0")]
    EnvelopeViolation { probe: usize, drift_norm: f64 },
    #[error("simulation diverged at step {step}, particle {particle}")]
    SimulationDiverged { step: usize, particle: usize },
    #[error(
        "no contraction detected on segment starting at {segment_start} with t0 = {t0}: \
         ratios {ratios:?}; try a smaller t0"
    )]
    NoContraction {
        segment_start: f64,
        t0: f64,
        ratios: Vec<f64>,
    },
    #[error("diffusion band violation: eigenvalue {eigenvalue} outside [{lower}, {upper}]")]
    DiffusionBandViolation {
        eigenvalue: f64,
        lower: f64,
        upper: f64,
    },
    #[error("degenerate covariance")]
    DegenerateCovariance,
    #[error("quadrature unresolved: coarse {coarse}, fine {fine}")]
    QuadratureUnresolved { coarse: f64, fine: f64 },
    #[error("dimension {dim} unsupported (max {max})")]
    DimensionUnsupported { dim: usize, max: usize },
    #[error("pde solver diverged at time step {step}")]
    SolverDiverged { step: usize },
    #[error("no admissible lambda up to {lambda_max}")]
    NoAdmissibleLambda { lambda_max: f64 },
    #[error("extrapolation refused at (t, x) = ({t}, {x})")]
    ExtrapolationRefused { t: f64, x: f64 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
