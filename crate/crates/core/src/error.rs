use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Every variant that concerns a particular energy carries it, so sweep
/// drivers can report the offending grid point without extra bookkeeping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("non-finite state while propagating at x = {x} (lambda = {lambda})")]
    NonFiniteState { x: f64, lambda: String },

    #[error("mesh functions are sampled on different meshes")]
    MeshMismatch,

    #[error("lambda = {lambda} is numerically a Dirichlet eigenvalue of the internal operator")]
    DirichletPole { lambda: f64 },

    #[error("lambda = {lambda} lies at the lead threshold {threshold}")]
    ThresholdEnergy { lambda: f64, threshold: f64 },

    #[error("lead solution vanishes at the interface (lambda = {lambda})")]
    DegenerateInterface { lambda: f64 },

    #[error("eigenvalue {index}: bracketing failed on [{lo}, {hi}]")]
    BracketFailure { index: usize, lo: f64, hi: f64 },

    #[error("M(lambda) + tau(lambda) is numerically singular at lambda = {lambda}")]
    SingularCoupling { lambda: f64 },

    #[error("no open channel at lambda = {lambda}")]
    ChannelVoid { lambda: f64 },

    #[error("frozen Robin operator has an eigenvalue at lambda = {lambda}")]
    FrozenResonance { lambda: f64 },

    #[error("I + S is numerically singular")]
    CayleyPole,

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
