use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },

    #[error("no preset coupling for N = {0}; supply an explicit harmonic list")]
    UnsupportedPreset(usize),

    #[error("input length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("reduction unavailable: symmetry-breaking terms are nonzero")]
    ReductionUnavailable,

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("not a saddle: {0}")]
    NotASaddle(String),

    #[error("unsupported population size N = {0} (conditions exist for N = 2, 3)")]
    UnsupportedN(usize),

    #[error("out-of-domain angles: conditions for N = 3 require (alpha2, alpha4) = (pi/2, pi)")]
    OutOfDomainAngles,

    #[error("empty grid")]
    EmptyGrid,

    #[error("no certified cycle: {0}")]
    NoCertifiedCycle(String),

    #[error("indeterminate point ({0}, {1})")]
    IndeterminatePoint(f64, f64),

    #[error("boundary structure outside certified regime: {0} roots on the fundamental side")]
    BoundaryStructure(usize),

    #[error("no unstable direction at {0}")]
    NoUnstableDirection(String),

    #[error("unstable manifold of {from} does not lie in a subspace containing {to}")]
    NotConnectingSubspace { from: String, to: String },

    #[error("left certified subspace (drift {drift:.3e} at t = {t})")]
    LeftSubspace { drift: f64, t: f64 },

    #[error("Tmax exceeded: distance {distance:.3e} to target after t = {t}")]
    TmaxExceeded { distance: f64, t: f64 },

    #[error("insufficient events for eta = {eta:e}: {events} observed")]
    InsufficientEvents { eta: f64, events: usize },

    #[error("window too short: {0} samples (need at least 10)")]
    WindowTooShort(usize),

    #[error("invalid label `{0}`")]
    InvalidLabel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
