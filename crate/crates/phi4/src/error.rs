use thiserror::Error;

/// Errors surfaced by the phi4 toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("near-degenerate gap {gap:.3e} below threshold {threshold:.3e}")]
    DegenerateGap { gap: f64, threshold: f64 },

    #[error("bracket [{lo}, {hi}] exhausted without reaching the target")]
    BracketExhausted { lo: f64, hi: f64 },

    #[error(
        "step size underflow at s = {s:.6}, h = {h:.3e}; the phase T*v*f is too stiff \
         for a direct stepper, use a phase-integrated stepper instead"
    )]
    StiffPhase { s: f64, h: f64 },

    #[error("objective returned a non-finite value at evaluation {evaluation}")]
    NonFiniteObjective { evaluation: usize },

    #[error("optimizer finished below the requested quality: {0}")]
    BelowThreshold(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
