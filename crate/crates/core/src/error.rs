use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no root of the fast voltage balance on [{lo}, {hi}] mV (x = {x}, Ca = {ca})")]
    NoRoot { x: f64, ca: f64, lo: f64, hi: f64 },

    #[error("adaptive step underflow at t = {t} ms (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("state diverged at t = {t} ms (|component| > 1e6)")]
    Divergence { t: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("equilibrium has classification {found}, expected {expected}")]
    WrongClass { found: String, expected: String },

    #[error("kaplan-yorke dimension undefined: all partial sums are non-negative")]
    Undefined,

    #[error("malformed itinerary at symbol {position}: {reason}")]
    GrammarViolation { position: usize, reason: String },

    #[error("no upper saddle (4,1)-type equilibrium at (dCa, dVx) = ({dca}, {dvx})")]
    MissingSaddle { dca: f64, dvx: f64 },

    #[error("no saddle-focus lower equilibrium at (dCa, dVx) = ({dca}, {dvx})")]
    NoSaddleFocus { dca: f64, dvx: f64 },

    #[error("return map has no fixed point near {0} mV")]
    MissingFixedPoint(f64),

    #[error("linear system is singular")]
    Singular,

    #[error("sweep interrupted after {completed} cells")]
    Interrupted { completed: usize },

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
