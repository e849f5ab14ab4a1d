use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical state error: {0}")]
    NumericalState(String),

    #[error("self-adjointness violation: imaginary residue {imag:e} against real part {real:e}")]
    SelfAdjointness { real: f64, imag: f64 },

    #[error("domain escape at t = {time}: boundary mass fraction {mass:e} exceeds {limit:e}")]
    DomainEscape { time: f64, mass: f64, limit: f64 },

    #[error("t = {time} lies within {guard:e} of the singular time {singular}")]
    Singularity { time: f64, singular: f64, guard: f64 },

    #[error("oracle scale exceeded: {0}")]
    OracleScale(String),

    #[error("phase winding dt*max|V| = {winding} exceeds pi")]
    PhaseWinding { winding: f64 },

    #[error("state not resolved by the grid at t = {time}: {reason}")]
    Unresolved { time: f64, reason: String },

    #[error("trajectory does not escape: {0}")]
    NoEscape(String),

    #[error("derivative error: {0}")]
    Derivative(String),

    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}
