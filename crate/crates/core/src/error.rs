use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was called in a state that cannot support it.
    #[error("state error: {0}")]
    State(String),

    /// The ODE truncation level was too small for the requested horizon.
    #[error(
        "truncation level {level} insufficient: tail fraction at level {level} is {value:e} at \
         t = {t_end}, above the floor {floor:e}; increase the truncation level"
    )]
    Truncation {
        level: usize,
        t_end: f64,
        value: f64,
        floor: f64,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
