use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument fell outside the domain of a function.
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("point ({x}, {y}) lies outside the observing area")]
    OutsideArea { x: f64, y: f64 },

    #[error("no decision threshold separates hypotheses {lower} and {upper}")]
    NoSeparatingRoot { lower: usize, upper: usize },

    #[error("malformed observation: {0}")]
    Observation(String),

    #[error("quorum of {needed} activations not reached within {horizon} s")]
    QuorumTimeout { needed: usize, horizon: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            func,
            msg: msg.into(),
        }
    }

    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
