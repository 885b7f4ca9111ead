use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("evaluation point within pole exclusion radius of monopole {0}")]
    Singularity(usize),
    #[error("query is stale: scene revision {found}, expected {expected}")]
    StaleQuery { found: u64, expected: u64 },
    #[error("operation not supported by this representation: {0}")]
    Unsupported(&'static str),
    #[error("{0} out of domain")]
    Domain(&'static str),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
