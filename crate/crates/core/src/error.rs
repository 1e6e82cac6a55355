use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    Empty,
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length {len} is not divisible by {by}")]
    NotDivisible { len: usize, by: usize },
    #[error("switch matrix column {0} has no antenna")]
    EmptyColumn(usize),
    #[error("no full-rank switch matrix after {0} fallbacks")]
    RankDeficient(usize),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
