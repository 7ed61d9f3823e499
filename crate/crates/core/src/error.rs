use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range {lo}..={hi} for {what}")]
    Index {
        what: &'static str,
        index: i64,
        lo: i64,
        hi: i64,
    },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("division by zero: {0}")]
    Division(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub(crate) fn index(what: &'static str, index: usize, lo: usize, hi: usize) -> Self {
        Error::Index {
            what,
            index: index as i64,
            lo: lo as i64,
            hi: hi as i64,
        }
    }
}
