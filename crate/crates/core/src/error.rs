use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("topology has no edges; there is no interbank market to build")]
    NoInterbankMarket,

    #[error("infeasible balance sheets: total external assets {total} do not exceed the summed net borrowing {net_borrowing}")]
    InfeasibleBalance { total: f64, net_borrowing: f64 },

    #[error("bank index {index} out of range for {n} banks")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },

    #[error("config: {0}")]
    Config(#[from] ConfigError),

    #[error("replication {stream_index} failed: {source}")]
    Replication {
        stream_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}
