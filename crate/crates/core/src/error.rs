use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Output(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "exact edge table of round {round} reached the limit of {limit} keys{}; \
         increase the number of rounds",
        load_note(*.load_estimate)
    )]
    TableOverflow {
        round: usize,
        cardinality: usize,
        limit: usize,
        /// Estimated load of the round's partition class, when counted.
        load_estimate: Option<u64>,
    },

    #[error("input of {bases} bases exceeds the oracle cap of {cap} bases")]
    OracleTooLarge { bases: usize, cap: usize },
}

fn load_note(load: Option<u64>) -> String {
    load.map(|l| format!(" (estimated class load {l})"))
        .unwrap_or_default()
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
