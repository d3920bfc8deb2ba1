use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{0}")]
    Validation(String),

    /// `line` 0 means the file as a whole.
    #[error("{}", where_(path, *line, msg))]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("data integrity: {0}")]
    Integrity(String),

    #[error("empty group")]
    EmptyGroup,

    #[error("inconsistent history: {0}")]
    InconsistentHistory(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("counterfeit value exhaustion in entry {entry}")]
    CounterfeitExhaustion { entry: usize },

    #[error("{what} exceeds cap {cap}")]
    CapExceeded { what: &'static str, cap: u64 },

    #[error("history directory {0} is locked by another writer")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Infeasible(_) | Error::CounterfeitExhaustion { .. } => 3,
            Error::CapExceeded { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

fn where_(path: &std::path::Path, line: u64, msg: &str) -> String {
    match line {
        0 => format!("{}: {msg}", path.display()),
        n => format!("{}: line {n}: {msg}", path.display()),
    }
}
