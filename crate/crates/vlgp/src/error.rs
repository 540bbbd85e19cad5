use std::fmt;

/// CLI failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    Config(String),
    /// Unreadable, malformed or unsupported data (exit 3).
    Data(String),
    /// The numerics failed on valid inputs (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<vlgp_core::Error> for CliError {
    fn from(e: vlgp_core::Error) -> Self {
        use vlgp_core::Error as E;
        let msg = e.to_string();
        if e.is_numerical() {
            return Self::Numerical(msg);
        }
        match e {
            E::InvalidData(_)
            | E::DuplicateLocation(..)
            | E::Support(_)
            | E::DimensionMismatch { .. }
            | E::IndexOutOfRange { .. } => Self::Data(msg),
            _ => Self::Config(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to I/O failures, which count as data errors.
pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}
