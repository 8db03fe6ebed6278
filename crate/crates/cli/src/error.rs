use std::fmt;

/// Errors surfaced by the command-line drivers.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed input, configuration, or usage.
    #[error("{0}")]
    Input(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Core(#[from] epiboot_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Input => "input",
            ErrorKind::Numerical => "numerical",
        })
    }
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) if e.is_numerical() => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Numerical => 3,
        }
    }

    /// Single-line diagnostic: `error kind=<input|numerical> code=<n>: <message>`.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} code={}: {}", self.kind(), self.exit_code(), msg)
    }
}
