use std::fmt::Display;
use std::path::Path;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures are split by who has to act: `Validation` means the inputs or
/// configuration are wrong, `Runtime` means valid inputs failed to process.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn validation(msg: impl Display) -> Self {
        Error::Validation(msg.to_string())
    }

    pub fn runtime(msg: impl Display) -> Self {
        Error::Runtime(msg.to_string())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Runtime(_) => 2,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        let msg = format!("{}: {e}", path.display());
        match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => Error::Validation(msg),
            _ => Error::Runtime(msg),
        }
    }
}

/// Attaches a stage name to errors from the core library.
pub(crate) trait Context<T> {
    fn invalid(self, stage: &str) -> Result<T>;
    fn failed(self, stage: &str) -> Result<T>;
}

impl<T, E: Display> Context<T> for std::result::Result<T, E> {
    fn invalid(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Validation(format!("{stage}: {e}")))
    }

    fn failed(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Runtime(format!("{stage}: {e}")))
    }
}
