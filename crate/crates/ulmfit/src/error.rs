use std::path::{Path, PathBuf};

/// Errors surfaced by the command-line pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ulmfit_core::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("row error: line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("io error: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing prerequisite: expected {} ({what})", path.display())]
    MissingPrerequisite { path: PathBuf, what: String },
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 usage/config, 2 data, 3 numerics.
    pub fn exit_code(&self) -> i32 {
        use ulmfit_core::Error as C;
        match self {
            Error::Core(C::Config(_)) | Error::Usage(_) | Error::MissingPrerequisite { .. } => 1,
            Error::Core(C::Label(_) | C::Data(_) | C::Index(_)) => 2,
            Error::Format(_) | Error::Row { .. } | Error::Io { .. } => 2,
            Error::Core(C::Shape(_) | C::Numerics(_)) => 3,
        }
    }

    /// Short class name used in the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        use ulmfit_core::Error as C;
        match self {
            Error::Core(C::Config(_)) => "config",
            Error::Core(C::Label(_)) => "label",
            Error::Core(C::Data(_)) => "data",
            Error::Core(C::Index(_)) => "index",
            Error::Core(C::Shape(_)) => "shape",
            Error::Core(C::Numerics(_)) => "numerics",
            Error::Format(_) => "format",
            Error::Row { .. } => "row",
            Error::Io { .. } => "io",
            Error::MissingPrerequisite { .. } => "missing_prerequisite",
            Error::Usage(_) => "usage",
        }
    }

    /// `error code=<n> kind=<kind> message=<text>` on a single line.
    pub fn report_line(&self) -> String {
        let message: String = self
            .to_string()
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!(
            "error code={} kind={} message={}",
            self.exit_code(),
            self.kind(),
            message
        )
    }
}
