use thiserror::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or an unwritable output.
    #[error("{0}")]
    Io(String),
    /// Invalid flag values or grid/schedule contents.
    #[error("{0}")]
    Config(String),
    /// A broken invariant inside the pipeline.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<ccfit::Error> for CliError {
    fn from(err: ccfit::Error) -> Self {
        use ccfit::Error as E;
        match err {
            E::Io(_)
            | E::Csv(_)
            | E::Json(_)
            | E::Parse { .. }
            | E::InvalidFrame(_)
            | E::Stream(_) => CliError::Io(err.to_string()),
            E::Config(_) | E::Geometry(_) | E::UndefinedSensitivity(_) => {
                CliError::Config(err.to_string())
            }
            E::Window(_)
            | E::WindowTooSmall { .. }
            | E::MissingJoint { .. }
            | E::NonFiniteCost { .. } => CliError::Internal(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
