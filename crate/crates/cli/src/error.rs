use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io(_) | CliError::Parse(_) => 4,
        }
    }
}

impl From<multiuav::Error> for CliError {
    fn from(e: multiuav::Error) -> Self {
        match e {
            // A solver that gives up is reported like a run that did not converge.
            multiuav::Error::Solver(msg) => CliError::NotConverged(msg),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Parse(e.to_string())
        }
    }
}
