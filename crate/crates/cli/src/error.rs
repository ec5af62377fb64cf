use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] sel_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(sel_core::Error::Parse(_)) | CliError::Solver(sel_core::Error::Precondition(_)) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(sel_core::Error::Parse(_)) => "parse",
            CliError::Solver(sel_core::Error::Precondition(_)) => "precondition",
            CliError::Solver(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}
