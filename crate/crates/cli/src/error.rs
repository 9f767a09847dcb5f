use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] ampkit::Error),
}

impl CliError {
    /// 2 for numeric divergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(ampkit::Error::NumericDivergence { .. }) => 2,
            _ => 1,
        }
    }
}
