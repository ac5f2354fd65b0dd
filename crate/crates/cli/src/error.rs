use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("unknown tolerance '{name}' for {command}; known: {known}")]
    UnknownTolerance { name: String, command: String, known: String },

    #[error("bad tolerance override '{0}', expected NAME=VALUE")]
    BadOverride(String),

    #[error(transparent)]
    Core(#[from] mrlab_core::MrError),

    #[error("plot error: {0}")]
    Plot(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
