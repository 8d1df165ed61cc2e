use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("no scheme is feasible at any sweep point: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl SimError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidSpec(_) | SimError::Config { .. } => 2,
            SimError::Infeasible(_) => 3,
            SimError::Io { .. } | SimError::Csv { .. } | SimError::Json { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
