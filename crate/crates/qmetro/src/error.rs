use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{}: checksum mismatch (expected {expected}, computed {computed})", path.display())]
    Checksum {
        path: PathBuf,
        expected: String,
        computed: String,
    },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Core(#[from] qmetro_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
