use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] coldrec::Error),

    #[error("{what}: {}", path.display())]
    Io {
        what: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing {what}: {}", path.display())]
    Missing { what: &'static str, path: PathBuf },

    #[error("{0}")]
    Usage(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("server: {0}")]
    Server(String),
}

impl CliError {
    pub fn io(what: impl Into<String>, path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            what: what.into(),
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        use coldrec::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Leakage(_) | E::SplitYears { .. } => "leakage",
                E::BadMagic { .. } | E::Version { .. } | E::Truncated(_) => "artifact",
                E::Io(_) => "io",
                E::Config(_) | E::EfTooSmall { .. } => "config",
                E::UnknownNode(_) | E::MissingEmbedding(_) => "not_found",
                _ => "data",
            },
            CliError::Io { .. } => "io",
            CliError::Missing { .. } => "missing_input",
            CliError::Usage(_) => "usage",
            CliError::Malformed { .. } => "malformed",
            CliError::Server(_) => "server",
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let mut msg = self.to_string();
        if let Some(src) = std::error::Error::source(self).filter(|_| matches!(self, CliError::Io { .. })) {
            msg = format!("{msg}: {src}");
        }
        serde_json::json!({ "error": msg.replace('\n', " "), "kind": self.kind() }).to_string()
    }
}
