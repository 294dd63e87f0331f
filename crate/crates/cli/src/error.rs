use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config file not found: {}", .0.display())]
    ConfigMissing(PathBuf),
    #[error("cannot parse config {}: {msg}", .path.display())]
    ConfigParse { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Uq(#[from] sgcoll::uq::UqError),
    #[error(transparent)]
    Deformation(#[from] sgcoll::deformation::DeformationError),
    #[error(transparent)]
    Bound(#[from] sgcoll::uq::BoundError),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Short stable tag for scripts.
    pub fn kind(&self) -> &'static str {
        use sgcoll::uq::UqError;
        match self {
            CliError::ConfigMissing(_) => "config-missing",
            CliError::ConfigParse { .. } => "config-parse",
            CliError::Usage(_) => "usage",
            CliError::Uq(UqError::Config(_)) => "config-invalid",
            CliError::Uq(UqError::Inadmissible(_)) | CliError::Deformation(_) => "inadmissible",
            CliError::Uq(UqError::NodeFailed { .. }) => "solve-failed",
            CliError::Uq(_) => "runtime",
            CliError::Bound(_) => "bound",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigMissing(_) | CliError::ConfigParse { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// The message on one line, so that every failure is a single record.
    pub fn line(&self) -> String {
        let mut msg = self.to_string();
        let mut source = std::error::Error::source(self);
        while let Some(s) = source {
            let text = s.to_string();
            if !msg.contains(&text) {
                msg.push_str(": ");
                msg.push_str(&text);
            }
            source = s.source();
        }
        let flat: Vec<&str> = msg.split_whitespace().collect();
        format!("sgcoll: error[{}]: {}", self.kind(), flat.join(" "))
    }
}
