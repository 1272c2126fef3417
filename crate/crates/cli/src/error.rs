use std::path::Path;

use revoca_core::actors::{HolderError, IssuerError, SourceError, VerifierError};
use revoca_core::ahibe::AhibeError;
use revoca_core::service::ServiceError;
use revoca_core::sim::{error_class, SimError};
use revoca_core::tables::TableError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Decode { path: String, reason: String },
    #[error(transparent)]
    Ahibe(#[from] AhibeError),
    #[error(transparent)]
    Issuer(#[from] IssuerError),
    #[error(transparent)]
    Holder(#[from] HolderError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn decode(path: &Path, reason: impl ToString) -> Self {
        CliError::Decode { path: path.display().to_string(), reason: reason.to_string() }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Io { .. } => "Io",
            CliError::Decode { .. } => "Decode",
            CliError::Ahibe(_) => "Ahibe",
            CliError::Issuer(_) => "Issuer",
            CliError::Holder(_) => "Holder",
            CliError::Source(_) => "Source",
            CliError::Service(_) => "Service",
            CliError::Sim(_) => "Sim",
            CliError::Table(_) => "Table",
            CliError::Verifier(e) => error_class(e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Decode { .. } => 4,
            CliError::Ahibe(_) => 5,
            CliError::Issuer(_) => 6,
            CliError::Holder(_) => 7,
            CliError::Source(_) => 8,
            CliError::Service(_) => 9,
            CliError::Sim(_) => 10,
            CliError::Table(_) => 11,
            CliError::Verifier(e) => match e {
                VerifierError::BadSignature(_) => 20,
                VerifierError::BadProofOfPossession => 21,
                VerifierError::NoAuthorizations => 22,
                VerifierError::KeyProbeFailed { .. } => 23,
                VerifierError::CheckDigestNotFound { .. } => 24,
                VerifierError::SnapshotUnavailable { .. } => 25,
                VerifierError::DeferredFutureDay { .. } => 26,
                VerifierError::CorruptSnapshot(_) => 27,
                VerifierError::Integrity(_) => 28,
            },
        }
    }

    /// One-line JSON for the error stream.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "class": self.class(),
            "error": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
