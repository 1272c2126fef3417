//! The four protocol roles: PKG, Issuer, Holder wallet and Verifier.
//!
//! Each role is a plain value with its own state. The only thing that flows
//! from Issuer to Holder is the credential and its seed at issuance; from
//! then on the Holder needs nothing from the Issuer, and the Verifier only
//! reads published tables.

mod credential;
mod holder;
mod issuer;
mod pkg;
mod verifier;

pub use credential::{
    pop_message, Nonce, Presentation, TemporalAuthorization, TrustStore, VerifiableCredential,
    NONCE_LEN,
};
pub use holder::{HolderError, Wallet, WalletRecord};
pub use issuer::{IssuerError, IssuerState, PublishedDay, PublishedRevocation, RegistryRecord};
pub use pkg::Pkg;
pub use verifier::{
    Bandwidth, DayOutcome, DayStatus, DeferredCheck, DeferredOutcome, Fetched, SourceError,
    StatusResult, TableSource, Verifier, VerifierError,
};

use std::path::Path;

use crate::tables::TableError;

pub const WALLET_FILE: &str = "wallet.store";
pub const ISSUER_FILE: &str = "issuer.state";
pub const TRUST_FILE: &str = "trust.store";
pub const PRESENTATION_FILE: &str = "presentation.pres";

/// Atomically writes a file readable only by its owner.
pub fn write_private(path: &Path, bytes: &[u8]) -> Result<(), TableError> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("private");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut options = std::fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    std::os::unix::fs::OpenOptionsExt::mode(&mut options, 0o600);
    let mut file = options.open(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    drop(file);
    std::fs::rename(&tmp, path)?;
    Ok(())
}
