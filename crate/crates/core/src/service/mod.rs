//! Read-only publication of an Issuer's tables, and the client Verifiers and
//! Holders use to fetch them.
//!
//! Three GET endpoints exist and nothing else:
//!
//! ```text
//! GET /v1/params
//! GET /v1/days/{day}/check/segments/{j}
//! GET /v1/days/{day}/revocation
//! ```
//!
//! There is deliberately no endpoint that takes a credential id, a digest or
//! a revocation-table index. The same [`Router`] answers both the HTTP server
//! and the in-process transport, so the two produce identical bytes.

mod client;
mod http;
mod params;
mod router;
mod store;

pub use client::{Client, FetchLog, FetchRecord, HttpTransport, InProcess, Transport};
pub use http::Server;
pub use params::PublicParamsDocument;
pub use router::{Response, Route, Router, ENDPOINTS, REASON_HEADER, DAY_HEADER};
pub use store::{publish_day, publish_params, prune_days, DirStore, MemoryStore, SnapshotStore, PARAMS_FILE};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("state directory {0} does not exist")]
    MissingStateDir(String),
    #[error("cannot bind {address}: {reason}")]
    Bind { address: String, reason: String },
    #[error(transparent)]
    Table(#[from] crate::tables::TableError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
