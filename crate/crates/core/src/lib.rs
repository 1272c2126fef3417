//! Privacy-preserving, day-scoped revocation checking for verifiable
//! credentials.

pub mod actors;
pub mod ahibe;
pub mod crypto;
pub mod encoding;
pub mod service;
pub mod sim;
pub mod tables;
