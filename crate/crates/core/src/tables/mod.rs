//! The two per-day published tables and their file format.
//!
//! The check table holds one [`CheckDigest`](crate::crypto::CheckDigest) per
//! live credential, bucketed by digest prefix and split into `sigma`
//! equal segments so a Verifier downloads only the segment it needs. The
//! revocation table has `d` buckets of overflow lists holding encrypted
//! revocation documents; it is always downloaded whole.

mod check;
mod revocation;
mod snapshot;

pub use check::{build_check_table, segment_for_digest, CheckSegment, CheckTableSnapshot};
pub use revocation::{
    associated_data, locate_revocation, seal_revocation, RevocationDocument, RevocationEntry,
    RevocationStatus, RevocationTableSnapshot, TableStats,
};
pub use snapshot::{
    read_snapshot, snapshot_file_name, write_atomic, write_snapshot, SnapshotFile, SnapshotKind,
    SNAPSHOT_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::ahibe::AhibeError;

/// Default number of past days kept in the archive.
pub const DEFAULT_RETENTION_DAYS: u64 = 30;
/// Default minimum expected digests per check segment.
pub const DEFAULT_MIN_ANONYMITY: u64 = 256;

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("invalid table parameters: {0}")]
    Params(String),
    #[error("index {index} out of range for table of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("digest belongs to segment {expected}, not {actual}")]
    WrongSegment { expected: u64, actual: u64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("snapshot is for day {actual}, expected {expected}")]
    DayMismatch { expected: u64, actual: u64 },
    #[error(transparent)]
    Ahibe(#[from] AhibeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Public sizing of both tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTableParams", into = "RawTableParams")]
pub struct TableParams {
    d: u64,
    c: u64,
    sigma: u64,
    min_anonymity: u64,
}

#[derive(Serialize, Deserialize)]
struct RawTableParams {
    c: u64,
    d: u64,
    min_anonymity: u64,
    sigma: u64,
}

impl TryFrom<RawTableParams> for TableParams {
    type Error = TableError;

    fn try_from(raw: RawTableParams) -> Result<Self, Self::Error> {
        TableParams::new(raw.d, raw.c, raw.sigma, raw.min_anonymity)
    }
}

impl From<TableParams> for RawTableParams {
    fn from(p: TableParams) -> Self {
        RawTableParams { c: p.c, d: p.d, min_anonymity: p.min_anonymity, sigma: p.sigma }
    }
}

impl std::fmt::Display for TableParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d={} c={} sigma={} min_anonymity={}", self.d, self.c, self.sigma, self.min_anonymity)
    }
}

impl TableParams {
    pub fn new(d: u64, c: u64, sigma: u64, min_anonymity: u64) -> Result<Self, TableError> {
        if d == 0 || c == 0 || sigma == 0 || min_anonymity == 0 {
            return Err(TableError::Params("all sizes must be positive".into()));
        }
        if c < sigma || !c.is_multiple_of(sigma) {
            return Err(TableError::Params(format!("sigma={sigma} must divide c={c}")));
        }
        if c > u32::MAX as u64 || d > u32::MAX as u64 {
            return Err(TableError::Params("table sizes must fit in 32 bits".into()));
        }
        Ok(TableParams { d, c, sigma, min_anonymity })
    }

    /// Picks the largest `sigma` dividing `c` that keeps at least
    /// `min_anonymity` expected digests per segment for `population` live
    /// credentials. Falls back to a single segment.
    pub fn for_population(
        d: u64,
        c: u64,
        population: u64,
        min_anonymity: u64,
    ) -> Result<Self, TableError> {
        let min = min_anonymity.max(1);
        let sigma = (1..=c)
            .rev()
            .filter(|s| c.is_multiple_of(*s))
            .find(|s| population / s >= min)
            .unwrap_or(1);
        TableParams::new(d, c, sigma, min_anonymity)
    }

    /// Revocation table size.
    pub fn d(&self) -> u64 {
        self.d
    }

    /// Check table bucket count.
    pub fn c(&self) -> u64 {
        self.c
    }

    /// Number of check table segments.
    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    pub fn min_anonymity(&self) -> u64 {
        self.min_anonymity
    }

    pub fn buckets_per_segment(&self) -> u64 {
        self.c / self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(TableParams::new(1024, 1024, 16, 256).is_ok());
        assert!(matches!(TableParams::new(1024, 1000, 16, 256), Err(TableError::Params(_))));
        assert!(TableParams::new(0, 1024, 16, 256).is_err());
        assert!(TableParams::new(8, 4, 8, 1).is_err());
        assert!(TableParams::new(1, 1, 1, 1).is_ok());
    }

    #[test]
    fn sigma_sizing_respects_anonymity() {
        let p = TableParams::for_population(1024, 1024, 10_000, 256).unwrap();
        assert_eq!(p.sigma(), 32);
        assert!(10_000 / p.sigma() >= 256);
        let p = TableParams::for_population(64, 64, 10, 256).unwrap();
        assert_eq!(p.sigma(), 1);
    }

    #[test]
    fn params_serde_validates() {
        let bytes = crate::encoding::canonical_encode(&TableParams::new(4, 8, 2, 1).unwrap()).unwrap();
        assert_eq!(bytes, br#"{"c":8,"d":4,"min_anonymity":1,"sigma":2}"#);
        let bad: Result<TableParams, _> =
            crate::encoding::canonical_decode(br#"{"c":8,"d":4,"min_anonymity":1,"sigma":3}"#);
        assert!(bad.is_err());
    }
}
