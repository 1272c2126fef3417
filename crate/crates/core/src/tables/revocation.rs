use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{TableError, TableParams};
use crate::ahibe::{self, DayKey, EncapHeader, IdentityPath, MasterPublicParams};
use crate::crypto::{self, index_from_ciphertext, BucketIndex, CheckDigest, DayIndex, VcId};
use crate::encoding::{b64, canonical_decode, canonical_encode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevocationStatus {
    Revoked,
    Suspended,
    Conditioned,
}

/// Content of one revocation publication for one credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationDocument {
    pub vc_id: VcId,
    pub status: RevocationStatus,
    pub reason: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constraints: BTreeMap<String, String>,
    pub effective_from: DayIndex,
    pub sequence: u64,
}

/// Randomized encapsulation header plus the sealed document. The associated
/// data is not stored; openers recompute it from `(root, day, vc_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationEntry {
    pub header: EncapHeader,
    #[serde(with = "b64")]
    pub sealed_body: Vec<u8>,
}

/// A revocation table is an immutable value. Buckets are shared between
/// versions, so an insert copies only the touched overflow list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationTableSnapshot {
    day: DayIndex,
    params: TableParams,
    buckets: Vec<Arc<Vec<RevocationEntry>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub entries: u64,
    pub buckets: u64,
    pub max_list: u64,
}

impl TableStats {
    pub fn mean_list(&self) -> f64 {
        self.entries as f64 / self.buckets as f64
    }
}

pub fn associated_data(root: &str, day: DayIndex, vc_id: &VcId) -> Vec<u8> {
    canonical_encode(&json!({ "day": day.0, "root": root, "vc_id": vc_id.to_string() }))
        .expect("fixed shape encodes")
}

/// `x' = H(E_{root/day}(digest)) mod d`, computed identically by Issuer,
/// Holder and Verifier.
pub fn locate_revocation(
    mpp: &MasterPublicParams,
    root: &str,
    day: DayIndex,
    digest: &CheckDigest,
    d: u64,
) -> Result<BucketIndex, TableError> {
    let id = IdentityPath::day(root, day)?;
    let (header, _) = ahibe::det_encap(mpp, &id, digest.as_bytes())?;
    Ok(index_from_ciphertext(&header.canonical_bytes(), d))
}

/// Encrypts `doc` for `(root, day)` under a fresh randomized encapsulation.
pub fn seal_revocation<R: RngCore + CryptoRng>(
    mpp: &MasterPublicParams,
    root: &str,
    day: DayIndex,
    doc: &RevocationDocument,
    rng: &mut R,
) -> Result<RevocationEntry, TableError> {
    let id = IdentityPath::day(root, day)?;
    let (header, key) = ahibe::encap(mpp, &id, rng)?;
    let plaintext = canonical_encode(doc).map_err(|e| TableError::Integrity(e.to_string()))?;
    let sealed_body = crypto::seal(&key, &plaintext, &associated_data(root, day, &doc.vc_id), rng);
    Ok(RevocationEntry { header, sealed_body })
}

impl RevocationTableSnapshot {
    pub fn empty(params: TableParams, day: DayIndex) -> Self {
        let shared = Arc::new(Vec::new());
        RevocationTableSnapshot { day, params, buckets: vec![shared; params.d() as usize] }
    }

    pub(crate) fn from_parts(
        day: DayIndex,
        params: TableParams,
        buckets: Vec<Vec<RevocationEntry>>,
    ) -> Result<Self, TableError> {
        if buckets.len() as u64 != params.d() {
            return Err(TableError::CorruptSnapshot(format!(
                "expected {} buckets, found {}",
                params.d(),
                buckets.len()
            )));
        }
        Ok(RevocationTableSnapshot { day, params, buckets: buckets.into_iter().map(Arc::new).collect() })
    }

    pub fn day(&self) -> DayIndex {
        self.day
    }

    pub fn params(&self) -> &TableParams {
        &self.params
    }

    pub fn bucket(&self, index: BucketIndex) -> Result<&[RevocationEntry], TableError> {
        self.buckets
            .get(index.as_usize())
            .map(|b| b.as_slice())
            .ok_or(TableError::IndexOutOfRange { index: index.0, size: self.params.d() })
    }

    pub fn buckets(&self) -> impl Iterator<Item = &[RevocationEntry]> {
        self.buckets.iter().map(|b| b.as_slice())
    }

    /// Returns a new version with `entry` appended to the overflow list at
    /// `index`. `self` is left untouched.
    pub fn insert_revocation(
        &self,
        index: BucketIndex,
        entry: RevocationEntry,
    ) -> Result<Self, TableError> {
        let mut next = self.clone();
        next.push(index, entry)?;
        Ok(next)
    }

    pub(crate) fn push(&mut self, index: BucketIndex, entry: RevocationEntry) -> Result<(), TableError> {
        let size = self.params.d();
        let bucket = self
            .buckets
            .get_mut(index.as_usize())
            .ok_or(TableError::IndexOutOfRange { index: index.0, size })?;
        Arc::make_mut(bucket).push(entry);
        Ok(())
    }

    pub fn stats(&self) -> TableStats {
        TableStats {
            entries: self.buckets.iter().map(|b| b.len() as u64).sum(),
            buckets: self.params.d(),
            max_list: self.buckets.iter().map(|b| b.len() as u64).max().unwrap_or(0),
        }
    }

    /// Tries every entry at `index` with `dk`. Entries that fail to
    /// authenticate belong to someone else and are skipped; an entry that
    /// authenticates but does not hold a well-formed document for `vc_id` is
    /// an integrity error.
    pub fn scan_bucket(
        &self,
        index: BucketIndex,
        dk: &DayKey,
        root: &str,
        day: DayIndex,
        vc_id: &VcId,
    ) -> Result<Vec<RevocationDocument>, TableError> {
        let ad = associated_data(root, day, vc_id);
        let mut found = Vec::new();
        for entry in self.bucket(index)? {
            let Ok(key) = ahibe::decap(dk, &entry.header) else {
                continue;
            };
            let Ok(plaintext) = crypto::open(&entry.sealed_body, &key, &ad) else {
                continue;
            };
            let doc: RevocationDocument = canonical_decode(&plaintext)
                .map_err(|e| TableError::Integrity(format!("undecodable revocation document: {e}")))?;
            if doc.vc_id != *vc_id {
                return Err(TableError::Integrity(format!(
                    "document for {} authenticated under {}",
                    doc.vc_id, vc_id
                )));
            }
            found.push(doc);
        }
        found.sort_by_key(|doc| doc.sequence);
        Ok(found)
    }
}
