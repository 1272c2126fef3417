use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::VerifiableCredential;
use crate::ahibe::{AhibeError, IdentityPath, MasterPublicParams};
use crate::crypto::{
    check_bucket, compute_check_digest, derive_day_token, kdf32, CheckDigest, DayIndex, PublicKey,
    Seed, SigningKey, VcId,
};
use crate::encoding::{canonical_decode, canonical_encode, EncodingError};
use crate::tables::{
    build_check_table, locate_revocation, seal_revocation, CheckTableSnapshot, RevocationDocument,
    RevocationEntry, RevocationTableSnapshot, TableError, TableParams, DEFAULT_RETENTION_DAYS,
};

const ENTRY_RANDOMNESS_CONTEXT: &[u8] = b"revoca/issuer-entry/v1";
const STATE_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum IssuerError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("unknown credential {0}")]
    UnknownCredential(VcId),
    #[error("revocation for day {actual} but the current day is {expected}")]
    DayMismatch { expected: DayIndex, actual: DayIndex },
    #[error("document names credential {actual}, expected {expected}")]
    CredentialMismatch { expected: VcId, actual: VcId },
    #[error("sequence {actual} does not exceed the last published sequence {last}")]
    SequenceNotIncreasing { last: u64, actual: u64 },
    #[error("credential {vc_id} is not valid on day {day}")]
    NotActive { vc_id: VcId, day: DayIndex },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Ahibe(#[from] AhibeError),
    #[error("state file: {0}")]
    Encoding(#[from] EncodingError),
}

/// A revocation document together with the day it was first published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedRevocation {
    /// Issuer-wide publication order; fixes the order of overflow lists.
    pub ordinal: u64,
    pub published_day: DayIndex,
    pub document: RevocationDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub root: String,
    pub seed: Seed,
    pub issued_day: DayIndex,
    pub expiry_day: DayIndex,
    pub revocations: Vec<PublishedRevocation>,
}

impl RegistryRecord {
    pub fn active_on(&self, day: DayIndex) -> bool {
        self.issued_day <= day && day <= self.expiry_day
    }

    fn digest_on(&self, vc_id: &VcId, day: DayIndex) -> Option<CheckDigest> {
        let k = day.life_day_since(self.issued_day)?;
        Some(compute_check_digest(&derive_day_token(&self.seed, k), vc_id))
    }
}

/// Both tables as published for one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishedDay {
    pub check: CheckTableSnapshot,
    pub revocation: RevocationTableSnapshot,
}

/// The Issuer. The registry is the single source of truth: every table it
/// publishes can be rebuilt bit-for-bit from the registry alone.
#[derive(Debug, Clone)]
pub struct IssuerState {
    issuer_id: String,
    signing_key: SigningKey,
    entropy: Seed,
    params: TableParams,
    mpp: MasterPublicParams,
    current_day: DayIndex,
    retention_days: u64,
    registry: BTreeMap<VcId, RegistryRecord>,
    next_ordinal: u64,
    current: PublishedDay,
    archive: BTreeMap<DayIndex, PublishedDay>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    version: String,
    issuer_id: String,
    signing_key: SigningKey,
    entropy: Seed,
    params: TableParams,
    mpp: MasterPublicParams,
    current_day: DayIndex,
    retention_days: u64,
    next_ordinal: u64,
    registry: BTreeMap<VcId, RegistryRecord>,
}

impl IssuerState {
    pub fn init<R: RngCore + CryptoRng>(
        issuer_id: impl Into<String>,
        mpp: MasterPublicParams,
        params: TableParams,
        day: DayIndex,
        rng: &mut R,
    ) -> Self {
        IssuerState {
            issuer_id: issuer_id.into(),
            signing_key: SigningKey::generate(rng),
            entropy: Seed::generate(rng),
            params,
            mpp,
            current_day: day,
            retention_days: DEFAULT_RETENTION_DAYS,
            registry: BTreeMap::new(),
            next_ordinal: 0,
            current: PublishedDay {
                check: build_check_table([], params, day),
                revocation: RevocationTableSnapshot::empty(params, day),
            },
            archive: BTreeMap::new(),
        }
    }

    pub fn with_retention(mut self, days: u64) -> Self {
        self.retention_days = days;
        self.prune_archive();
        self
    }

    pub fn issuer_id(&self) -> &str {
        &self.issuer_id
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.signing_key
    }

    pub fn public_key(&self) -> PublicKey {
        self.signing_key.public_key()
    }

    pub fn params(&self) -> &TableParams {
        &self.params
    }

    pub fn mpp(&self) -> &MasterPublicParams {
        &self.mpp
    }

    pub fn current_day(&self) -> DayIndex {
        self.current_day
    }

    pub fn retention_days(&self) -> u64 {
        self.retention_days
    }

    pub fn registry(&self) -> &BTreeMap<VcId, RegistryRecord> {
        &self.registry
    }

    pub fn issue<R: RngCore + CryptoRng>(
        &mut self,
        root: &str,
        claims: BTreeMap<String, String>,
        expiry_day: DayIndex,
        pop_public_key: PublicKey,
        rng: &mut R,
    ) -> Result<(VerifiableCredential, Seed), IssuerError> {
        IdentityPath::root(root)?;
        if expiry_day < self.current_day {
            return Err(IssuerError::Params(format!(
                "expiry day {expiry_day} is before the current day {}",
                self.current_day
            )));
        }
        let vc_id = loop {
            let id = VcId::generate(rng);
            if !self.registry.contains_key(&id) {
                break id;
            }
        };
        let seed = Seed::generate(rng);
        let record = RegistryRecord {
            root: root.to_string(),
            seed: seed.clone(),
            issued_day: self.current_day,
            expiry_day,
            revocations: Vec::new(),
        };
        let digest = record.digest_on(&vc_id, self.current_day).expect("issued today");
        insert_digest(&mut self.current.check, digest);
        self.registry.insert(vc_id, record);
        let vc = VerifiableCredential::sign(
            vc_id,
            root.to_string(),
            self.current_day,
            expiry_day,
            claims,
            pop_public_key,
            self.issuer_id.clone(),
            &self.signing_key,
        );
        Ok((vc, seed))
    }

    /// Publishes `doc` in today's revocation table and records it for
    /// re-insertion on every later day the credential is valid.
    pub fn revoke(
        &mut self,
        vc_id: &VcId,
        doc: RevocationDocument,
        day: DayIndex,
    ) -> Result<(), IssuerError> {
        if day != self.current_day {
            return Err(IssuerError::DayMismatch { expected: self.current_day, actual: day });
        }
        if doc.vc_id != *vc_id {
            return Err(IssuerError::CredentialMismatch { expected: *vc_id, actual: doc.vc_id });
        }
        let record = self.registry.get(vc_id).ok_or(IssuerError::UnknownCredential(*vc_id))?;
        if !record.active_on(day) {
            return Err(IssuerError::NotActive { vc_id: *vc_id, day });
        }
        if let Some(last) = record.revocations.last() {
            if doc.sequence <= last.document.sequence {
                return Err(IssuerError::SequenceNotIncreasing {
                    last: last.document.sequence,
                    actual: doc.sequence,
                });
            }
        }
        let (index, entry) = self.seal_for_day(vc_id, record, &doc, day)?;
        self.current.revocation.push(index, entry)?;
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        self.registry.get_mut(vc_id).expect("checked above").revocations.push(PublishedRevocation {
            ordinal,
            published_day: day,
            document: doc,
        });
        Ok(())
    }

    /// Advances to `new_day`, processing every intermediate day in order:
    /// archive the current tables, then rebuild both for the next day.
    pub fn rollover(&mut self, new_day: DayIndex) -> Result<(), IssuerError> {
        if new_day <= self.current_day {
            return Err(IssuerError::Params(format!(
                "rollover to day {new_day} does not advance past day {}",
                self.current_day
            )));
        }
        while self.current_day < new_day {
            let next = self.current_day.next();
            let rebuilt = self.rebuild_day(next)?;
            let previous = std::mem::replace(&mut self.current, rebuilt);
            self.archive.insert(self.current_day, previous);
            self.current_day = next;
            self.prune_archive();
        }
        Ok(())
    }

    pub fn export_day(&self) -> (CheckTableSnapshot, RevocationTableSnapshot) {
        (self.current.check.clone(), self.current.revocation.clone())
    }

    /// Tables for `day`, from the live day or the archive.
    pub fn published(&self, day: DayIndex) -> Option<&PublishedDay> {
        if day == self.current_day {
            Some(&self.current)
        } else {
            self.archive.get(&day)
        }
    }

    pub fn archived_days(&self) -> impl Iterator<Item = DayIndex> + '_ {
        self.archive.keys().copied()
    }

    /// Recomputes both tables for `day` from the registry alone.
    pub fn rebuild_day(&self, day: DayIndex) -> Result<PublishedDay, IssuerError> {
        let active = || self.registry.iter().filter(move |(_, r)| r.active_on(day));
        let check = build_check_table(
            active().filter_map(|(id, r)| r.digest_on(id, day)),
            self.params,
            day,
        );
        let mut docs: Vec<_> = active()
            .flat_map(|(id, r)| {
                r.revocations
                    .iter()
                    .filter(|p| p.published_day <= day)
                    .map(move |p| (p.ordinal, id, r, &p.document))
            })
            .collect();
        docs.sort_by_key(|(ordinal, ..)| *ordinal);
        let mut revocation = RevocationTableSnapshot::empty(self.params, day);
        for (_, id, record, doc) in docs {
            let (index, entry) = self.seal_for_day(id, record, doc, day)?;
            revocation.push(index, entry)?;
        }
        Ok(PublishedDay { check, revocation })
    }

    /// Index and entry for one document on one day. Encryption randomness is
    /// derived from the Issuer's entropy key and `(vc_id, day, sequence)`,
    /// which never repeats.
    fn seal_for_day(
        &self,
        vc_id: &VcId,
        record: &RegistryRecord,
        doc: &RevocationDocument,
        day: DayIndex,
    ) -> Result<(crate::crypto::BucketIndex, RevocationEntry), IssuerError> {
        let digest = record.digest_on(vc_id, day).ok_or(IssuerError::NotActive { vc_id: *vc_id, day })?;
        let index = locate_revocation(&self.mpp, &record.root, day, &digest, self.params.d())?;
        let mut info = ENTRY_RANDOMNESS_CONTEXT.to_vec();
        info.extend_from_slice(vc_id.as_bytes());
        info.extend_from_slice(&day.0.to_be_bytes());
        info.extend_from_slice(&doc.sequence.to_be_bytes());
        let mut rng = ChaCha20Rng::from_seed(kdf32(self.entropy.as_bytes(), &info));
        let entry = seal_revocation(&self.mpp, &record.root, day, doc, &mut rng)?;
        Ok((index, entry))
    }

    fn prune_archive(&mut self) {
        let oldest = self.current_day.0.saturating_sub(self.retention_days);
        self.archive.retain(|day, _| day.0 >= oldest);
    }

    /// Registry and keys in canonical encoding. Tables are not included;
    /// they are rebuilt on load.
    pub fn to_state_bytes(&self) -> Vec<u8> {
        canonical_encode(&StateFile {
            version: STATE_VERSION.into(),
            issuer_id: self.issuer_id.clone(),
            signing_key: self.signing_key.clone(),
            entropy: self.entropy.clone(),
            params: self.params,
            mpp: self.mpp.clone(),
            current_day: self.current_day,
            retention_days: self.retention_days,
            next_ordinal: self.next_ordinal,
            registry: self.registry.clone(),
        })
        .expect("issuer state encodes")
    }

    pub fn from_state_bytes(bytes: &[u8]) -> Result<Self, IssuerError> {
        let file: StateFile = canonical_decode(bytes)?;
        if file.version != STATE_VERSION {
            return Err(IssuerError::Params(format!("unsupported state version {}", file.version)));
        }
        let mut state = IssuerState {
            issuer_id: file.issuer_id,
            signing_key: file.signing_key,
            entropy: file.entropy,
            params: file.params,
            mpp: file.mpp,
            current_day: file.current_day,
            retention_days: file.retention_days,
            registry: file.registry,
            next_ordinal: file.next_ordinal,
            current: PublishedDay {
                check: build_check_table([], file.params, file.current_day),
                revocation: RevocationTableSnapshot::empty(file.params, file.current_day),
            },
            archive: BTreeMap::new(),
        };
        state.current = state.rebuild_day(state.current_day)?;
        Ok(state)
    }
}

fn insert_digest(table: &mut CheckTableSnapshot, digest: CheckDigest) {
    let bucket = &mut table.buckets[check_bucket(&digest, table.params.c()).as_usize()];
    if let Err(pos) = bucket.binary_search(&digest) {
        bucket.insert(pos, digest);
    }
}
