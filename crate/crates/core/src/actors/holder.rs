use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{pop_message, Nonce, Presentation, TemporalAuthorization, TrustStore, VerifiableCredential};
use crate::ahibe::{HolderKey, MasterPublicParams};
use crate::crypto::{compute_check_digest, derive_day_token, DayIndex, DayToken, Seed, SigningKey, VcId};
use crate::encoding::{canonical_decode, canonical_encode, EncodingError};
use crate::tables::{locate_revocation, RevocationDocument, RevocationTableSnapshot, TableError};

#[derive(Debug, thiserror::Error)]
pub enum HolderError {
    #[error("issuer {0} is not in the trust store")]
    UntrustedIssuer(String),
    #[error("issuer signature does not verify")]
    BadSignature,
    #[error("credential root {credential} does not match holder key root {key}")]
    RootMismatch { credential: String, key: String },
    #[error("proof-of-possession key does not match the credential")]
    PopKeyMismatch,
    #[error("unknown credential {0}")]
    UnknownCredential(VcId),
    #[error("day {day} is outside the credential validity [{issued}, {expiry}]")]
    DayOutOfValidity { day: DayIndex, issued: DayIndex, expiry: DayIndex },
    #[error("a presentation needs at least one day")]
    NoDays,
    #[error("snapshot is for day {actual}, expected {expected}")]
    SnapshotDay { expected: DayIndex, actual: DayIndex },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("wallet file: {0}")]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletRecord {
    pub credential: VerifiableCredential,
    pub seed: Seed,
    pub pop_signing_key: SigningKey,
    pub holder_key: HolderKey,
}

impl WalletRecord {
    /// `None` outside the credential validity window.
    pub fn day_token(&self, day: DayIndex) -> Option<DayToken> {
        if !self.credential.valid_on(day) {
            return None;
        }
        let k = day.life_day_since(self.credential.issued_day)?;
        Some(derive_day_token(&self.seed, k))
    }
}

/// The holder's credential store. Seeds stay here; only day tokens leave.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wallet {
    records: BTreeMap<VcId, WalletRecord>,
}

impl Wallet {
    pub fn new() -> Self {
        Wallet::default()
    }

    pub fn store(
        &mut self,
        trust: &TrustStore,
        credential: VerifiableCredential,
        seed: Seed,
        holder_key: HolderKey,
        pop_signing_key: SigningKey,
    ) -> Result<&WalletRecord, HolderError> {
        let issuer_key = trust
            .get(&credential.issuer_id)
            .ok_or_else(|| HolderError::UntrustedIssuer(credential.issuer_id.clone()))?;
        if !credential.verify_issuer(issuer_key) {
            return Err(HolderError::BadSignature);
        }
        if holder_key.root() != credential.root {
            return Err(HolderError::RootMismatch {
                credential: credential.root.clone(),
                key: holder_key.root().to_string(),
            });
        }
        if pop_signing_key.public_key() != credential.pop_public_key {
            return Err(HolderError::PopKeyMismatch);
        }
        let vc_id = credential.vc_id;
        self.records.insert(vc_id, WalletRecord { credential, seed, pop_signing_key, holder_key });
        Ok(&self.records[&vc_id])
    }

    pub fn get(&self, vc_id: &VcId) -> Option<&WalletRecord> {
        self.records.get(vc_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &WalletRecord> {
        self.records.values()
    }

    fn record(&self, vc_id: &VcId) -> Result<&WalletRecord, HolderError> {
        self.records.get(vc_id).ok_or(HolderError::UnknownCredential(*vc_id))
    }

    /// One authorization per requested day, which may lie in the past or the
    /// future as long as the credential is valid on it.
    pub fn present<R: RngCore + CryptoRng>(
        &self,
        vc_id: &VcId,
        days: &[DayIndex],
        nonce: Nonce,
        rng: &mut R,
    ) -> Result<Presentation, HolderError> {
        let record = self.record(vc_id)?;
        if days.is_empty() {
            return Err(HolderError::NoDays);
        }
        let authorizations = days
            .iter()
            .map(|&day| {
                let day_token = record.day_token(day).ok_or(HolderError::DayOutOfValidity {
                    day,
                    issued: record.credential.issued_day,
                    expiry: record.credential.expiry_day,
                })?;
                Ok(TemporalAuthorization { day, day_token, day_key: record.holder_key.delegate(day, rng) })
            })
            .collect::<Result<Vec<_>, HolderError>>()?;
        Ok(Presentation {
            credential: record.credential.clone(),
            nonce,
            pop_signature: record.pop_signing_key.sign(&pop_message(vc_id, &nonce)),
            authorizations,
        })
    }

    /// Looks up the holder's own slot in a published revocation table.
    pub fn audit<R: RngCore + CryptoRng>(
        &self,
        mpp: &MasterPublicParams,
        vc_id: &VcId,
        day: DayIndex,
        snapshot: &RevocationTableSnapshot,
        rng: &mut R,
    ) -> Result<Vec<RevocationDocument>, HolderError> {
        if snapshot.day() != day {
            return Err(HolderError::SnapshotDay { expected: day, actual: snapshot.day() });
        }
        let record = self.record(vc_id)?;
        let token = record.day_token(day).ok_or(HolderError::DayOutOfValidity {
            day,
            issued: record.credential.issued_day,
            expiry: record.credential.expiry_day,
        })?;
        let digest = compute_check_digest(&token, vc_id);
        let root = &record.credential.root;
        let index = locate_revocation(mpp, root, day, &digest, snapshot.params().d())?;
        let dk = record.holder_key.delegate(day, rng);
        Ok(snapshot.scan_bucket(index, &dk, root, day, vc_id)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("wallet encodes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HolderError> {
        Ok(canonical_decode(bytes)?)
    }
}
