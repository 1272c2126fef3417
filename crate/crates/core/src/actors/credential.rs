use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ahibe::DayKey;
use crate::crypto::{DayIndex, DayToken, PublicKey, Signature, SigningKey, VcId};
use crate::encoding::{b64, canonical_encode};

pub const NONCE_LEN: usize = 16;

/// Verifier challenge bound into the proof of possession.
pub type Nonce = [u8; NONCE_LEN];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiableCredential {
    pub vc_id: VcId,
    /// Pseudonymous AHIBE root identity of the holder.
    pub root: String,
    pub issued_day: DayIndex,
    pub expiry_day: DayIndex,
    pub claims: BTreeMap<String, String>,
    pub pop_public_key: PublicKey,
    pub issuer_id: String,
    pub issuer_signature: Signature,
}

#[derive(Serialize)]
struct CredentialBody<'a> {
    vc_id: &'a VcId,
    root: &'a str,
    issued_day: DayIndex,
    expiry_day: DayIndex,
    claims: &'a BTreeMap<String, String>,
    pop_public_key: &'a PublicKey,
    issuer_id: &'a str,
}

#[allow(clippy::too_many_arguments)]
impl VerifiableCredential {
    pub(crate) fn sign(
        vc_id: VcId,
        root: String,
        issued_day: DayIndex,
        expiry_day: DayIndex,
        claims: BTreeMap<String, String>,
        pop_public_key: PublicKey,
        issuer_id: String,
        key: &SigningKey,
    ) -> Self {
        let body = CredentialBody {
            vc_id: &vc_id,
            root: &root,
            issued_day,
            expiry_day,
            claims: &claims,
            pop_public_key: &pop_public_key,
            issuer_id: &issuer_id,
        };
        let issuer_signature = key.sign(&canonical_encode(&body).expect("credential encodes"));
        VerifiableCredential {
            vc_id,
            root,
            issued_day,
            expiry_day,
            claims,
            pop_public_key,
            issuer_id,
            issuer_signature,
        }
    }

    /// Canonical bytes of every field except the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        canonical_encode(&CredentialBody {
            vc_id: &self.vc_id,
            root: &self.root,
            issued_day: self.issued_day,
            expiry_day: self.expiry_day,
            claims: &self.claims,
            pop_public_key: &self.pop_public_key,
            issuer_id: &self.issuer_id,
        })
        .expect("credential encodes")
    }

    pub fn verify_issuer(&self, key: &PublicKey) -> bool {
        self.issued_day <= self.expiry_day && key.verify(&self.signing_bytes(), &self.issuer_signature)
    }

    pub fn valid_on(&self, day: DayIndex) -> bool {
        self.issued_day <= day && day <= self.expiry_day
    }
}

/// Grants a Verifier revocation visibility for exactly one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalAuthorization {
    pub day: DayIndex,
    pub day_token: DayToken,
    pub day_key: DayKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub credential: VerifiableCredential,
    #[serde(with = "b64::array")]
    pub nonce: Nonce,
    pub pop_signature: Signature,
    pub authorizations: Vec<TemporalAuthorization>,
}

pub fn pop_message(vc_id: &VcId, nonce: &Nonce) -> Vec<u8> {
    canonical_encode(&json!({ "nonce": b64::encode(nonce), "vc_id": vc_id.to_string() }))
        .expect("fixed shape encodes")
}

impl Presentation {
    pub fn verify_pop(&self) -> bool {
        self.credential
            .pop_public_key
            .verify(&pop_message(&self.credential.vc_id, &self.nonce), &self.pop_signature)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("presentation encodes")
    }
}

/// Issuer id to signature key, standing in for a PKI.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustStore {
    issuers: BTreeMap<String, PublicKey>,
}

impl TrustStore {
    pub fn new() -> Self {
        TrustStore::default()
    }

    pub fn insert(&mut self, issuer_id: impl Into<String>, key: PublicKey) {
        self.issuers.insert(issuer_id.into(), key);
    }

    pub fn get(&self, issuer_id: &str) -> Option<&PublicKey> {
        self.issuers.get(issuer_id)
    }

    /// True when the credential's issuer is trusted and its signature holds.
    pub fn verify_credential(&self, vc: &VerifiableCredential) -> bool {
        self.get(&vc.issuer_id).is_some_and(|key| vc.verify_issuer(key))
    }
}
