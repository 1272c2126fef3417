//! Deterministic primitives shared by every role: day tokens, check digests,
//! bucket derivation, the AEAD envelope and signatures.

use std::fmt;
use std::str::FromStr;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use ed25519_dalek::{Signer, Verifier};
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::b64;

pub const DAY_TOKEN_CONTEXT: &[u8] = b"revoca/day-token/v1";
pub const AEAD_NONCE_LEN: usize = 12;
pub const AEAD_TAG_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    /// Wrong key or wrong associated data.
    #[error("authentication failure")]
    AuthFailure,
    #[error("malformed public key")]
    MalformedKey,
    #[error("malformed signature")]
    MalformedSignature,
}

/// Per-credential PRNG seed shared by the Issuer and the legitimate Holder.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(#[serde(with = "b64::array")] [u8; 32]);

impl Seed {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Seed(bytes)
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Seed(..)")
    }
}

/// Number of granularity units (days by default) since the protocol epoch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DayIndex(pub u64);

impl DayIndex {
    pub fn next(self) -> DayIndex {
        DayIndex(self.0 + 1)
    }

    /// Life day of a credential issued on `issued` when presented on `self`.
    pub fn life_day_since(self, issued: DayIndex) -> Option<LifeDay> {
        self.0.checked_sub(issued.0).map(LifeDay)
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Offset of a day from the credential's issuance day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LifeDay(pub u64);

/// Maps wall-clock time onto [`DayIndex`] values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub epoch_unix: u64,
    pub granularity_seconds: u64,
}

impl Default for Clock {
    fn default() -> Self {
        Clock { epoch_unix: 0, granularity_seconds: 86_400 }
    }
}

impl Clock {
    pub fn day_at(&self, unix_seconds: u64) -> DayIndex {
        DayIndex(unix_seconds.saturating_sub(self.epoch_unix) / self.granularity_seconds.max(1))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DayToken(#[serde(with = "b64::array")] [u8; 32]);

impl DayToken {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        DayToken(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for DayToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DayToken({}..)", hex::encode(&self.0[..4]))
    }
}

/// 16-byte credential identifier, lowercase hex on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VcId([u8; 16]);

impl VcId {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        VcId(bytes)
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        VcId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for VcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for VcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VcId({self})")
    }
}

impl FromStr for VcId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(format!("vc id must be 32 lowercase hex digits: {s:?}"));
        }
        let mut bytes = [0u8; 16];
        hex::decode_to_slice(s, &mut bytes).map_err(|e| e.to_string())?;
        Ok(VcId(bytes))
    }
}

impl Serialize for VcId {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for VcId {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let text = String::deserialize(de)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Full-width HMAC-SHA-256 of a credential id under a day token.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CheckDigest(#[serde(with = "b64::array")] [u8; 32]);

impl CheckDigest {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        CheckDigest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for CheckDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CheckDigest({}..)", hex::encode(&self.0[..6]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BucketIndex(pub u64);

impl BucketIndex {
    pub fn as_usize(self) -> usize {
        self.0 as usize
    }
}

/// `PRNG_k(seed)`: HKDF-SHA-256 in counter mode over the life day. Each day's
/// token depends only on the seed and `k`, never on another day's token.
pub fn derive_day_token(seed: &Seed, k: LifeDay) -> DayToken {
    let mut info = Vec::with_capacity(DAY_TOKEN_CONTEXT.len() + 8);
    info.extend_from_slice(DAY_TOKEN_CONTEXT);
    info.extend_from_slice(&k.0.to_be_bytes());
    DayToken(kdf32(seed.as_bytes(), &info))
}

pub fn compute_check_digest(token: &DayToken, vc_id: &VcId) -> CheckDigest {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(token.as_bytes())
        .expect("HMAC accepts keys of any length");
    mac.update(vc_id.as_bytes());
    CheckDigest(mac.finalize().into_bytes().into())
}

/// Check-table bucket: first eight digest bytes, big-endian, mod `c`.
pub fn check_bucket(digest: &CheckDigest, c: u64) -> BucketIndex {
    assert!(c >= 1, "bucket count must be positive");
    let head = u64::from_be_bytes(digest.0[..8].try_into().unwrap());
    BucketIndex(head % c)
}

/// Revocation-table index: first sixteen bytes of SHA-256(ct), big-endian,
/// mod `d`.
pub fn index_from_ciphertext(ct: &[u8], d: u64) -> BucketIndex {
    assert!(d >= 1, "table size must be positive");
    let hash = Sha256::digest(ct);
    let head = u128::from_be_bytes(hash[..16].try_into().unwrap());
    BucketIndex((head % d as u128) as u64)
}

/// HKDF-SHA-256 with an empty salt, 32-byte output.
pub(crate) fn kdf32(ikm: &[u8], info: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    Hkdf::<Sha256>::new(None, ikm)
        .expand(info, &mut out)
        .expect("32 bytes is within HKDF output bounds");
    out
}

/// Symmetric key produced by key encapsulation.
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey([u8; 32]);

impl SymmetricKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SymmetricKey(bytes)
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        SymmetricKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

/// ChaCha20-Poly1305 with a random nonce. Output is `nonce ‖ body ‖ tag`.
pub fn seal<R: RngCore + CryptoRng>(
    key: &SymmetricKey,
    plaintext: &[u8],
    associated_data: &[u8],
    rng: &mut R,
) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new(key.as_bytes().into());
    let mut nonce = [0u8; AEAD_NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let body = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad: associated_data })
        .expect("in-memory encryption does not fail");
    let mut out = Vec::with_capacity(AEAD_NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out
}

pub fn open(
    sealed: &[u8],
    key: &SymmetricKey,
    associated_data: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < AEAD_NONCE_LEN + AEAD_TAG_LEN {
        return Err(CryptoError::AuthFailure);
    }
    let (nonce, body) = sealed.split_at(AEAD_NONCE_LEN);
    ChaCha20Poly1305::new(key.as_bytes().into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: body, aad: associated_data })
        .map_err(|_| CryptoError::AuthFailure)
}

/// Ed25519 signing key.
#[derive(Clone, PartialEq, Eq)]
pub struct SigningKey(ed25519_dalek::SigningKey);

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(ed25519_dalek::VerifyingKey);

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(ed25519_dalek::Signature);

impl SigningKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigningKey(ed25519_dalek::SigningKey::generate(rng))
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SigningKey(ed25519_dalek::SigningKey::from_bytes(&bytes))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.0.sign(message))
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bytes: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::MalformedKey)?;
        ed25519_dalek::VerifyingKey::from_bytes(&bytes)
            .map(PublicKey)
            .map_err(|_| CryptoError::MalformedKey)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        self.0.verify(message, &signature.0).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", b64::encode(&self.to_bytes()))
    }
}

impl Signature {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bytes: [u8; 64] = bytes.try_into().map_err(|_| CryptoError::MalformedSignature)?;
        Ok(Signature(ed25519_dalek::Signature::from_bytes(&bytes)))
    }

    pub fn to_bytes(&self) -> [u8; 64] {
        self.0.to_bytes()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.to_bytes()[..6]))
    }
}

macro_rules! b64_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&b64::encode(&self.to_bytes()))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let text = String::deserialize(de)?;
                let bytes = b64::decode(&text).map_err(serde::de::Error::custom)?;
                <$ty>::from_bytes(&bytes).map_err(serde::de::Error::custom)
            }
        }
    };
}

b64_serde!(PublicKey);
b64_serde!(Signature);

impl Serialize for SigningKey {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&b64::encode(&self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for SigningKey {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let text = String::deserialize(de)?;
        let bytes = b64::decode(&text).map_err(serde::de::Error::custom)?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("signing key must be 32 bytes"))?;
        Ok(SigningKey::from_bytes(bytes))
    }
}
