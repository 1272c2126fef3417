//! Two-level anonymous hierarchical identity-based key encapsulation.
//!
//! Identities are paths `root` (level 1, a holder) and `root/day:T` (level 2,
//! the holder's identity for one day). A [`HolderKey`] delegates [`DayKey`]s;
//! a `DayKey` cannot delegate further. Headers carry no identity material.
//!
//! Two instantiations sit behind the same surface:
//!
//! * `transparent-v1` is a TEST-ONLY scheme. Its "public" parameters embed
//!   the master secret, so anyone holding them can derive every key. It exists
//!   to exercise the protocol quickly.
//! * `bw-ahibe-bls12381-v1` is an anonymous HIBE with linear splitting in
//!   the Boyen–Waters style over BLS12-381, used as a KEM by hashing the
//!   recovered target-group element.
//!
//! Every serialized object is a tagged string `scheme_id.part.part...` where
//! each part is unpadded base64url.

mod pairing;
mod transparent;

use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{self, DayIndex, SymmetricKey};
use crate::encoding::b64;

pub const TRANSPARENT_SCHEME: &str = "transparent-v1";
pub const PAIRING_SCHEME: &str = "bw-ahibe-bls12381-v1";
pub const LEVEL_BOUND: u8 = 2;
pub const MAX_ROOT_LEN: usize = 256;
pub const DET_ENCAP_CONTEXT: &[u8] = b"revoca/det-encap/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AhibeError {
    #[error("invalid identity: {0}")]
    Identity(String),
    #[error("operation requires a level-{expected} identity, got level {actual}")]
    Level { expected: u8, actual: u8 },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("scheme mismatch: expected {expected}, got {actual}")]
    SchemeMismatch { expected: String, actual: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecurityLevel {
    /// Transparent, insecure scheme for fast tests.
    Test,
    /// Pairing-based public-key scheme.
    Standard,
}

/// `root` or `root/day:T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdentityPath {
    root: String,
    day: Option<DayIndex>,
}

impl IdentityPath {
    pub fn root(root: &str) -> Result<Self, AhibeError> {
        validate_root(root)?;
        Ok(IdentityPath { root: root.to_owned(), day: None })
    }

    pub fn day(root: &str, day: DayIndex) -> Result<Self, AhibeError> {
        validate_root(root)?;
        Ok(IdentityPath { root: root.to_owned(), day: Some(day) })
    }

    pub fn root_name(&self) -> &str {
        &self.root
    }

    pub fn day_index(&self) -> Option<DayIndex> {
        self.day
    }

    pub fn level(&self) -> u8 {
        if self.day.is_some() {
            2
        } else {
            1
        }
    }

    /// `root` or `root/day:<decimal>`.
    pub fn canonical_text(&self) -> String {
        match self.day {
            None => self.root.clone(),
            Some(day) => format!("{}/day:{}", self.root, day.0),
        }
    }

    fn require_day(&self) -> Result<DayIndex, AhibeError> {
        self.day.ok_or(AhibeError::Level { expected: 2, actual: self.level() })
    }
}

impl fmt::Display for IdentityPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

// '/' is reserved as the path separator so canonical texts stay unambiguous.
fn validate_root(root: &str) -> Result<(), AhibeError> {
    if root.is_empty() {
        return Err(AhibeError::Identity("root must not be empty".into()));
    }
    if root.len() > MAX_ROOT_LEN {
        return Err(AhibeError::Identity(format!("root longer than {MAX_ROOT_LEN} bytes")));
    }
    if root.contains('/') {
        return Err(AhibeError::Identity("root must not contain '/'".into()));
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq)]
enum PublicInner {
    Transparent(transparent::Params),
    Pairing(Box<pairing::PublicParams>),
}

#[derive(Clone, PartialEq, Eq)]
pub struct MasterPublicParams(PublicInner);

#[derive(Clone, PartialEq, Eq)]
enum SecretInner {
    Transparent(transparent::Params),
    Pairing(Box<pairing::MasterSecret>),
}

#[derive(Clone, PartialEq, Eq)]
pub struct MasterSecret(SecretInner);

#[derive(Clone, PartialEq, Eq)]
enum HolderInner {
    Transparent(transparent::HolderKey),
    Pairing(Box<pairing::HolderKey>),
}

/// Level-1 key: decapsulates nothing itself, delegates any day.
#[derive(Clone, PartialEq, Eq)]
pub struct HolderKey {
    root: String,
    inner: HolderInner,
}

#[derive(Clone, PartialEq, Eq)]
enum DayInner {
    Transparent(transparent::DayKey),
    Pairing(Box<pairing::DayKey>),
}

/// Level-2 key for one `(root, day)`. Exposes no delegation.
#[derive(Clone, PartialEq, Eq)]
pub struct DayKey {
    identity: IdentityPath,
    inner: DayInner,
}

/// Encapsulation header. Kept as opaque bytes and parsed only on decap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EncapHeader {
    scheme_id: String,
    body: Vec<u8>,
}

pub fn setup<R: RngCore + CryptoRng>(
    level: SecurityLevel,
    rng: &mut R,
) -> (MasterPublicParams, MasterSecret) {
    match level {
        SecurityLevel::Test => {
            let params = transparent::Params::generate(rng);
            (
                MasterPublicParams(PublicInner::Transparent(params.clone())),
                MasterSecret(SecretInner::Transparent(params)),
            )
        }
        SecurityLevel::Standard => {
            let (public, secret) = pairing::setup(rng);
            (
                MasterPublicParams(PublicInner::Pairing(Box::new(public))),
                MasterSecret(SecretInner::Pairing(Box::new(secret))),
            )
        }
    }
}

pub fn extract<R: RngCore + CryptoRng>(
    msk: &MasterSecret,
    root: &str,
    rng: &mut R,
) -> Result<HolderKey, AhibeError> {
    let id = IdentityPath::root(root)?;
    let inner = match &msk.0 {
        SecretInner::Transparent(params) => HolderInner::Transparent(params.extract(root)),
        SecretInner::Pairing(secret) => {
            HolderInner::Pairing(Box::new(secret.extract(id.root_name(), rng)))
        }
    };
    Ok(HolderKey { root: id.root, inner })
}

pub fn delegate<R: RngCore + CryptoRng>(hk: &HolderKey, day: DayIndex, rng: &mut R) -> DayKey {
    hk.delegate(day, rng)
}

impl HolderKey {
    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn identity(&self) -> IdentityPath {
        IdentityPath { root: self.root.clone(), day: None }
    }

    pub fn scheme_id(&self) -> &'static str {
        match self.inner {
            HolderInner::Transparent(_) => TRANSPARENT_SCHEME,
            HolderInner::Pairing(_) => PAIRING_SCHEME,
        }
    }

    pub fn delegate<R: RngCore + CryptoRng>(&self, day: DayIndex, rng: &mut R) -> DayKey {
        let inner = match &self.inner {
            HolderInner::Transparent(key) => DayInner::Transparent(key.delegate(day)),
            HolderInner::Pairing(key) => DayInner::Pairing(Box::new(key.delegate(day, rng))),
        };
        DayKey { identity: IdentityPath { root: self.root.clone(), day: Some(day) }, inner }
    }
}

impl DayKey {
    pub fn identity(&self) -> &IdentityPath {
        &self.identity
    }

    pub fn scheme_id(&self) -> &'static str {
        match self.inner {
            DayInner::Transparent(_) => TRANSPARENT_SCHEME,
            DayInner::Pairing(_) => PAIRING_SCHEME,
        }
    }
}

impl MasterPublicParams {
    pub fn scheme_id(&self) -> &'static str {
        match self.0 {
            PublicInner::Transparent(_) => TRANSPARENT_SCHEME,
            PublicInner::Pairing(_) => PAIRING_SCHEME,
        }
    }

    pub fn level_bound(&self) -> u8 {
        LEVEL_BOUND
    }
}

impl MasterSecret {
    pub fn scheme_id(&self) -> &'static str {
        match self.0 {
            SecretInner::Transparent(_) => TRANSPARENT_SCHEME,
            SecretInner::Pairing(_) => PAIRING_SCHEME,
        }
    }
}

impl EncapHeader {
    pub fn scheme_id(&self) -> &str {
        &self.scheme_id
    }

    /// Bytes fed to index derivation.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.to_text().into_bytes()
    }
}

/// Randomized encapsulation to a level-2 identity.
pub fn encap<R: RngCore + CryptoRng>(
    mpp: &MasterPublicParams,
    id: &IdentityPath,
    rng: &mut R,
) -> Result<(EncapHeader, SymmetricKey), AhibeError> {
    let day = id.require_day()?;
    Ok(encap_with(mpp, id.root_name(), day, rng))
}

/// Encapsulation whose randomness is derived from `(id, binding)`, so that
/// any two parties knowing both compute the same header.
pub fn det_encap(
    mpp: &MasterPublicParams,
    id: &IdentityPath,
    binding: &[u8],
) -> Result<(EncapHeader, SymmetricKey), AhibeError> {
    let day = id.require_day()?;
    if binding.is_empty() {
        return Err(AhibeError::Decode("binding must not be empty".into()));
    }
    let text = id.canonical_text();
    let mut ikm = Vec::with_capacity(8 + text.len() + binding.len());
    ikm.extend_from_slice(&(text.len() as u64).to_be_bytes());
    ikm.extend_from_slice(text.as_bytes());
    ikm.extend_from_slice(binding);
    let mut rng = ChaCha20Rng::from_seed(crypto::kdf32(&ikm, DET_ENCAP_CONTEXT));
    Ok(encap_with(mpp, id.root_name(), day, &mut rng))
}

fn encap_with<R: RngCore + CryptoRng>(
    mpp: &MasterPublicParams,
    root: &str,
    day: DayIndex,
    rng: &mut R,
) -> (EncapHeader, SymmetricKey) {
    match &mpp.0 {
        PublicInner::Transparent(params) => {
            let (body, key) = params.encap(root, day, rng);
            (EncapHeader { scheme_id: TRANSPARENT_SCHEME.into(), body }, key)
        }
        PublicInner::Pairing(params) => {
            let (body, key) = params.encap(root, day, rng);
            (EncapHeader { scheme_id: PAIRING_SCHEME.into(), body }, key)
        }
    }
}

/// Recovers the encapsulated key. A mismatched identity yields an unrelated
/// key; callers detect that through AEAD authentication.
pub fn decap(dk: &DayKey, header: &EncapHeader) -> Result<SymmetricKey, AhibeError> {
    if header.scheme_id != dk.scheme_id() {
        return Err(AhibeError::SchemeMismatch {
            expected: dk.scheme_id().into(),
            actual: header.scheme_id.clone(),
        });
    }
    match &dk.inner {
        DayInner::Transparent(key) => key.decap(&header.body),
        DayInner::Pairing(key) => key.decap(&header.body),
    }
}

/// Checks that `dk` really is the key for `id` by sealing a random probe
/// under a fresh encapsulation and opening it with `dk`.
pub fn probe_key<R: RngCore + CryptoRng>(
    mpp: &MasterPublicParams,
    id: &IdentityPath,
    dk: &DayKey,
    rng: &mut R,
) -> bool {
    let Ok((header, key)) = encap(mpp, id, rng) else {
        return false;
    };
    let mut probe = [0u8; 32];
    rng.fill_bytes(&mut probe);
    let sealed = crypto::seal(&key, &probe, b"revoca/probe/v1", rng);
    match decap(dk, &header) {
        Ok(recovered) => crypto::open(&sealed, &recovered, b"revoca/probe/v1")
            .map(|pt| pt == probe)
            .unwrap_or(false),
        Err(_) => false,
    }
}

// ---- tagged text form -------------------------------------------------------

fn join(scheme: &str, parts: &[&[u8]]) -> String {
    let mut out = String::from(scheme);
    for part in parts {
        out.push('.');
        out.push_str(&b64::encode(part));
    }
    out
}

fn split(text: &str) -> Result<(&str, Vec<Vec<u8>>), AhibeError> {
    let mut pieces = text.split('.');
    let scheme = pieces.next().filter(|s| !s.is_empty()).ok_or_else(|| {
        AhibeError::Decode("missing scheme id".into())
    })?;
    let parts = pieces
        .map(|p| b64::decode(p).map_err(|e| AhibeError::Decode(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scheme, parts))
}

fn expect_parts(parts: &[Vec<u8>], n: usize) -> Result<(), AhibeError> {
    if parts.len() != n {
        return Err(AhibeError::Decode(format!("expected {n} parts, got {}", parts.len())));
    }
    Ok(())
}

fn unknown_scheme(scheme: &str) -> AhibeError {
    AhibeError::Decode(format!("unknown scheme id {scheme:?}"))
}

fn decode_root(bytes: &[u8]) -> Result<String, AhibeError> {
    let root = String::from_utf8(bytes.to_vec()).map_err(|e| AhibeError::Decode(e.to_string()))?;
    validate_root(&root)?;
    Ok(root)
}

fn decode_day(bytes: &[u8]) -> Result<DayIndex, AhibeError> {
    let bytes: [u8; 8] =
        bytes.try_into().map_err(|_| AhibeError::Decode("day must be 8 bytes".into()))?;
    Ok(DayIndex(u64::from_be_bytes(bytes)))
}

impl MasterPublicParams {
    pub fn to_text(&self) -> String {
        match &self.0 {
            PublicInner::Transparent(p) => join(TRANSPARENT_SCHEME, &[p.as_bytes()]),
            PublicInner::Pairing(p) => join(PAIRING_SCHEME, &[&p.to_bytes()]),
        }
    }

    pub fn from_text(text: &str) -> Result<Self, AhibeError> {
        let (scheme, parts) = split(text)?;
        expect_parts(&parts, 1)?;
        match scheme {
            TRANSPARENT_SCHEME => {
                Ok(MasterPublicParams(PublicInner::Transparent(transparent::Params::from_bytes(
                    &parts[0],
                )?)))
            }
            PAIRING_SCHEME => Ok(MasterPublicParams(PublicInner::Pairing(Box::new(
                pairing::PublicParams::from_bytes(&parts[0])?,
            )))),
            other => Err(unknown_scheme(other)),
        }
    }
}

impl MasterSecret {
    pub fn to_text(&self) -> String {
        match &self.0 {
            SecretInner::Transparent(p) => join(TRANSPARENT_SCHEME, &[p.as_bytes()]),
            SecretInner::Pairing(s) => join(PAIRING_SCHEME, &[&s.to_bytes()]),
        }
    }

    pub fn from_text(text: &str) -> Result<Self, AhibeError> {
        let (scheme, parts) = split(text)?;
        expect_parts(&parts, 1)?;
        match scheme {
            TRANSPARENT_SCHEME => Ok(MasterSecret(SecretInner::Transparent(
                transparent::Params::from_bytes(&parts[0])?,
            ))),
            PAIRING_SCHEME => Ok(MasterSecret(SecretInner::Pairing(Box::new(
                pairing::MasterSecret::from_bytes(&parts[0])?,
            )))),
            other => Err(unknown_scheme(other)),
        }
    }
}

impl HolderKey {
    pub fn to_text(&self) -> String {
        match &self.inner {
            HolderInner::Transparent(k) => {
                join(TRANSPARENT_SCHEME, &[self.root.as_bytes(), k.as_bytes()])
            }
            HolderInner::Pairing(k) => join(PAIRING_SCHEME, &[self.root.as_bytes(), &k.to_bytes()]),
        }
    }

    pub fn from_text(text: &str) -> Result<Self, AhibeError> {
        let (scheme, parts) = split(text)?;
        expect_parts(&parts, 2)?;
        let root = decode_root(&parts[0])?;
        let inner = match scheme {
            TRANSPARENT_SCHEME => {
                HolderInner::Transparent(transparent::HolderKey::from_bytes(&parts[1])?)
            }
            PAIRING_SCHEME => {
                HolderInner::Pairing(Box::new(pairing::HolderKey::from_bytes(&parts[1])?))
            }
            other => return Err(unknown_scheme(other)),
        };
        Ok(HolderKey { root, inner })
    }
}

impl DayKey {
    pub fn to_text(&self) -> String {
        let root = self.identity.root.as_bytes();
        let day = self.identity.day.expect("day keys are level 2").0.to_be_bytes();
        match &self.inner {
            DayInner::Transparent(k) => join(TRANSPARENT_SCHEME, &[root, &day, k.as_bytes()]),
            DayInner::Pairing(k) => join(PAIRING_SCHEME, &[root, &day, &k.to_bytes()]),
        }
    }

    pub fn from_text(text: &str) -> Result<Self, AhibeError> {
        let (scheme, parts) = split(text)?;
        expect_parts(&parts, 3)?;
        let identity = IdentityPath { root: decode_root(&parts[0])?, day: Some(decode_day(&parts[1])?) };
        let inner = match scheme {
            TRANSPARENT_SCHEME => DayInner::Transparent(transparent::DayKey::from_bytes(&parts[2])?),
            PAIRING_SCHEME => DayInner::Pairing(Box::new(pairing::DayKey::from_bytes(&parts[2])?)),
            other => return Err(unknown_scheme(other)),
        };
        Ok(DayKey { identity, inner })
    }
}

impl EncapHeader {
    pub fn to_text(&self) -> String {
        join(&self.scheme_id, &[&self.body])
    }

    pub fn from_text(text: &str) -> Result<Self, AhibeError> {
        let (scheme, mut parts) = split(text)?;
        expect_parts(&parts, 1)?;
        if scheme != TRANSPARENT_SCHEME && scheme != PAIRING_SCHEME {
            return Err(unknown_scheme(scheme));
        }
        Ok(EncapHeader { scheme_id: scheme.to_owned(), body: parts.remove(0) })
    }
}

macro_rules! text_serde {
    ($($ty:ty),*) => {$(
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&self.to_text())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let text = String::deserialize(de)?;
                <$ty>::from_text(&text).map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let text = self.to_text();
                let shown: String = text.chars().take(40).collect();
                write!(f, "{}({shown}..)", stringify!($ty))
            }
        }
    )*};
}

text_serde!(MasterPublicParams, HolderKey, DayKey, EncapHeader);

impl fmt::Debug for MasterSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MasterSecret({}, ..)", self.scheme_id())
    }
}

#[cfg(test)]
mod tests;
