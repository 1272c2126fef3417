//! `transparent-v1`: keys are KDF outputs down the identity path. The public
//! parameters ARE the master secret. Never use outside tests and simulations.

use rand::{CryptoRng, RngCore};

use super::AhibeError;
use crate::crypto::{kdf32, DayIndex, SymmetricKey};

const ROOT_CONTEXT: &[u8] = b"revoca/transparent/root/v1";
const DAY_CONTEXT: &[u8] = b"revoca/transparent/day/v1";
const ENCAP_CONTEXT: &[u8] = b"revoca/transparent/encap/v1";

#[derive(Clone, PartialEq, Eq)]
pub(super) struct Params([u8; 32]);

#[derive(Clone, PartialEq, Eq)]
pub(super) struct HolderKey([u8; 32]);

#[derive(Clone, PartialEq, Eq)]
pub(super) struct DayKey([u8; 32]);

fn array(bytes: &[u8]) -> Result<[u8; 32], AhibeError> {
    bytes
        .try_into()
        .map_err(|_| AhibeError::Decode(format!("expected 32 bytes, got {}", bytes.len())))
}

fn with_context(context: &[u8], data: &[u8]) -> Vec<u8> {
    let mut info = Vec::with_capacity(context.len() + data.len());
    info.extend_from_slice(context);
    info.extend_from_slice(data);
    info
}

impl Params {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Params(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        array(bytes).map(Params)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn extract(&self, root: &str) -> HolderKey {
        HolderKey(kdf32(&self.0, &with_context(ROOT_CONTEXT, root.as_bytes())))
    }

    pub fn encap<R: RngCore + CryptoRng>(
        &self,
        root: &str,
        day: DayIndex,
        rng: &mut R,
    ) -> (Vec<u8>, SymmetricKey) {
        let day_key = self.extract(root).delegate(day);
        let mut nonce = [0u8; 32];
        rng.fill_bytes(&mut nonce);
        let key = day_key.key_for(&nonce);
        (nonce.to_vec(), key)
    }
}

impl HolderKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        array(bytes).map(HolderKey)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn delegate(&self, day: DayIndex) -> DayKey {
        DayKey(kdf32(&self.0, &with_context(DAY_CONTEXT, &day.0.to_be_bytes())))
    }
}

impl DayKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        array(bytes).map(DayKey)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    fn key_for(&self, nonce: &[u8; 32]) -> SymmetricKey {
        SymmetricKey::from_bytes(kdf32(&self.0, &with_context(ENCAP_CONTEXT, nonce)))
    }

    pub fn decap(&self, body: &[u8]) -> Result<SymmetricKey, AhibeError> {
        Ok(self.key_for(&array(body)?))
    }
}
