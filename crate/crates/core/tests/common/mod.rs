//! Hand-written HMAC-SHA-256 and HKDF, used as an independent oracle.
#![allow(dead_code)]

use sha2::{Digest, Sha256};

const BLOCK: usize = 64;

pub fn hmac(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut block = [0u8; BLOCK];
    if key.len() > BLOCK {
        block[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let pad = |byte: u8| block.map(|b| b ^ byte);
    let inner = Sha256::new().chain_update(pad(0x36)).chain_update(message).finalize();
    Sha256::new().chain_update(pad(0x5c)).chain_update(inner).finalize().into()
}

pub fn hkdf_extract(salt: &[u8], ikm: &[u8]) -> [u8; 32] {
    let zeros = [0u8; 32];
    hmac(if salt.is_empty() { &zeros } else { salt }, ikm)
}

pub fn hkdf_expand(prk: &[u8], info: &[u8], len: usize) -> Vec<u8> {
    let mut okm = Vec::new();
    let mut previous = Vec::new();
    for counter in 1..=len.div_ceil(32) as u8 {
        let mut input = previous.clone();
        input.extend_from_slice(info);
        input.push(counter);
        previous = hmac(prk, &input).to_vec();
        okm.extend_from_slice(&previous);
    }
    okm.truncate(len);
    okm
}

pub fn oracle_day_token(seed: &[u8; 32], k: u64) -> [u8; 32] {
    let mut info = b"revoca/day-token/v1".to_vec();
    info.extend_from_slice(&k.to_be_bytes());
    hkdf_expand(&hkdf_extract(&[], seed), &info, 32).try_into().unwrap()
}
