//! Anonymous two-level HIBE over BLS12-381 with Boyen–Waters linear
//! splitting, used as a KEM.
//!
//! Ciphertexts live in G1, keys in G2. For a path `(a, b)` (root and day
//! hashed to scalars) the identity element is `F = g0 + a·g1 + b·g2`.
//! A header is
//!
//! ```text
//! C0 = s·F, C1 = (s−s1)·v1, C2 = s1·v2, C3 = (s−s2)·v3, C4 = s2·v4
//! ```
//!
//! and the shared key is `KDF(s·Ω)` with `Ω = ω·t1·t2·e(g, h)`. A key for
//! `(a, b)` with randomness `r1, r2` is
//!
//! ```text
//! d0 = (r1·t1·t2 + r2·t3·t4)·h
//! d1 = −t2·(ω + f·r1)·h      d2 = −t1·(ω + f·r1)·h
//! d3 = −t4·f·r2·h            d4 = −t3·f·r2·h
//! ```
//!
//! so that `Σ e(Ci, di) = −s·Ω`. A holder key is the same shape for `f1 = x0
//! + x1·a` plus delegation components (the `b`-coefficient, `e`) and
//! re-randomization components (`u`, `y`, `w`). Each delegation adds fresh
//! `r1, r2`, so two day keys never share randomness.

use std::io::Read;

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group};
use ark_ff::{PrimeField, UniformRand};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use super::AhibeError;
use crate::crypto::{kdf32, DayIndex, SymmetricKey};

type Gt = PairingOutput<Bls12_381>;

const KEM_CONTEXT: &[u8] = b"revoca/bw/kem/v1";

#[derive(Clone, PartialEq, Eq)]
pub(super) struct PublicParams {
    g0: G1Affine,
    g1: G1Affine,
    g2: G1Affine,
    v: [G1Affine; 4],
    omega: Gt,
}

#[derive(Clone, PartialEq, Eq)]
pub(super) struct MasterSecret {
    omega: Fr,
    t: [Fr; 4],
    x: [Fr; 3],
}

#[derive(Clone, PartialEq, Eq)]
pub(super) struct HolderKey {
    d: [G2Affine; 5],
    e: [G2Affine; 4],
    u: [G2Affine; 4],
    y: [G2Affine; 4],
    w: [G2Affine; 2],
}

#[derive(Clone, PartialEq, Eq)]
pub(super) struct DayKey {
    d: [G2Affine; 5],
}

fn hash_to_scalar(domain: &[u8], data: &[u8]) -> Fr {
    let mut hasher = Sha512::new();
    hasher.update((domain.len() as u64).to_be_bytes());
    hasher.update(domain);
    hasher.update(data);
    Fr::from_le_bytes_mod_order(&hasher.finalize())
}

fn root_scalar(root: &str) -> Fr {
    hash_to_scalar(b"revoca/bw/root/v1", root.as_bytes())
}

fn day_scalar(day: DayIndex) -> Fr {
    hash_to_scalar(b"revoca/bw/day/v1", &day.0.to_be_bytes())
}

fn kem_key(element: &Gt) -> SymmetricKey {
    let mut bytes = Vec::new();
    element.serialize_compressed(&mut bytes).expect("serializing to a Vec cannot fail");
    SymmetricKey::from_bytes(kdf32(&bytes, KEM_CONTEXT))
}

pub(super) fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (PublicParams, MasterSecret) {
    let secret = MasterSecret {
        omega: Fr::rand(rng),
        t: [Fr::rand(rng), Fr::rand(rng), Fr::rand(rng), Fr::rand(rng)],
        x: [Fr::rand(rng), Fr::rand(rng), Fr::rand(rng)],
    };
    let g = G1Projective::generator();
    let h = G2Projective::generator();
    let [x0, x1, x2] = secret.x;
    let [t1, t2, _, _] = secret.t;
    let v = G1Projective::normalize_batch(&secret.t.map(|t| g * t));
    let public = PublicParams {
        g0: (g * x0).into_affine(),
        g1: (g * x1).into_affine(),
        g2: (g * x2).into_affine(),
        v: v.try_into().expect("four elements"),
        omega: Bls12_381::pairing(g, h) * (secret.omega * t1 * t2),
    };
    (public, secret)
}

fn g2_batch<const N: usize>(scalars: [Fr; N]) -> [G2Affine; N] {
    let h = G2Projective::generator();
    let points: Vec<G2Projective> = scalars.iter().map(|s| h * s).collect();
    G2Projective::normalize_batch(&points).try_into().expect("length preserved")
}

impl MasterSecret {
    pub fn extract<R: RngCore + CryptoRng>(&self, root: &str, rng: &mut R) -> HolderKey {
        let [t1, t2, t3, t4] = self.t;
        let [x0, x1, x2] = self.x;
        let f1 = x0 + x1 * root_scalar(root);
        let r1 = Fr::rand(rng);
        let r2 = Fr::rand(rng);
        let blind = self.omega + f1 * r1;
        HolderKey {
            d: g2_batch([
                r1 * t1 * t2 + r2 * t3 * t4,
                -(t2 * blind),
                -(t1 * blind),
                -(t4 * f1 * r2),
                -(t3 * f1 * r2),
            ]),
            e: g2_batch([-(x2 * r1 * t2), -(x2 * r1 * t1), -(x2 * r2 * t4), -(x2 * r2 * t3)]),
            u: g2_batch(self.t.map(|t| f1 * t)),
            y: g2_batch(self.t.map(|t| x2 * t)),
            w: g2_batch([t1 * t2, t3 * t4]),
        }
    }
}

impl HolderKey {
    pub fn delegate<R: RngCore + CryptoRng>(&self, day: DayIndex, rng: &mut R) -> DayKey {
        let b = day_scalar(day);
        let rho1 = Fr::rand(rng);
        let rho2 = Fr::rand(rng);
        let [d0, d1, d2, d3, d4] = self.d.map(G2Projective::from);
        let [e1, e2, e3, e4] = self.e;
        let [u1, u2, u3, u4] = self.u.map(G2Projective::from);
        let [y1, y2, y3, y4] = self.y;
        // Full-path re-randomizer for component n: (f1 + x2·b)·t_n·h.
        let full = |u: G2Projective, y: G2Affine| u + y * b;
        let points = [
            d0 + self.w[0] * rho1 + self.w[1] * rho2,
            d1 + e1 * b - full(u2, y2) * rho1,
            d2 + e2 * b - full(u1, y1) * rho1,
            d3 + e3 * b - full(u4, y4) * rho2,
            d4 + e4 * b - full(u3, y3) * rho2,
        ];
        DayKey { d: G2Projective::normalize_batch(&points).try_into().expect("five elements") }
    }
}

impl PublicParams {
    pub fn encap<R: RngCore + CryptoRng>(
        &self,
        root: &str,
        day: DayIndex,
        rng: &mut R,
    ) -> (Vec<u8>, SymmetricKey) {
        let s = Fr::rand(rng);
        let s1 = Fr::rand(rng);
        let s2 = Fr::rand(rng);
        let identity = G1Projective::from(self.g0)
            + self.g1 * root_scalar(root)
            + self.g2 * day_scalar(day);
        let header = G1Projective::normalize_batch(&[
            identity * s,
            self.v[0] * (s - s1),
            self.v[1] * s1,
            self.v[2] * (s - s2),
            self.v[3] * s2,
        ]);
        (write_points(&header), kem_key(&(self.omega * s)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = write_points(&[self.g0, self.g1, self.g2]);
        out.extend(write_points(&self.v));
        self.omega.serialize_compressed(&mut out).expect("Vec write");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        let mut reader = bytes;
        let [g0, g1, g2] = read_points(&mut reader)?;
        let v = read_points(&mut reader)?;
        let omega = Gt::deserialize_compressed(&mut reader).map_err(decode_err)?;
        finish(reader)?;
        Ok(PublicParams { g0, g1, g2, v, omega })
    }
}

impl MasterSecret {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for scalar in std::iter::once(&self.omega).chain(&self.t).chain(&self.x) {
            scalar.serialize_compressed(&mut out).expect("Vec write");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        let mut reader = bytes;
        let mut next = || Fr::deserialize_compressed(&mut reader).map_err(decode_err);
        let omega = next()?;
        let t = [next()?, next()?, next()?, next()?];
        let x = [next()?, next()?, next()?];
        finish(reader)?;
        Ok(MasterSecret { omega, t, x })
    }
}

impl HolderKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = write_points(&self.d);
        out.extend(write_points(&self.e));
        out.extend(write_points(&self.u));
        out.extend(write_points(&self.y));
        out.extend(write_points(&self.w));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        let mut reader = bytes;
        let key = HolderKey {
            d: read_points(&mut reader)?,
            e: read_points(&mut reader)?,
            u: read_points(&mut reader)?,
            y: read_points(&mut reader)?,
            w: read_points(&mut reader)?,
        };
        finish(reader)?;
        Ok(key)
    }
}

impl DayKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        write_points(&self.d)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AhibeError> {
        let mut reader = bytes;
        let d = read_points(&mut reader)?;
        finish(reader)?;
        Ok(DayKey { d })
    }

    pub fn decap(&self, body: &[u8]) -> Result<SymmetricKey, AhibeError> {
        let mut reader = body;
        let header: [G1Affine; 5] = read_points(&mut reader)?;
        finish(reader)?;
        let z = Bls12_381::multi_pairing(header, self.d);
        Ok(kem_key(&-z))
    }
}

fn decode_err(err: ark_serialize::SerializationError) -> AhibeError {
    AhibeError::Decode(err.to_string())
}

fn write_points<P: CanonicalSerialize>(points: &[P]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in points {
        p.serialize_compressed(&mut out).expect("Vec write");
    }
    out
}

fn read_points<P: CanonicalDeserialize, const N: usize>(
    reader: &mut &[u8],
) -> Result<[P; N], AhibeError> {
    let points = (0..N)
        .map(|_| P::deserialize_compressed(&mut *reader).map_err(decode_err))
        .collect::<Result<Vec<P>, _>>()?;
    Ok(points.try_into().unwrap_or_else(|_| unreachable!()))
}

fn finish(mut reader: &[u8]) -> Result<(), AhibeError> {
    let mut rest = [0u8; 1];
    match reader.read(&mut rest) {
        Ok(0) => Ok(()),
        _ => Err(AhibeError::Decode("trailing bytes".into())),
    }
}
