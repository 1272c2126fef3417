use serde::{Deserialize, Serialize};

use crate::actors::TrustStore;
use crate::ahibe::MasterPublicParams;
use crate::crypto::{Clock, DayIndex, Signature, SigningKey};
use crate::encoding::{canonical_decode, canonical_encode, EncodingError};
use crate::tables::TableParams;

/// Everything a Verifier needs before its first check, signed by the Issuer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicParamsDocument {
    pub mpp: MasterPublicParams,
    pub table_params: TableParams,
    pub epoch: u64,
    pub granularity_seconds: u64,
    pub issuer_id: String,
    pub signature: Signature,
}

#[derive(Serialize)]
struct Unsigned<'a> {
    mpp: &'a MasterPublicParams,
    table_params: &'a TableParams,
    epoch: u64,
    granularity_seconds: u64,
    issuer_id: &'a str,
}

impl PublicParamsDocument {
    pub fn sign(
        mpp: MasterPublicParams,
        table_params: TableParams,
        clock: Clock,
        issuer_id: impl Into<String>,
        key: &SigningKey,
    ) -> Self {
        let issuer_id = issuer_id.into();
        let signature = key.sign(&unsigned_bytes(&mpp, &table_params, &clock, &issuer_id));
        PublicParamsDocument {
            mpp,
            table_params,
            epoch: clock.epoch_unix,
            granularity_seconds: clock.granularity_seconds,
            issuer_id,
            signature,
        }
    }

    pub fn clock(&self) -> Clock {
        Clock { epoch_unix: self.epoch, granularity_seconds: self.granularity_seconds }
    }

    pub fn day_at(&self, unix_seconds: u64) -> DayIndex {
        self.clock().day_at(unix_seconds)
    }

    pub fn verify(&self, trust: &TrustStore) -> bool {
        let bytes = unsigned_bytes(&self.mpp, &self.table_params, &self.clock(), &self.issuer_id);
        self.granularity_seconds > 0
            && trust.get(&self.issuer_id).is_some_and(|key| key.verify(&bytes, &self.signature))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("params document encodes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        canonical_decode(bytes)
    }
}

fn unsigned_bytes(mpp: &MasterPublicParams, table_params: &TableParams, clock: &Clock, issuer_id: &str) -> Vec<u8> {
    canonical_encode(&Unsigned {
        mpp,
        table_params,
        epoch: clock.epoch_unix,
        granularity_seconds: clock.granularity_seconds,
        issuer_id,
    })
    .expect("params document encodes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahibe::{setup, SecurityLevel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn signed_and_round_trips() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (mpp, _) = setup(SecurityLevel::Test, &mut rng);
        let key = SigningKey::generate(&mut rng);
        let clock = Clock { epoch_unix: 1_700_000_000, granularity_seconds: 3_600 };
        let doc = PublicParamsDocument::sign(mpp, TableParams::new(8, 4, 2, 1).unwrap(), clock, "iss", &key);
        let mut trust = TrustStore::new();
        assert!(!doc.verify(&trust));
        trust.insert("iss", key.public_key());
        assert!(doc.verify(&trust));
        let back = PublicParamsDocument::from_bytes(&doc.to_bytes()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.day_at(1_700_000_000 + 7_200), DayIndex(2));

        let mut tampered = doc.clone();
        tampered.table_params = TableParams::new(16, 4, 2, 1).unwrap();
        assert!(!tampered.verify(&trust));
    }
}
