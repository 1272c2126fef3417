use rand::{CryptoRng, RngCore};

use crate::ahibe::{self, AhibeError, HolderKey, MasterPublicParams, MasterSecret, SecurityLevel};

/// Private key generator: owns the master secret and hands out root keys.
#[derive(Clone)]
pub struct Pkg {
    mpp: MasterPublicParams,
    msk: MasterSecret,
}

impl Pkg {
    pub fn setup<R: RngCore + CryptoRng>(level: SecurityLevel, rng: &mut R) -> Self {
        let (mpp, msk) = ahibe::setup(level, rng);
        Pkg { mpp, msk }
    }

    pub fn from_parts(mpp: MasterPublicParams, msk: MasterSecret) -> Result<Self, AhibeError> {
        if mpp.scheme_id() != msk.scheme_id() {
            return Err(AhibeError::SchemeMismatch {
                expected: mpp.scheme_id().into(),
                actual: msk.scheme_id().into(),
            });
        }
        Ok(Pkg { mpp, msk })
    }

    pub fn public_params(&self) -> &MasterPublicParams {
        &self.mpp
    }

    pub fn master_secret(&self) -> &MasterSecret {
        &self.msk
    }

    pub fn extract<R: RngCore + CryptoRng>(
        &self,
        root: &str,
        rng: &mut R,
    ) -> Result<HolderKey, AhibeError> {
        ahibe::extract(&self.msk, root, rng)
    }
}
