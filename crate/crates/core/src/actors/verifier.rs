use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Nonce, Presentation, TemporalAuthorization, TrustStore, VerifiableCredential};
use crate::ahibe::{self, IdentityPath, MasterPublicParams};
use crate::crypto::{compute_check_digest, DayIndex, VcId};
use crate::tables::{
    locate_revocation, segment_for_digest, CheckSegment, RevocationDocument,
    RevocationTableSnapshot, TableError, TableParams,
};

/// A fetched value and the number of body bytes transferred for it.
#[derive(Debug, Clone)]
pub struct Fetched<T> {
    pub value: T,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("{resource} not found: {reason}")]
    NotFound { resource: String, reason: String },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Where a Verifier gets published tables. Only two requests exist: one
/// check segment, or one whole revocation table. Neither carries anything
/// that identifies the credential being checked beyond the segment index.
pub trait TableSource {
    fn check_segment(&mut self, day: DayIndex, segment: u64) -> Result<Fetched<CheckSegment>, SourceError>;

    fn revocation_table(&mut self, day: DayIndex) -> Result<Fetched<RevocationTableSnapshot>, SourceError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifierError {
    #[error("issuer signature rejected: {0}")]
    BadSignature(String),
    #[error("proof of possession rejected")]
    BadProofOfPossession,
    #[error("presentation carries no authorizations")]
    NoAuthorizations,
    #[error("day key for day {day} failed the probe")]
    KeyProbeFailed { day: DayIndex },
    #[error("check digest for day {day} not found")]
    CheckDigestNotFound { day: DayIndex },
    #[error("snapshot for day {day} unavailable: {reason}")]
    SnapshotUnavailable { day: DayIndex, reason: String },
    #[error("day {day} is in the future; check deferred")]
    DeferredFutureDay { day: DayIndex },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("integrity error: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "documents", rename_all = "snake_case")]
pub enum DayStatus {
    NoRevocationFound,
    Revoked(Vec<RevocationDocument>),
    /// Accepted for a future day; evaluated once that day is published.
    Deferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayOutcome {
    pub day: DayIndex,
    #[serde(flatten)]
    pub status: DayStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub segment_bytes: u64,
    pub table_bytes: u64,
}

impl Bandwidth {
    pub fn total(&self) -> u64 {
        self.segment_bytes + self.table_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResult {
    pub vc_id: VcId,
    pub outcomes: Vec<DayOutcome>,
    #[serde(flatten)]
    pub bandwidth: Bandwidth,
}

impl StatusResult {
    pub fn is_revoked(&self) -> bool {
        self.outcomes.iter().any(|o| matches!(o.status, DayStatus::Revoked(_)))
    }
}

/// A future-day authorization waiting for its day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeferredCheck {
    pub credential: VerifiableCredential,
    pub authorization: TemporalAuthorization,
}

/// Outcome of a deferred authorization once its day arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeferredOutcome {
    pub vc_id: VcId,
    pub day: DayIndex,
    pub result: Result<DayStatus, VerifierError>,
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Clone)]
pub struct Verifier {
    mpp: MasterPublicParams,
    params: TableParams,
    trust: TrustStore,
    deferred: Vec<DeferredCheck>,
}

impl Verifier {
    pub fn new(mpp: MasterPublicParams, params: TableParams, trust: TrustStore) -> Self {
        Verifier { mpp, params, trust, deferred: Vec::new() }
    }

    pub fn pending(&self) -> &[DeferredCheck] {
        &self.deferred
    }

    /// Runs the full pipeline on every authorization, stopping at the first
    /// failure. Future-day authorizations are reported as
    /// [`DayStatus::Deferred`] and queued for [`Verifier::check_deferred`].
    pub fn check<S: TableSource, R: RngCore + CryptoRng>(
        &mut self,
        presentation: &Presentation,
        expected_nonce: &Nonce,
        source: &mut S,
        current_day: DayIndex,
        rng: &mut R,
    ) -> Result<StatusResult, VerifierError> {
        let vc = &presentation.credential;
        let issuer_key = self
            .trust
            .get(&vc.issuer_id)
            .ok_or_else(|| VerifierError::BadSignature(format!("untrusted issuer {}", vc.issuer_id)))?;
        if !vc.verify_issuer(issuer_key) {
            return Err(VerifierError::BadSignature("signature does not verify".into()));
        }
        if presentation.nonce != *expected_nonce || !presentation.verify_pop() {
            return Err(VerifierError::BadProofOfPossession);
        }
        if presentation.authorizations.is_empty() {
            return Err(VerifierError::NoAuthorizations);
        }

        let mut bandwidth = Bandwidth::default();
        let mut outcomes = Vec::with_capacity(presentation.authorizations.len());
        let mut queued = Vec::new();
        for auth in &presentation.authorizations {
            let status = match self.check_authorization(vc, auth, source, current_day, rng, &mut bandwidth) {
                Err(VerifierError::DeferredFutureDay { .. }) => {
                    queued.push(DeferredCheck { credential: vc.clone(), authorization: auth.clone() });
                    DayStatus::Deferred
                }
                other => other?,
            };
            outcomes.push(DayOutcome { day: auth.day, status });
        }
        self.deferred.extend(queued);
        Ok(StatusResult { vc_id: vc.vc_id, outcomes, bandwidth })
    }

    /// Evaluates queued authorizations whose day has arrived and drops them
    /// from the queue.
    pub fn check_deferred<S: TableSource, R: RngCore + CryptoRng>(
        &mut self,
        source: &mut S,
        current_day: DayIndex,
        rng: &mut R,
    ) -> Vec<DeferredOutcome> {
        let (due, later): (Vec<_>, Vec<_>) =
            self.deferred.drain(..).partition(|d| d.authorization.day <= current_day);
        self.deferred = later;
        due.into_iter()
            .map(|d| {
                let mut bandwidth = Bandwidth::default();
                let result = self.check_authorization(
                    &d.credential,
                    &d.authorization,
                    source,
                    current_day,
                    rng,
                    &mut bandwidth,
                );
                DeferredOutcome { vc_id: d.credential.vc_id, day: d.authorization.day, result, bandwidth }
            })
            .collect()
    }

    /// Key probe, check digest lookup and revocation scan for one day.
    /// The credential must already have been authenticated.
    pub fn check_authorization<S: TableSource, R: RngCore + CryptoRng>(
        &self,
        vc: &VerifiableCredential,
        auth: &TemporalAuthorization,
        source: &mut S,
        current_day: DayIndex,
        rng: &mut R,
        bandwidth: &mut Bandwidth,
    ) -> Result<DayStatus, VerifierError> {
        let day = auth.day;
        if day > current_day {
            return Err(VerifierError::DeferredFutureDay { day });
        }

        let id = IdentityPath::day(&vc.root, day).map_err(|_| VerifierError::KeyProbeFailed { day })?;
        if !ahibe::probe_key(&self.mpp, &id, &auth.day_key, rng) {
            return Err(VerifierError::KeyProbeFailed { day });
        }

        let digest = compute_check_digest(&auth.day_token, &vc.vc_id);
        let j = segment_for_digest(&digest, &self.params);
        let segment = source.check_segment(day, j).map_err(|e| source_error(day, e))?;
        bandwidth.segment_bytes += segment.bytes;
        let segment = segment.value;
        if segment.day != day || segment.params != self.params || segment.segment_index != j {
            return Err(VerifierError::CorruptSnapshot(format!("unexpected segment for day {day}")));
        }
        if !segment.segment_contains(&digest).map_err(table_error)? {
            return Err(VerifierError::CheckDigestNotFound { day });
        }

        let index =
            locate_revocation(&self.mpp, &vc.root, day, &digest, self.params.d()).map_err(table_error)?;
        let table = source.revocation_table(day).map_err(|e| source_error(day, e))?;
        bandwidth.table_bytes += table.bytes;
        let table = table.value;
        if table.day() != day || *table.params() != self.params {
            return Err(VerifierError::CorruptSnapshot(format!("unexpected revocation table for day {day}")));
        }
        let docs = table.scan_bucket(index, &auth.day_key, &vc.root, day, &vc.vc_id).map_err(table_error)?;
        Ok(if docs.is_empty() { DayStatus::NoRevocationFound } else { DayStatus::Revoked(docs) })
    }
}

fn source_error(day: DayIndex, err: SourceError) -> VerifierError {
    match err {
        SourceError::NotFound { reason, .. } => VerifierError::SnapshotUnavailable { day, reason },
        SourceError::Transport(reason) => VerifierError::SnapshotUnavailable { day, reason },
        SourceError::Corrupt(reason) => VerifierError::CorruptSnapshot(reason),
    }
}

fn table_error(err: TableError) -> VerifierError {
    match err {
        TableError::Integrity(msg) => VerifierError::Integrity(msg),
        other => VerifierError::CorruptSnapshot(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::{IssuerState, Pkg, Wallet};
    use crate::ahibe::SecurityLevel;
    use crate::crypto::{DayToken, SigningKey};
    use crate::tables::{RevocationStatus, SnapshotFile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeMap;

    /// Serves straight from the issuer, counting encoded sizes.
    struct IssuerSource<'a>(&'a IssuerState);

    impl TableSource for IssuerSource<'_> {
        fn check_segment(&mut self, day: DayIndex, j: u64) -> Result<Fetched<CheckSegment>, SourceError> {
            let published = self.0.published(day).ok_or_else(|| SourceError::NotFound {
                resource: format!("check/{day}"),
                reason: "not archived".into(),
            })?;
            let value = published.check.segment(j).map_err(|e| SourceError::Corrupt(e.to_string()))?;
            Ok(Fetched { bytes: value.to_file_bytes().len() as u64, value })
        }

        fn revocation_table(&mut self, day: DayIndex) -> Result<Fetched<RevocationTableSnapshot>, SourceError> {
            let published = self.0.published(day).ok_or_else(|| SourceError::NotFound {
                resource: format!("revocation/{day}"),
                reason: "not archived".into(),
            })?;
            let value = published.revocation.clone();
            Ok(Fetched { bytes: value.to_file_bytes().len() as u64, value })
        }
    }

    struct World {
        rng: ChaCha20Rng,
        pkg: Pkg,
        issuer: IssuerState,
        wallet: Wallet,
        verifier: Verifier,
        vc: VerifiableCredential,
    }

    fn world(seed: u64) -> World {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pkg = Pkg::setup(SecurityLevel::Test, &mut rng);
        let params = TableParams::new(16, 8, 2, 1).unwrap();
        let mut issuer = IssuerState::init("iss", pkg.public_params().clone(), params, DayIndex(0), &mut rng);
        let mut trust = TrustStore::new();
        trust.insert("iss", issuer.public_key());
        let pop = SigningKey::generate(&mut rng);
        let (vc, seed) = issuer.issue("h", BTreeMap::new(), DayIndex(50), pop.public_key(), &mut rng).unwrap();
        let mut wallet = Wallet::new();
        wallet.store(&trust, vc.clone(), seed, pkg.extract("h", &mut rng).unwrap(), pop).unwrap();
        let verifier = Verifier::new(pkg.public_params().clone(), params, trust);
        World { rng, pkg, issuer, wallet, verifier, vc }
    }

    fn doc(vc_id: VcId, sequence: u64) -> RevocationDocument {
        RevocationDocument {
            vc_id,
            status: RevocationStatus::Revoked,
            reason: "r".into(),
            constraints: BTreeMap::new(),
            effective_from: DayIndex(0),
            sequence,
        }
    }

    impl World {
        fn present(&mut self, days: &[u64]) -> Presentation {
            let days: Vec<_> = days.iter().map(|&d| DayIndex(d)).collect();
            self.wallet.present(&self.vc.vc_id, &days, [1; 16], &mut self.rng).unwrap()
        }

        fn check(&mut self, p: &Presentation) -> Result<StatusResult, VerifierError> {
            let day = self.issuer.current_day();
            self.verifier.check(p, &[1; 16], &mut IssuerSource(&self.issuer), day, &mut self.rng)
        }
    }

    #[test]
    fn clean_credential() {
        let mut w = world(1);
        let p = w.present(&[0]);
        let result = w.check(&p).unwrap();
        assert_eq!(result.outcomes, vec![DayOutcome { day: DayIndex(0), status: DayStatus::NoRevocationFound }]);
        assert!(result.bandwidth.segment_bytes > 0 && result.bandwidth.table_bytes > 0);
    }

    #[test]
    fn same_day_revocation_is_found() {
        let mut w = world(2);
        let id = w.vc.vc_id;
        w.issuer.revoke(&id, doc(id, 1), DayIndex(0)).unwrap();
        let p = w.present(&[0]);
        assert_eq!(w.check(&p).unwrap().outcomes[0].status, DayStatus::Revoked(vec![doc(id, 1)]));
    }

    #[test]
    fn forged_token_and_key_rejected() {
        let mut w = world(3);
        let mut p = w.present(&[0]);
        p.authorizations[0].day_token = DayToken::from_bytes(w.rng.gen());
        assert_eq!(w.check(&p), Err(VerifierError::CheckDigestNotFound { day: DayIndex(0) }));

        w.issuer.rollover(DayIndex(1)).unwrap();
        let mut p = w.present(&[1]);
        p.authorizations[0].day_key = w.wallet.get(&w.vc.vc_id).unwrap().holder_key.delegate(DayIndex(0), &mut w.rng);
        assert_eq!(w.check(&p), Err(VerifierError::KeyProbeFailed { day: DayIndex(1) }));

        let mut p = w.present(&[1]);
        p.authorizations[0].day_key = w.pkg.extract("other", &mut w.rng).unwrap().delegate(DayIndex(1), &mut w.rng);
        assert_eq!(w.check(&p), Err(VerifierError::KeyProbeFailed { day: DayIndex(1) }));
    }

    #[test]
    fn signature_and_pop_failures() {
        let mut w = world(4);
        let mut p = w.present(&[0]);
        p.credential.claims.insert("x".into(), "y".into());
        assert!(matches!(w.check(&p), Err(VerifierError::BadSignature(_))));

        let p = w.present(&[0]);
        let day = w.issuer.current_day();
        let stale = w.verifier.check(&p, &[2; 16], &mut IssuerSource(&w.issuer), day, &mut w.rng);
        assert_eq!(stale, Err(VerifierError::BadProofOfPossession));

        let mut p = w.present(&[0]);
        p.nonce = [1; 16];
        p.pop_signature = SigningKey::generate(&mut w.rng).sign(b"x");
        assert_eq!(w.check(&p), Err(VerifierError::BadProofOfPossession));

        let mut p = w.present(&[0]);
        p.authorizations.clear();
        assert_eq!(w.check(&p), Err(VerifierError::NoAuthorizations));
    }

    #[test]
    fn past_future_and_missing_days() {
        let mut w = world(5);
        let id = w.vc.vc_id;
        w.issuer.rollover(DayIndex(2)).unwrap();
        w.issuer.revoke(&id, doc(id, 1), DayIndex(2)).unwrap();
        w.issuer.rollover(DayIndex(4)).unwrap();
        let w_day = w.issuer.current_day();
        assert_eq!(w_day, DayIndex(4));

        let p = w.present(&[1, 2, 4, 6]);
        let result = w.check(&p).unwrap();
        let statuses: Vec<_> = result.outcomes.iter().map(|o| o.status.clone()).collect();
        assert_eq!(
            statuses,
            vec![
                DayStatus::NoRevocationFound,
                DayStatus::Revoked(vec![doc(id, 1)]),
                DayStatus::Revoked(vec![doc(id, 1)]),
                DayStatus::Deferred,
            ]
        );
        assert_eq!(w.verifier.pending().len(), 1);

        w.issuer.rollover(DayIndex(5)).unwrap();
        assert!(w.verifier.check_deferred(&mut IssuerSource(&w.issuer), DayIndex(5), &mut w.rng).is_empty());
        w.issuer.rollover(DayIndex(6)).unwrap();
        let done = w.verifier.check_deferred(&mut IssuerSource(&w.issuer), DayIndex(6), &mut w.rng);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].result, Ok(DayStatus::Revoked(vec![doc(id, 1)])));
        assert!(w.verifier.pending().is_empty());

        let mut short = w.issuer.clone().with_retention(1);
        short.rollover(DayIndex(7)).unwrap();
        let p = w.present(&[2]);
        let result = w.verifier.check(&p, &[1; 16], &mut IssuerSource(&short), DayIndex(7), &mut w.rng);
        assert!(matches!(result, Err(VerifierError::SnapshotUnavailable { .. })));
    }

    #[test]
    fn status_result_serializes() {
        let result = StatusResult {
            vc_id: "000102030405060708090a0b0c0d0e0f".parse().unwrap(),
            outcomes: vec![DayOutcome { day: DayIndex(3), status: DayStatus::NoRevocationFound }],
            bandwidth: Bandwidth { segment_bytes: 10, table_bytes: 20 },
        };
        let bytes = crate::encoding::canonical_encode(&result).unwrap();
        assert_eq!(
            bytes,
            br#"{"outcomes":[{"day":3,"status":"no_revocation_found"}],"segment_bytes":10,"table_bytes":20,"vc_id":"000102030405060708090a0b0c0d0e0f"}"#
        );
    }
}
