//! Deterministic multi-day scenario driver.
//!
//! Two independent random streams are used: one for scenario decisions
//! (who is revoked, who presents, which days), one for cryptography. Verdict
//! counts therefore depend only on the decision stream and agree across
//! AHIBE schemes.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::actors::{
    DayStatus, HolderError, IssuerError, IssuerState, Pkg, Presentation, SourceError, TrustStore,
    VerifiableCredential, Verifier, VerifierError, Wallet,
};
use crate::ahibe::SecurityLevel;
use crate::crypto::{kdf32, DayIndex, DayToken, SigningKey, VcId};
use crate::encoding::canonical_encode;
use crate::service::{
    prune_days, publish_day, publish_params, HttpTransport, InProcess, MemoryStore,
    PublicParamsDocument, Server, ServiceError, Transport,
};
use crate::tables::{
    RevocationDocument, RevocationStatus, SnapshotFile, TableError, TableParams, DEFAULT_RETENTION_DAYS,
};

const ISSUER_ID: &str = "sim-issuer";
const CRYPTO_STREAM_CONTEXT: &[u8] = b"revoca/sim/crypto/v1";

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Issuer(#[from] IssuerError),
    #[error(transparent)]
    Holder(#[from] HolderError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("publication failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    InProcess,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub holders: u64,
    pub vcs_per_holder: u64,
    pub days: u64,
    pub daily_revocation_rate: f64,
    pub presentations_per_day: u64,
    pub past_auth_probability: f64,
    pub future_auth_probability: f64,
    /// Share of presentations replaced by a forged one.
    pub forgery_rate: f64,
    pub rng_seed: u64,
    pub d: u64,
    pub c: u64,
    pub min_anonymity: u64,
    pub scheme: SecurityLevel,
    pub transport: TransportKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            holders: 200,
            vcs_per_holder: 2,
            days: 10,
            daily_revocation_rate: 0.05,
            presentations_per_day: 120,
            past_auth_probability: 0.3,
            future_auth_probability: 0.2,
            forgery_rate: 0.0,
            rng_seed: 42,
            d: 256,
            c: 64,
            min_anonymity: 100,
            scheme: SecurityLevel::Test,
            transport: TransportKind::InProcess,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<TableParams, SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if self.holders == 0 || self.vcs_per_holder == 0 || self.days == 0 {
            return bad("holders, vcs_per_holder and days must be positive");
        }
        for (name, p) in [
            ("daily_revocation_rate", self.daily_revocation_rate),
            ("past_auth_probability", self.past_auth_probability),
            ("future_auth_probability", self.future_auth_probability),
            ("forgery_rate", self.forgery_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        let population = self.holders * self.vcs_per_holder;
        TableParams::for_population(self.d, self.c, population, self.min_anonymity)
            .map_err(|e| SimError::Config(e.to_string()))
    }

    fn echo(&self) -> BTreeMap<String, String> {
        let value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object()
            .expect("config is an object")
            .iter()
            .map(|(k, v)| (k.clone(), v.as_str().map_or_else(|| v.to_string(), str::to_string)))
            .collect()
    }
}

/// Counters for one day, or for the whole run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: u64,
    pub presentations: u64,
    pub forged: u64,
    /// Day authorizations evaluated (deferred ones count when resolved).
    pub authorizations: u64,
    pub deferred_queued: u64,
    pub deferred_resolved: u64,
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// Revoked on both sides, but with different documents.
    pub content_mismatches: u64,
    pub honest_rejections: u64,
    pub forged_rejected: u64,
    pub forged_wrong_class: u64,
    pub rejections: BTreeMap<String, u64>,
    pub revocations_published: u64,
    pub revocation_entries: u64,
    pub max_list: u64,
    pub mean_list_milli: u64,
    pub check_digests: u64,
    pub sigma: u64,
    pub check_table_bytes: u64,
    pub revocation_table_bytes: u64,
    pub segment_bytes: u64,
    pub table_bytes: u64,
    pub holder_bytes: u64,
    pub single_day_presentation_bytes_max: u64,
}

impl DayReport {
    fn absorb(&mut self, other: &DayReport) {
        self.presentations += other.presentations;
        self.forged += other.forged;
        self.authorizations += other.authorizations;
        self.deferred_queued += other.deferred_queued;
        self.deferred_resolved += other.deferred_resolved;
        self.true_positives += other.true_positives;
        self.true_negatives += other.true_negatives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.content_mismatches += other.content_mismatches;
        self.honest_rejections += other.honest_rejections;
        self.forged_rejected += other.forged_rejected;
        self.forged_wrong_class += other.forged_wrong_class;
        for (class, n) in &other.rejections {
            *self.rejections.entry(class.clone()).or_default() += n;
        }
        self.revocations_published += other.revocations_published;
        self.revocation_entries = self.revocation_entries.max(other.revocation_entries);
        self.max_list = self.max_list.max(other.max_list);
        self.mean_list_milli = self.mean_list_milli.max(other.mean_list_milli);
        self.check_digests = self.check_digests.max(other.check_digests);
        self.sigma = other.sigma;
        self.check_table_bytes = self.check_table_bytes.max(other.check_table_bytes);
        self.revocation_table_bytes = self.revocation_table_bytes.max(other.revocation_table_bytes);
        self.segment_bytes += other.segment_bytes;
        self.table_bytes += other.table_bytes;
        self.holder_bytes += other.holder_bytes;
        self.single_day_presentation_bytes_max =
            self.single_day_presentation_bytes_max.max(other.single_day_presentation_bytes_max);
    }

    /// Verdicts that disagree with ground truth.
    pub fn errors(&self) -> u64 {
        self.false_positives + self.false_negatives + self.content_mismatches + self.honest_rejections
    }
}

/// Wall-clock measurements. Not part of the canonical report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Timings {
    pub rebuild: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: BTreeMap<String, String>,
    pub scheme_id: String,
    pub table_params: TableParams,
    pub days: Vec<DayReport>,
    pub totals: DayReport,
    /// SHA-256 over every request path, byte count and verdict, in order.
    pub transcript_sha256: String,
    #[serde(skip)]
    pub timings: Timings,
}

impl ScenarioReport {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("report encodes")
    }

    /// Aligned-column text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let header = [
            "day", "pres", "auths", "TP", "TN", "FP", "FN", "rejected", "deferred", "seg_bytes",
            "table_bytes", "holder_bytes", "entries", "max_list",
        ];
        let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        let row = |label: String, r: &DayReport| {
            vec![
                label,
                r.presentations.to_string(),
                r.authorizations.to_string(),
                r.true_positives.to_string(),
                r.true_negatives.to_string(),
                r.false_positives.to_string(),
                r.false_negatives.to_string(),
                r.rejections.values().sum::<u64>().to_string(),
                r.deferred_queued.to_string(),
                r.segment_bytes.to_string(),
                r.table_bytes.to_string(),
                r.holder_bytes.to_string(),
                r.revocation_entries.to_string(),
                r.max_list.to_string(),
            ]
        };
        for r in &self.days {
            rows.push(row(r.day.to_string(), r));
        }
        rows.push(row("total".into(), &self.totals));
        let widths: Vec<usize> =
            (0..header.len()).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
        for r in &rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  "));
        }
        let t = &self.totals;
        let checks = t.authorizations.max(1);
        let _ = writeln!(out);
        let _ = writeln!(out, "scheme              {}", self.scheme_id);
        let _ = writeln!(out, "table params        {}", self.table_params);
        let _ = writeln!(out, "verifier bytes/auth {} segment + {} table", t.segment_bytes / checks, t.table_bytes / checks);
        let _ = writeln!(out, "full check table    {} bytes", t.check_table_bytes);
        let _ = writeln!(out, "holder bytes/pres   {}", t.holder_bytes / t.presentations.max(1));
        let _ = writeln!(out, "mean list length    {}.{:03}", t.mean_list_milli / 1000, t.mean_list_milli % 1000);
        for (class, n) in &t.rejections {
            let _ = writeln!(out, "rejected {class:<18} {n}");
        }
        if t.forged > 0 {
            let _ = writeln!(out, "forged rejected     {}/{} ({} wrong class)", t.forged_rejected, t.forged, t.forged_wrong_class);
        }
        let _ = writeln!(out, "rebuild time        {:.3} s", self.timings.rebuild.as_secs_f64());
        let _ = writeln!(out, "total time          {:.3} s", self.timings.total.as_secs_f64());
        let _ = writeln!(out, "transcript          {}", self.transcript_sha256);
        out
    }
}

pub fn error_class(err: &VerifierError) -> &'static str {
    match err {
        VerifierError::BadSignature(_) => "BadSignature",
        VerifierError::BadProofOfPossession => "BadProofOfPossession",
        VerifierError::NoAuthorizations => "NoAuthorizations",
        VerifierError::KeyProbeFailed { .. } => "KeyProbeFailed",
        VerifierError::CheckDigestNotFound { .. } => "CheckDigestNotFound",
        VerifierError::SnapshotUnavailable { .. } => "SnapshotUnavailable",
        VerifierError::DeferredFutureDay { .. } => "DeferredFutureDay",
        VerifierError::CorruptSnapshot(_) => "CorruptSnapshot",
        VerifierError::Integrity(_) => "Integrity",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Forgery {
    RandomToken,
    OtherCredentialToken,
    OtherDayKey,
    OtherHolderKey,
}

impl Forgery {
    fn expected(self) -> &'static str {
        match self {
            Forgery::RandomToken | Forgery::OtherCredentialToken => "CheckDigestNotFound",
            Forgery::OtherDayKey | Forgery::OtherHolderKey => "KeyProbeFailed",
        }
    }
}

struct Credential {
    vc: VerifiableCredential,
    holder: usize,
    /// Sequences of published documents with their publication days.
    published: Vec<(u64, DayIndex)>,
}

impl Credential {
    fn expected_on(&self, day: DayIndex) -> Vec<u64> {
        self.published.iter().filter(|(_, d)| *d <= day).map(|(s, _)| *s).collect()
    }
}

struct Transcript(sha2::Sha256);

impl Transcript {
    fn record(&mut self, line: &str) {
        use sha2::Digest;
        self.0.update((line.len() as u64).to_be_bytes());
        self.0.update(line.as_bytes());
    }

    fn finish(self) -> String {
        use sha2::Digest;
        hex::encode(self.0.finalize())
    }
}

pub fn run(config: &ScenarioConfig) -> Result<ScenarioReport, SimError> {
    let store = Arc::new(MemoryStore::new());
    match config.transport {
        TransportKind::InProcess => run_with(config, store.clone(), InProcess::new(store)),
        TransportKind::Http => {
            let server = Server::start(store.clone(), "127.0.0.1:0")?;
            let transport = HttpTransport::new(&server.url());
            run_with(config, store, transport)
        }
    }
}

fn run_with<T: Transport>(
    config: &ScenarioConfig,
    store: Arc<MemoryStore>,
    transport: T,
) -> Result<ScenarioReport, SimError> {
    let started = Instant::now();
    let params = config.validate()?;
    let mut plan = ChaCha20Rng::seed_from_u64(config.rng_seed);
    let mut crypto = ChaCha20Rng::from_seed(kdf32(&config.rng_seed.to_be_bytes(), CRYPTO_STREAM_CONTEXT));
    let mut transcript = Transcript(Default::default());
    let mut timings = Timings::default();

    let pkg = Pkg::setup(config.scheme, &mut crypto);
    let mut issuer = IssuerState::init(ISSUER_ID, pkg.public_params().clone(), params, DayIndex(0), &mut crypto)
        .with_retention(DEFAULT_RETENTION_DAYS.max(config.days));
    let mut trust = TrustStore::new();
    trust.insert(ISSUER_ID, issuer.public_key());
    let params_doc = PublicParamsDocument::sign(
        pkg.public_params().clone(),
        params,
        Default::default(),
        ISSUER_ID,
        issuer.signing_key(),
    );
    publish_params(&*store, &params_doc)?;

    // Onboarding: every credential is issued on day 0. A tenth of them
    // expire before the scenario ends.
    let mut wallet = Wallet::new();
    let mut holder_keys = Vec::new();
    let mut credentials = Vec::new();
    for h in 0..config.holders as usize {
        let root = format!("holder-{h:06}");
        let hk = pkg.extract(&root, &mut crypto).map_err(IssuerError::from)?;
        for _ in 0..config.vcs_per_holder {
            let expiry = if plan.gen_bool(0.1) {
                DayIndex(plan.gen_range(config.days / 2..=config.days.saturating_sub(1)))
            } else {
                DayIndex(config.days + 30)
            };
            let pop = SigningKey::generate(&mut crypto);
            let (vc, seed) = issuer.issue(&root, BTreeMap::new(), expiry, pop.public_key(), &mut crypto)?;
            wallet.store(&trust, vc.clone(), seed, hk.clone(), pop)?;
            credentials.push(Credential { vc, holder: h, published: Vec::new() });
        }
        holder_keys.push(hk);
    }
    let by_id: HashMap<VcId, usize> = credentials.iter().enumerate().map(|(i, c)| (c.vc.vc_id, i)).collect();

    let mut client = crate::service::Client::new(transport);
    let fetched = client.fetch_params()?;
    if !fetched.value.verify(&trust) {
        return Err(SimError::Config("published parameters do not verify".into()));
    }
    let mut verifier = Verifier::new(fetched.value.mpp, fetched.value.table_params, trust);
    client.take_log();

    let mut days = Vec::new();
    for t in 0..config.days {
        let today = DayIndex(t);
        let mut report = DayReport { day: t, sigma: params.sigma(), ..Default::default() };
        if t > 0 {
            let rebuild = Instant::now();
            issuer.rollover(today)?;
            timings.rebuild += rebuild.elapsed();
        }

        for (i, cred) in credentials.iter_mut().enumerate() {
            if !cred.vc.valid_on(today) || !plan.gen_bool(config.daily_revocation_rate) {
                continue;
            }
            let sequence = cred.published.last().map_or(1, |(s, _)| s + 1);
            let doc = RevocationDocument {
                vc_id: cred.vc.vc_id,
                status: if sequence == 1 { RevocationStatus::Suspended } else { RevocationStatus::Revoked },
                reason: format!("scenario event {t}/{i}"),
                constraints: BTreeMap::new(),
                effective_from: today,
                sequence,
            };
            issuer.revoke(&cred.vc.vc_id, doc, today)?;
            cred.published.push((sequence, today));
            report.revocations_published += 1;
        }

        let (check, revocation) = issuer.export_day();
        publish_day(&*store, &check, &revocation)?;
        prune_days(&*store, DayIndex(t.saturating_sub(issuer.retention_days())))?;
        let stats = revocation.stats();
        report.revocation_entries = stats.entries;
        report.max_list = stats.max_list;
        report.mean_list_milli = stats.entries * 1000 / stats.buckets;
        report.check_digests = check.digest_count() as u64;
        report.check_table_bytes = check.to_file_bytes().len() as u64;
        report.revocation_table_bytes = revocation.to_file_bytes().len() as u64;

        for outcome in verifier.check_deferred(&mut client, today, &mut crypto) {
            report.deferred_resolved += 1;
            report.segment_bytes += outcome.bandwidth.segment_bytes;
            report.table_bytes += outcome.bandwidth.table_bytes;
            let cred = &credentials[by_id[&outcome.vc_id]];
            match outcome.result {
                Ok(status) => score(&mut report, &mut transcript, cred, outcome.day, &status),
                Err(e) => reject(&mut report, &mut transcript, &e, None),
            }
        }
        for record in client.take_log().records {
            transcript.record(&format!("{} {}", record.path, record.bytes));
        }

        let active: Vec<usize> = (0..credentials.len()).filter(|&i| credentials[i].vc.valid_on(today)).collect();
        for _ in 0..config.presentations_per_day {
            if active.is_empty() {
                break;
            }
            let i = active[plan.gen_range(0..active.len())];
            let cred = &credentials[i];
            let nonce: [u8; 16] = plan.gen();
            let forgery = (config.forgery_rate > 0.0 && plan.gen_bool(config.forgery_rate)).then(|| {
                match plan.gen_range(0..4) {
                    0 => Forgery::RandomToken,
                    1 => Forgery::OtherCredentialToken,
                    2 => Forgery::OtherDayKey,
                    _ => Forgery::OtherHolderKey,
                }
            });
            let mut request = vec![today];
            if forgery.is_none() {
                if t > cred.vc.issued_day.0 && plan.gen_bool(config.past_auth_probability) {
                    request.insert(0, DayIndex(plan.gen_range(cred.vc.issued_day.0..t)));
                }
                let last = cred.vc.expiry_day.0.min(config.days - 1);
                if last > t && plan.gen_bool(config.future_auth_probability) {
                    request.push(DayIndex(plan.gen_range(t + 1..=last.min(t + 3))));
                }
            }
            let mut presentation = wallet.present(&cred.vc.vc_id, &request, nonce, &mut crypto)?;
            if let Some(kind) = forgery {
                forge(&mut presentation, kind, &mut plan, &mut crypto, &credentials, &wallet, &holder_keys, cred);
            }
            let bytes = presentation.to_bytes().len() as u64;
            report.presentations += 1;
            report.holder_bytes += bytes;
            if request.len() == 1 && forgery.is_none() {
                report.single_day_presentation_bytes_max = report.single_day_presentation_bytes_max.max(bytes);
            }

            let result = verifier.check(&presentation, &nonce, &mut client, today, &mut crypto);
            for record in client.take_log().records {
                transcript.record(&format!("{} {}", record.path, record.bytes));
            }
            match (forgery, result) {
                (Some(kind), Err(e)) => {
                    report.forged += 1;
                    report.forged_rejected += 1;
                    if error_class(&e) != kind.expected() {
                        report.forged_wrong_class += 1;
                    }
                    reject(&mut report, &mut transcript, &e, Some(kind));
                }
                (Some(_), Ok(result)) => {
                    report.forged += 1;
                    report.segment_bytes += result.bandwidth.segment_bytes;
                    report.table_bytes += result.bandwidth.table_bytes;
                    transcript.record("forged presentation accepted");
                }
                (None, Err(e)) => {
                    report.honest_rejections += 1;
                    reject(&mut report, &mut transcript, &e, None);
                }
                (None, Ok(result)) => {
                    report.segment_bytes += result.bandwidth.segment_bytes;
                    report.table_bytes += result.bandwidth.table_bytes;
                    for outcome in &result.outcomes {
                        if outcome.status == DayStatus::Deferred {
                            report.deferred_queued += 1;
                            transcript.record(&format!("deferred {}", outcome.day));
                        } else {
                            score(&mut report, &mut transcript, cred, outcome.day, &outcome.status);
                        }
                    }
                }
            }
        }
        days.push(report);
    }

    let mut totals = DayReport { day: config.days, ..Default::default() };
    for r in &days {
        totals.absorb(r);
    }
    timings.total = started.elapsed();
    Ok(ScenarioReport {
        config: config.echo(),
        scheme_id: pkg.public_params().scheme_id().to_string(),
        table_params: params,
        days,
        totals,
        transcript_sha256: transcript.finish(),
        timings,
    })
}

fn score(report: &mut DayReport, transcript: &mut Transcript, cred: &Credential, day: DayIndex, status: &DayStatus) {
    report.authorizations += 1;
    let expected = cred.expected_on(day);
    let verdict = match status {
        DayStatus::NoRevocationFound if expected.is_empty() => {
            report.true_negatives += 1;
            "TN"
        }
        DayStatus::NoRevocationFound => {
            report.false_negatives += 1;
            "FN"
        }
        DayStatus::Revoked(_) if expected.is_empty() => {
            report.false_positives += 1;
            "FP"
        }
        DayStatus::Revoked(docs) => {
            let got: Vec<u64> = docs.iter().map(|d| d.sequence).collect();
            if got == expected && docs.iter().all(|d| d.vc_id == cred.vc.vc_id) {
                report.true_positives += 1;
                "TP"
            } else {
                report.content_mismatches += 1;
                "MISMATCH"
            }
        }
        DayStatus::Deferred => "DEFERRED",
    };
    transcript.record(&format!("{} {} {verdict}", cred.holder, day));
}

fn reject(report: &mut DayReport, transcript: &mut Transcript, err: &VerifierError, forgery: Option<Forgery>) {
    let class = error_class(err);
    *report.rejections.entry(class.to_string()).or_default() += 1;
    transcript.record(&format!("rejected {class} {forgery:?}"));
}

#[allow(clippy::too_many_arguments)]
fn forge(
    presentation: &mut Presentation,
    kind: Forgery,
    plan: &mut ChaCha20Rng,
    crypto: &mut ChaCha20Rng,
    credentials: &[Credential],
    wallet: &Wallet,
    holder_keys: &[crate::ahibe::HolderKey],
    cred: &Credential,
) {
    let auth = &mut presentation.authorizations[0];
    let day = auth.day;
    match kind {
        Forgery::RandomToken => auth.day_token = DayToken::from_bytes(plan.gen()),
        Forgery::OtherCredentialToken => {
            let others: Vec<&Credential> =
                credentials.iter().filter(|c| c.vc.vc_id != cred.vc.vc_id && c.vc.valid_on(day)).collect();
            auth.day_token = match others.get(plan.gen_range(0..others.len().max(1))) {
                Some(other) => wallet.get(&other.vc.vc_id).and_then(|r| r.day_token(day)).expect("valid"),
                None => DayToken::from_bytes(plan.gen()),
            };
        }
        Forgery::OtherDayKey => {
            let shift = if plan.gen_bool(0.5) || day.0 == 0 { day.0 + 1 } else { day.0 - 1 };
            auth.day_key = holder_keys[cred.holder].delegate(DayIndex(shift), crypto);
        }
        Forgery::OtherHolderKey => {
            let n = holder_keys.len();
            let other = if n > 1 { (cred.holder + plan.gen_range(1..n)) % n } else { cred.holder };
            let other_day = if n > 1 { day } else { day.next() };
            auth.day_key = holder_keys[other].delegate(other_day, crypto);
        }
    }
}
