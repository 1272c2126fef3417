//! `revoca`: one binary, one subcommand group per protocol role.

mod error;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use revoca_core::actors::{
    write_private, IssuerState, Nonce, Pkg, Presentation, SourceError, TrustStore, VerifiableCredential,
    Verifier, Wallet, ISSUER_FILE, NONCE_LEN, PRESENTATION_FILE, TRUST_FILE, WALLET_FILE,
};
use revoca_core::ahibe::{HolderKey, MasterPublicParams, MasterSecret, SecurityLevel};
use revoca_core::crypto::{Clock, DayIndex, PublicKey, Seed, SigningKey, VcId};
use revoca_core::encoding::{canonical_decode, canonical_encode};
use revoca_core::service::{
    prune_days, publish_day, publish_params, Client, DirStore, HttpTransport, InProcess,
    PublicParamsDocument, Response, Server, Transport,
};
use revoca_core::sim::{self, ScenarioConfig, TransportKind};
use revoca_core::tables::{RevocationDocument, RevocationStatus, TableParams, DEFAULT_MIN_ANONYMITY, DEFAULT_RETENTION_DAYS};

use error::CliError;

const PKG_SECRET_FILE: &str = "pkg.secret";
const MPP_FILE: &str = "mpp.txt";
const PUBLIC_DIR: &str = "public";

#[derive(Parser)]
#[command(name = "revoca", version, about = "Day-scoped revocation checking for verifiable credentials")]
struct Cli {
    /// Directory holding keys, registry, wallet and published snapshots.
    #[arg(long, global = true, env = "REVOCA_STATE_DIR", default_value = "revoca-state")]
    state_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Pkg(PkgCommand),
    #[command(subcommand)]
    Issuer(IssuerCommand),
    #[command(subcommand)]
    Holder(HolderCommand),
    #[command(subcommand)]
    Verifier(VerifierCommand),
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Test,
    Standard,
}

impl From<Scheme> for SecurityLevel {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Test => SecurityLevel::Test,
            Scheme::Standard => SecurityLevel::Standard,
        }
    }
}

#[derive(Subcommand)]
enum PkgCommand {
    /// Generate master parameters and the master secret.
    Setup {
        #[arg(long, value_enum, default_value = "standard")]
        scheme: Scheme,
    },
    /// Extract the holder key for a root identity.
    Extract {
        #[arg(long)]
        root: String,
        /// Defaults to `<state>/<root>.hk`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IssuerCommand {
    /// Create the issuer registry and publish day tables.
    Init {
        #[arg(long)]
        issuer_id: String,
        #[arg(long, default_value_t = 1024)]
        d: u64,
        #[arg(long, default_value_t = 256)]
        c: u64,
        /// Fixed segment count. Derived from `--population` when absent.
        #[arg(long)]
        sigma: Option<u64>,
        #[arg(long, default_value_t = 0)]
        population: u64,
        #[arg(long, default_value_t = DEFAULT_MIN_ANONYMITY)]
        min_anonymity: u64,
        #[arg(long, default_value_t = 0)]
        day: u64,
        #[arg(long, default_value_t = DEFAULT_RETENTION_DAYS)]
        retention: u64,
        /// Unix time of day 0. Defaults to now.
        #[arg(long)]
        epoch: Option<u64>,
        #[arg(long, default_value_t = 86_400)]
        granularity: u64,
    },
    /// Issue a credential; writes the credential and its seed for the holder.
    Issue {
        #[arg(long)]
        root: String,
        /// File written by `holder keygen` (`.pub`).
        #[arg(long)]
        pop_public_key: PathBuf,
        #[arg(long)]
        expiry_day: u64,
        /// `key=value`, repeatable.
        #[arg(long = "claim", value_parser = parse_pair)]
        claims: Vec<(String, String)>,
        /// Defaults to `<state>/<vc_id>.vc`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Publish a revocation document for the current day.
    Revoke {
        #[arg(long)]
        vc_id: VcId,
        #[arg(long, value_enum, default_value = "revoked")]
        status: Status,
        #[arg(long, default_value = "")]
        reason: String,
        #[arg(long = "constraint", value_parser = parse_pair)]
        constraints: Vec<(String, String)>,
        /// Defaults to the current day.
        #[arg(long)]
        effective_from: Option<u64>,
        /// Defaults to one past the last published sequence.
        #[arg(long)]
        sequence: Option<u64>,
    },
    /// Advance to a new day: `N` or `+N`.
    Rollover {
        #[arg(long)]
        day: DayArg,
    },
    /// Serve published snapshots over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Status {
    Revoked,
    Suspended,
    Conditioned,
}

impl From<Status> for RevocationStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Revoked => RevocationStatus::Revoked,
            Status::Suspended => RevocationStatus::Suspended,
            Status::Conditioned => RevocationStatus::Conditioned,
        }
    }
}

#[derive(Clone, Copy)]
enum DayArg {
    Absolute(u64),
    Relative(u64),
}

impl FromStr for DayArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let number = |t: &str| t.parse::<u64>().map_err(|e| format!("bad day {s:?}: {e}"));
        match s.strip_prefix('+') {
            Some(rest) => number(rest).map(DayArg::Relative),
            None => number(s).map(DayArg::Absolute),
        }
    }
}

impl DayArg {
    fn resolve(self, current: DayIndex) -> DayIndex {
        match self {
            DayArg::Absolute(d) => DayIndex(d),
            DayArg::Relative(n) => DayIndex(current.0.saturating_add(n)),
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// Fetch from a running server instead of `<state>/public`.
    #[arg(long)]
    server: Option<String>,
    /// Defaults to `<state>/trust.store`.
    #[arg(long)]
    trust: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HolderCommand {
    /// Generate a proof-of-possession key pair (`FILE` and `FILE.pub`).
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify and store an issued credential in the wallet.
    Store {
        #[arg(long)]
        credential: PathBuf,
        #[arg(long)]
        holder_key: PathBuf,
        #[arg(long)]
        pop_key: PathBuf,
        #[arg(long)]
        trust: Option<PathBuf>,
    },
    /// Build a presentation for the given days.
    Present {
        #[arg(long)]
        vc_id: VcId,
        /// Repeatable.
        #[arg(long = "day", required = true)]
        days: Vec<u64>,
        /// 32 hex characters chosen by the verifier.
        #[arg(long, value_parser = parse_nonce)]
        nonce: Nonce,
        /// Defaults to `<state>/presentation.pres`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Look up the wallet's own revocation status for a day.
    Audit {
        #[arg(long)]
        vc_id: VcId,
        #[arg(long)]
        day: u64,
        #[command(flatten)]
        source: SourceArgs,
    },
}

#[derive(Subcommand)]
enum VerifierCommand {
    /// Check a presentation; prints the per-day result.
    Check {
        #[arg(long)]
        presentation: PathBuf,
        #[arg(long, value_parser = parse_nonce)]
        nonce: Nonce,
        /// Defaults to the day of the published clock.
        #[arg(long)]
        today: Option<u64>,
        #[command(flatten)]
        source: SourceArgs,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run a full multi-day scenario.
    Run(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 200)]
    holders: u64,
    #[arg(long, default_value_t = 2)]
    vcs_per_holder: u64,
    #[arg(long, default_value_t = 10)]
    days: u64,
    #[arg(long, default_value_t = 0.05)]
    daily_revocation_rate: f64,
    #[arg(long, default_value_t = 120)]
    presentations_per_day: u64,
    #[arg(long, default_value_t = 0.3)]
    past_auth_probability: f64,
    #[arg(long, default_value_t = 0.2)]
    future_auth_probability: f64,
    #[arg(long, default_value_t = 0.0)]
    forgery_rate: f64,
    #[arg(long, default_value_t = 42)]
    rng_seed: u64,
    #[arg(long, default_value_t = 256)]
    d: u64,
    #[arg(long, default_value_t = 64)]
    c: u64,
    #[arg(long, default_value_t = 100)]
    min_anonymity: u64,
    #[arg(long, value_enum, default_value = "test")]
    scheme: Scheme,
    /// Run the verifier over loopback HTTP instead of in-process.
    #[arg(long)]
    http: bool,
    #[arg(long, default_value = "report.rep")]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

fn parse_nonce(s: &str) -> Result<Nonce, String> {
    let bytes = hex::decode(s).map_err(|e| e.to_string())?;
    bytes.try_into().map_err(|_| format!("nonce must be {NONCE_LEN} bytes"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim().to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.diagnostic());
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let state = State { dir: cli.state_dir };
    match cli.command {
        Command::Pkg(cmd) => pkg(&state, cmd),
        Command::Issuer(cmd) => issuer(&state, cmd),
        Command::Holder(cmd) => holder(&state, cmd),
        Command::Verifier(cmd) => verifier(&state, cmd),
        Command::Sim(SimCommand::Run(args)) => sim_run(args),
    }
}

struct State {
    dir: PathBuf,
}

impl State {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ensure(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))
    }

    fn public(&self) -> DirStore {
        DirStore::new(self.path(PUBLIC_DIR))
    }

    fn mpp(&self) -> Result<MasterPublicParams, CliError> {
        let path = self.path(MPP_FILE);
        MasterPublicParams::from_text(read_text(&path)?.trim()).map_err(|e| CliError::decode(&path, e))
    }

    fn issuer(&self) -> Result<IssuerState, CliError> {
        let path = self.path(ISSUER_FILE);
        IssuerState::from_state_bytes(&read(&path)?).map_err(|e| CliError::decode(&path, e))
    }

    fn save_issuer(&self, issuer: &IssuerState) -> Result<(), CliError> {
        Ok(write_private(&self.path(ISSUER_FILE), &issuer.to_state_bytes())?)
    }

    fn wallet(&self) -> Result<Wallet, CliError> {
        let path = self.path(WALLET_FILE);
        if !path.exists() {
            return Ok(Wallet::new());
        }
        Wallet::from_bytes(&read(&path)?).map_err(|e| CliError::decode(&path, e))
    }

    fn trust(&self, explicit: Option<&Path>) -> Result<TrustStore, CliError> {
        let path = explicit.map_or_else(|| self.path(TRUST_FILE), Path::to_path_buf);
        decode_file(&path)
    }

    fn source(&self, server: Option<&str>) -> Client<AnySource> {
        Client::new(match server {
            Some(url) => AnySource::Http(HttpTransport::new(url)),
            None => AnySource::Local(InProcess::new(std::sync::Arc::new(self.public()))),
        })
    }
}

enum AnySource {
    Local(InProcess<DirStore>),
    Http(HttpTransport),
}

impl Transport for AnySource {
    fn get(&mut self, path: &str) -> Result<Response, SourceError> {
        match self {
            AnySource::Local(t) => t.get(path),
            AnySource::Http(t) => t.get(path),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn decode_file<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    canonical_decode(&read(path)?).map_err(|e| CliError::decode(path, e))
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    canonical_encode(value).expect("value encodes")
}

fn write_public(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    revoca_core::tables::write_atomic(path, bytes).map_err(CliError::from)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", String::from_utf8(encode(value)).expect("canonical text is UTF-8"));
}

#[derive(Serialize, serde::Deserialize)]
struct PkgSecretFile {
    mpp: MasterPublicParams,
    msk: String,
}

#[derive(Serialize, serde::Deserialize)]
struct IssuedFile {
    credential: VerifiableCredential,
    seed: Seed,
}

fn pkg(state: &State, cmd: PkgCommand) -> Result<(), CliError> {
    match cmd {
        PkgCommand::Setup { scheme } => {
            state.ensure()?;
            let pkg = Pkg::setup(scheme.into(), &mut OsRng);
            let secret = PkgSecretFile { mpp: pkg.public_params().clone(), msk: pkg.master_secret().to_text() };
            write_private(&state.path(PKG_SECRET_FILE), &encode(&secret))?;
            write_public(&state.path(MPP_FILE), pkg.public_params().to_text().as_bytes())?;
            println!("{}", pkg.public_params().scheme_id());
        }
        PkgCommand::Extract { root, out } => {
            let path = state.path(PKG_SECRET_FILE);
            let secret: PkgSecretFile = decode_file(&path)?;
            let msk = MasterSecret::from_text(&secret.msk).map_err(|e| CliError::decode(&path, e))?;
            let pkg = Pkg::from_parts(secret.mpp, msk)?;
            let hk = pkg.extract(&root, &mut OsRng)?;
            let out = out.unwrap_or_else(|| state.path(&format!("{root}.hk")));
            write_private(&out, hk.to_text().as_bytes())?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn publish_current(state: &State, issuer: &IssuerState) -> Result<(), CliError> {
    let store = state.public();
    let (check, revocation) = issuer.export_day();
    publish_day(&store, &check, &revocation).map_err(|e| CliError::io(store.dir(), e))?;
    let oldest = DayIndex(issuer.current_day().0.saturating_sub(issuer.retention_days()));
    prune_days(&store, oldest).map_err(|e| CliError::io(store.dir(), e))
}

fn issuer(state: &State, cmd: IssuerCommand) -> Result<(), CliError> {
    match cmd {
        IssuerCommand::Init {
            issuer_id,
            d,
            c,
            sigma,
            population,
            min_anonymity,
            day,
            retention,
            epoch,
            granularity,
        } => {
            let params = match sigma {
                Some(sigma) => TableParams::new(d, c, sigma, min_anonymity)?,
                None => TableParams::for_population(d, c, population, min_anonymity)?,
            };
            if granularity == 0 {
                return Err(CliError::Usage("--granularity must be positive".into()));
            }
            let mpp = state.mpp()?;
            let issuer = IssuerState::init(issuer_id.clone(), mpp.clone(), params, DayIndex(day), &mut OsRng)
                .with_retention(retention);
            let clock = Clock { epoch_unix: epoch.unwrap_or_else(now), granularity_seconds: granularity };
            let public = state.path(PUBLIC_DIR);
            fs::create_dir_all(&public).map_err(|e| CliError::io(&public, e))?;
            let doc = PublicParamsDocument::sign(mpp, params, clock, issuer_id.clone(), issuer.signing_key());
            publish_params(&state.public(), &doc).map_err(|e| CliError::io(&public, e))?;
            let mut trust = TrustStore::new();
            trust.insert(issuer_id, issuer.public_key());
            write_public(&state.path(TRUST_FILE), &encode(&trust))?;
            state.save_issuer(&issuer)?;
            publish_current(state, &issuer)?;
            println!("{params}");
        }
        IssuerCommand::Issue { root, pop_public_key, expiry_day, claims, out } => {
            let mut issuer = state.issuer()?;
            let pop: PublicKey = decode_file(&pop_public_key)?;
            let claims: BTreeMap<_, _> = claims.into_iter().collect();
            let (credential, seed) = issuer.issue(&root, claims, DayIndex(expiry_day), pop, &mut OsRng)?;
            let vc_id = credential.vc_id;
            let out = out.unwrap_or_else(|| state.path(&format!("{vc_id}.vc")));
            write_private(&out, &encode(&IssuedFile { credential, seed }))?;
            state.save_issuer(&issuer)?;
            publish_current(state, &issuer)?;
            println!("{vc_id}");
        }
        IssuerCommand::Revoke { vc_id, status, reason, constraints, effective_from, sequence } => {
            let mut issuer = state.issuer()?;
            let today = issuer.current_day();
            let last = issuer
                .registry()
                .get(&vc_id)
                .and_then(|r| r.revocations.last())
                .map_or(0, |r| r.document.sequence);
            let doc = RevocationDocument {
                vc_id,
                status: status.into(),
                reason,
                constraints: constraints.into_iter().collect(),
                effective_from: DayIndex(effective_from.unwrap_or(today.0)),
                sequence: sequence.unwrap_or(last + 1),
            };
            issuer.revoke(&vc_id, doc, today)?;
            state.save_issuer(&issuer)?;
            publish_current(state, &issuer)?;
        }
        IssuerCommand::Rollover { day } => {
            let mut issuer = state.issuer()?;
            let target = day.resolve(issuer.current_day());
            issuer.rollover(target)?;
            state.save_issuer(&issuer)?;
            publish_current(state, &issuer)?;
            println!("{target}");
        }
        IssuerCommand::Serve { bind } => {
            let server = Server::serve(&state.path(PUBLIC_DIR), &bind)?;
            eprintln!("serving {} on {}", state.path(PUBLIC_DIR).display(), server.url());
            server.wait();
        }
    }
    Ok(())
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn holder(state: &State, cmd: HolderCommand) -> Result<(), CliError> {
    match cmd {
        HolderCommand::Keygen { out } => {
            let key = SigningKey::generate(&mut OsRng);
            write_private(&out, &encode(&key))?;
            let mut public = out.into_os_string();
            public.push(".pub");
            write_public(Path::new(&public), &encode(&key.public_key()))?;
        }
        HolderCommand::Store { credential, holder_key, pop_key, trust } => {
            state.ensure()?;
            let issued: IssuedFile = decode_file(&credential)?;
            let hk = HolderKey::from_text(read_text(&holder_key)?.trim())
                .map_err(|e| CliError::decode(&holder_key, e))?;
            let pop: SigningKey = decode_file(&pop_key)?;
            let trust = state.trust(trust.as_deref())?;
            let mut wallet = state.wallet()?;
            let vc_id = issued.credential.vc_id;
            wallet.store(&trust, issued.credential, issued.seed, hk, pop)?;
            write_private(&state.path(WALLET_FILE), &wallet.to_bytes())?;
            println!("{vc_id}");
        }
        HolderCommand::Present { vc_id, days, nonce, out } => {
            let wallet = state.wallet()?;
            let days: Vec<DayIndex> = days.into_iter().map(DayIndex).collect();
            let presentation = wallet.present(&vc_id, &days, nonce, &mut OsRng)?;
            let out = out.unwrap_or_else(|| state.path(PRESENTATION_FILE));
            write_public(&out, &presentation.to_bytes())?;
            println!("{}", out.display());
        }
        HolderCommand::Audit { vc_id, day, source } => {
            let trust = state.trust(source.trust.as_deref())?;
            let mut client = state.source(source.server.as_deref());
            let params = verified_params(&mut client, &trust)?;
            let table = client.fetch_revocation_table(DayIndex(day))?;
            let documents = state.wallet()?.audit(&params.mpp, &vc_id, DayIndex(day), &table.value, &mut OsRng)?;
            print_json(&documents);
        }
    }
    Ok(())
}

fn verified_params(client: &mut Client<AnySource>, trust: &TrustStore) -> Result<PublicParamsDocument, CliError> {
    let params = client.fetch_params()?.value;
    if !params.verify(trust) {
        return Err(SourceError::Corrupt("public parameters fail signature check".into()).into());
    }
    Ok(params)
}

fn verifier(state: &State, cmd: VerifierCommand) -> Result<(), CliError> {
    match cmd {
        VerifierCommand::Check { presentation, nonce, today, source } => {
            let trust = state.trust(source.trust.as_deref())?;
            let presentation: Presentation = decode_file(&presentation)?;
            let mut client = state.source(source.server.as_deref());
            let params = verified_params(&mut client, &trust)?;
            let today = today.map_or_else(|| params.day_at(now()), DayIndex);
            let mut verifier = Verifier::new(params.mpp, params.table_params, trust);
            let result = verifier.check(&presentation, &nonce, &mut client, today, &mut OsRng)?;
            print_json(&result);
        }
    }
    Ok(())
}

fn sim_run(args: SimArgs) -> Result<(), CliError> {
    let config = ScenarioConfig {
        holders: args.holders,
        vcs_per_holder: args.vcs_per_holder,
        days: args.days,
        daily_revocation_rate: args.daily_revocation_rate,
        presentations_per_day: args.presentations_per_day,
        past_auth_probability: args.past_auth_probability,
        future_auth_probability: args.future_auth_probability,
        forgery_rate: args.forgery_rate,
        rng_seed: args.rng_seed,
        d: args.d,
        c: args.c,
        min_anonymity: args.min_anonymity,
        scheme: args.scheme.into(),
        transport: if args.http { TransportKind::Http } else { TransportKind::InProcess },
    };
    let report = sim::run(&config)?;
    write_public(&args.out, &report.to_bytes())?;
    print!("{}", report.render_table());
    Ok(())
}
