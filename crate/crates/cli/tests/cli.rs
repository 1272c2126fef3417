use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn revoca(state: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revoca"))
        .env("REVOCA_STATE_DIR", state)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(state: &Path, args: &[&str]) -> String {
    let out = revoca(state, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

fn diagnostic(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

const NONCE: &str = "00112233445566778899aabbccddeeff";

/// Runs setup through issuance and wallet storage; returns the credential id.
fn onboard(state: &Path) -> String {
    ok(state, &["pkg", "setup", "--scheme", "test"]);
    ok(state, &["pkg", "extract", "--root", "alice"]);
    ok(state, &["issuer", "init", "--issuer-id", "acme", "--d", "16", "--c", "8", "--sigma", "2", "--epoch", "0"]);
    let pop = state.join("alice.pop");
    ok(state, &["holder", "keygen", "--out", pop.to_str().unwrap()]);
    let pop_pub = state.join("alice.pop.pub");
    let vc_id = ok(
        state,
        &["issuer", "issue", "--root", "alice", "--pop-public-key", pop_pub.to_str().unwrap(), "--expiry-day", "30", "--claim", "age=over-18"],
    );
    let credential = state.join(format!("{vc_id}.vc"));
    let hk = state.join("alice.hk");
    ok(
        state,
        &[
            "holder",
            "store",
            "--credential",
            credential.to_str().unwrap(),
            "--holder-key",
            hk.to_str().unwrap(),
            "--pop-key",
            pop.to_str().unwrap(),
        ],
    );
    vc_id
}

fn check(state: &Path, today: &str) -> Value {
    let pres = state.join("presentation.pres");
    let out = ok(state, &["verifier", "check", "--presentation", pres.to_str().unwrap(), "--nonce", NONCE, "--today", today]);
    serde_json::from_str(&out).unwrap()
}

#[test]
fn init_then_rollover_writes_two_snapshot_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path();
    ok(state, &["pkg", "setup", "--scheme", "test"]);
    ok(state, &["issuer", "init", "--issuer-id", "acme", "--d", "8", "--c", "4"]);
    assert_eq!(ok(state, &["issuer", "rollover", "--day", "+1"]), "1");
    let mut names: Vec<String> = std::fs::read_dir(state.join("public"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["check-0.snap", "check-1.snap", "params.json", "revocation-0.snap", "revocation-1.snap"]);
}

#[test]
fn happy_path_then_revocation() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path();
    let vc_id = onboard(state);
    ok(state, &["holder", "present", "--vc-id", &vc_id, "--day", "0", "--nonce", NONCE]);
    let result = check(state, "0");
    assert_eq!(result["outcomes"][0]["status"], "no_revocation_found");
    assert!(result["segment_bytes"].as_u64().unwrap() > 0);

    ok(state, &["issuer", "revoke", "--vc-id", &vc_id, "--reason", "lost device"]);
    let result = check(state, "0");
    assert_eq!(result["outcomes"][0]["status"], "revoked");
    assert_eq!(result["outcomes"][0]["documents"][0]["reason"], "lost device");

    let audit = ok(state, &["holder", "audit", "--vc-id", &vc_id, "--day", "0"]);
    let audit: Value = serde_json::from_str(&audit).unwrap();
    assert_eq!(audit[0]["sequence"], 1);

    ok(state, &["issuer", "rollover", "--day", "+1"]);
    ok(state, &["holder", "present", "--vc-id", &vc_id, "--day", "0", "--day", "1", "--nonce", NONCE]);
    let result = check(state, "1");
    let statuses: Vec<&Value> = result["outcomes"].as_array().unwrap().iter().map(|o| &o["status"]).collect();
    assert_eq!(statuses, ["revoked", "revoked"]);
}

#[test]
fn tampered_presentation_is_rejected_with_its_class() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path();
    let vc_id = onboard(state);
    ok(state, &["holder", "present", "--vc-id", &vc_id, "--day", "0", "--nonce", NONCE]);
    let pres = state.join("presentation.pres");
    let other_nonce = "ffeeddccbbaa99887766554433221100";
    let out = revoca(state, &["verifier", "check", "--presentation", pres.to_str().unwrap(), "--nonce", other_nonce, "--today", "0"]);
    assert_eq!(out.status.code(), Some(21));
    assert_eq!(diagnostic(&out)["class"], "BadProofOfPossession");

    let mut doc: Value = serde_json::from_slice(&std::fs::read(&pres).unwrap()).unwrap();
    doc["pop_signature"] = doc["credential"]["issuer_signature"].clone();
    std::fs::write(&pres, serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = revoca(state, &["verifier", "check", "--presentation", pres.to_str().unwrap(), "--nonce", NONCE, "--today", "0"]);
    assert_eq!(out.status.code(), Some(21));

    let out = revoca(state, &["holder", "present", "--vc-id", &vc_id, "--day", "99", "--nonce", NONCE]);
    assert_eq!(diagnostic(&out)["class"], "Holder");
}

#[test]
fn usage_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["issuer", "frobnicate"][..], &["verifier", "check", "--nonce", "zz"], &[]] {
        let out = revoca(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(diagnostic(&out)["class"], "Usage");
    }
    let out = revoca(dir.path(), &["issuer", "rollover", "--day", "+1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["class"], "Io");
}

#[test]
fn sim_run_writes_a_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let table = ok(
            dir.path(),
            &["sim", "run", "--holders", "10", "--days", "3", "--presentations-per-day", "10", "--d", "16", "--c", "8", "--min-anonymity", "5", "--out", out.to_str().unwrap()],
        );
        (std::fs::read(out).unwrap(), table)
    };
    let (a, table) = run("a.rep");
    let (b, _) = run("b.rep");
    assert_eq!(a, b);
    assert!(table.contains("total"));
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["totals"]["false_positives"], 0);
    assert_eq!(report["totals"]["false_negatives"], 0);
}
