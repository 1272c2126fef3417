use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::{CheckSegment, CheckTableSnapshot, RevocationEntry, RevocationTableSnapshot, TableError, TableParams};
use crate::crypto::{check_bucket, DayIndex};
use crate::encoding::{decode_value, encode_value};

pub const SNAPSHOT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Check,
    CheckSegment,
    Revocation,
}

impl SnapshotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SnapshotKind::Check => "check",
            SnapshotKind::CheckSegment => "check-segment",
            SnapshotKind::Revocation => "revocation",
        }
    }
}

impl fmt::Display for SnapshotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value stored in the digest-guarded snapshot format.
pub trait SnapshotFile: Sized {
    const KIND: SnapshotKind;

    fn day(&self) -> DayIndex;

    /// The payload fields, without `version`, `kind` and `sha256`.
    fn body(&self) -> Map<String, Value>;

    fn from_body(body: Map<String, Value>) -> Result<Self, TableError>;

    fn to_file_bytes(&self) -> Vec<u8> {
        let mut fields = self.body();
        fields.insert("kind".into(), Value::from(Self::KIND.as_str()));
        fields.insert("version".into(), Value::from(SNAPSHOT_VERSION));
        let digest = content_digest(&fields);
        fields.insert("sha256".into(), Value::from(digest));
        encode_value(&Value::Object(fields)).expect("snapshot bodies hold no floats or nulls")
    }

    fn from_file_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        let corrupt = |msg: &str| TableError::CorruptSnapshot(msg.to_string());
        let value = decode_value(bytes).map_err(|e| TableError::CorruptSnapshot(e.to_string()))?;
        let Value::Object(mut fields) = value else {
            return Err(corrupt("not an object"));
        };
        let claimed = match fields.remove("sha256") {
            Some(Value::String(s)) => s,
            _ => return Err(corrupt("missing sha256")),
        };
        if content_digest(&fields) != claimed {
            return Err(corrupt("content digest mismatch"));
        }
        if fields.remove("version") != Some(Value::from(SNAPSHOT_VERSION)) {
            return Err(corrupt("unsupported version"));
        }
        if fields.remove("kind") != Some(Value::from(Self::KIND.as_str())) {
            return Err(TableError::CorruptSnapshot(format!("expected kind {}", Self::KIND)));
        }
        Self::from_body(fields)
    }
}

fn content_digest(fields: &Map<String, Value>) -> String {
    let bytes = encode_value(&Value::Object(fields.clone())).unwrap_or_default();
    hex::encode(Sha256::digest(bytes))
}

fn to_body<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("snapshot payloads serialize to objects"),
    }
}

fn from_body<T: for<'de> Deserialize<'de>>(body: Map<String, Value>) -> Result<T, TableError> {
    serde_json::from_value(Value::Object(body)).map_err(|e| TableError::CorruptSnapshot(e.to_string()))
}

/// Checks that each bucket list is strictly sorted and holds only digests
/// that hash into it. `first` is the global index of `buckets[0]`.
fn validate_check_buckets(
    buckets: &[Vec<crate::crypto::CheckDigest>],
    params: &TableParams,
    first: u64,
    expected_len: u64,
) -> Result<(), TableError> {
    if buckets.len() as u64 != expected_len {
        return Err(TableError::CorruptSnapshot(format!(
            "expected {expected_len} buckets, found {}",
            buckets.len()
        )));
    }
    for (i, list) in buckets.iter().enumerate() {
        let index = first + i as u64;
        let placed = list.iter().all(|d| check_bucket(d, params.c()).0 == index);
        if !placed || list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TableError::CorruptSnapshot(format!("bucket {index} is malformed")));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckBody {
    day: DayIndex,
    params: TableParams,
    buckets: Vec<Vec<crate::crypto::CheckDigest>>,
}

impl SnapshotFile for CheckTableSnapshot {
    const KIND: SnapshotKind = SnapshotKind::Check;

    fn day(&self) -> DayIndex {
        self.day
    }

    fn body(&self) -> Map<String, Value> {
        to_body(self)
    }

    fn from_body(body: Map<String, Value>) -> Result<Self, TableError> {
        let CheckBody { day, params, buckets } = from_body(body)?;
        validate_check_buckets(&buckets, &params, 0, params.c())?;
        Ok(CheckTableSnapshot { day, params, buckets })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentBody {
    day: DayIndex,
    params: TableParams,
    segment_index: u64,
    buckets: Vec<Vec<crate::crypto::CheckDigest>>,
}

impl SnapshotFile for CheckSegment {
    const KIND: SnapshotKind = SnapshotKind::CheckSegment;

    fn day(&self) -> DayIndex {
        self.day
    }

    fn body(&self) -> Map<String, Value> {
        to_body(self)
    }

    fn from_body(body: Map<String, Value>) -> Result<Self, TableError> {
        let SegmentBody { day, params, segment_index, buckets } = from_body(body)?;
        if segment_index >= params.sigma() {
            return Err(TableError::CorruptSnapshot(format!("segment {segment_index} out of range")));
        }
        let width = params.buckets_per_segment();
        validate_check_buckets(&buckets, &params, segment_index * width, width)?;
        Ok(CheckSegment { day, params, segment_index, buckets })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevocationBody {
    day: DayIndex,
    params: TableParams,
    buckets: Vec<Vec<RevocationEntry>>,
}

impl SnapshotFile for RevocationTableSnapshot {
    const KIND: SnapshotKind = SnapshotKind::Revocation;

    fn day(&self) -> DayIndex {
        RevocationTableSnapshot::day(self)
    }

    fn body(&self) -> Map<String, Value> {
        to_body(&RevocationBody {
            day: RevocationTableSnapshot::day(self),
            params: *self.params(),
            buckets: self.buckets().map(<[RevocationEntry]>::to_vec).collect(),
        })
    }

    fn from_body(body: Map<String, Value>) -> Result<Self, TableError> {
        let RevocationBody { day, params, buckets } = from_body(body)?;
        RevocationTableSnapshot::from_parts(day, params, buckets)
    }
}

pub fn snapshot_file_name(kind: SnapshotKind, day: DayIndex) -> String {
    format!("{kind}-{day}.snap")
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), TableError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("snapshot");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_snapshot<S: SnapshotFile>(snapshot: &S, path: &Path) -> Result<(), TableError> {
    write_atomic(path, &snapshot.to_file_bytes())
}

pub fn read_snapshot<S: SnapshotFile>(path: &Path) -> Result<S, TableError> {
    S::from_file_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahibe::{setup, SecurityLevel};
    use crate::crypto::{BucketIndex, CheckDigest, VcId};
    use crate::tables::{build_check_table, seal_revocation, RevocationDocument, RevocationStatus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn revocation_table(n: usize, rng: &mut ChaCha20Rng) -> RevocationTableSnapshot {
        let (mpp, _) = setup(SecurityLevel::Test, rng);
        let params = TableParams::new(64, 16, 4, 1).unwrap();
        let day = DayIndex(9);
        let mut table = RevocationTableSnapshot::empty(params, day);
        for i in 0..n {
            let doc = RevocationDocument {
                vc_id: VcId::generate(rng),
                status: RevocationStatus::Revoked,
                reason: format!("case {i}"),
                constraints: Default::default(),
                effective_from: day,
                sequence: 1,
            };
            let entry = seal_revocation(&mpp, "holder", day, &doc, rng).unwrap();
            table.push(BucketIndex(rng.gen_range(0..64)), entry).unwrap();
        }
        table
    }

    #[test]
    fn file_names() {
        assert_eq!(snapshot_file_name(SnapshotKind::Check, DayIndex(7)), "check-7.snap");
        assert_eq!(snapshot_file_name(SnapshotKind::Revocation, DayIndex(0)), "revocation-0.snap");
    }

    #[test]
    fn empty_revocation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("revocation-0.snap");
        let table = RevocationTableSnapshot::empty(TableParams::new(8, 4, 2, 1).unwrap(), DayIndex(0));
        write_snapshot(&table, &path).unwrap();
        assert_eq!(read_snapshot::<RevocationTableSnapshot>(&path).unwrap(), table);
    }

    #[test]
    fn large_revocation_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        let table = revocation_table(1_000, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(snapshot_file_name(SnapshotKind::Revocation, DayIndex(9)));
        write_snapshot(&table, &path).unwrap();
        let back: RevocationTableSnapshot = read_snapshot(&path).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.stats().entries, 1_000);
    }

    #[test]
    fn check_and_segment_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let params = TableParams::new(8, 64, 8, 1).unwrap();
        let digests: Vec<CheckDigest> = (0..300).map(|_| CheckDigest::from_bytes(rng.gen())).collect();
        let table = build_check_table(digests, params, DayIndex(2));
        let back = CheckTableSnapshot::from_file_bytes(&table.to_file_bytes()).unwrap();
        assert_eq!(back, table);
        let seg = table.segment(3).unwrap();
        assert_eq!(CheckSegment::from_file_bytes(&seg.to_file_bytes()).unwrap(), seg);
        assert!(CheckTableSnapshot::from_file_bytes(&seg.to_file_bytes()).is_err());
    }

    #[test]
    fn file_layout() {
        let table = build_check_table([], TableParams::new(1, 1, 1, 1).unwrap(), DayIndex(3));
        let bytes = table.to_file_bytes();
        let text = std::str::from_utf8(&bytes).unwrap();
        let unsigned = r#"{"buckets":[[]],"day":3,"kind":"check","params":{"c":1,"d":1,"min_anonymity":1,"sigma":1},"version":"1"}"#;
        let digest = hex::encode(Sha256::digest(unsigned.as_bytes()));
        let expected = format!(
            r#"{{"buckets":[[]],"day":3,"kind":"check","params":{{"c":1,"d":1,"min_anonymity":1,"sigma":1}},"sha256":"{digest}","version":"1"}}"#
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn every_flipped_byte_is_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let table = revocation_table(20, &mut rng);
        let bytes = table.to_file_bytes();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(
                matches!(RevocationTableSnapshot::from_file_bytes(&bad), Err(TableError::CorruptSnapshot(_))),
                "byte {i} flip undetected"
            );
        }
    }

    #[test]
    fn consistent_but_misplaced_digest_rejected() {
        let params = TableParams::new(1, 4, 1, 1).unwrap();
        let mut bytes = [0u8; 32];
        bytes[7] = 1;
        let digest = CheckDigest::from_bytes(bytes);
        let forged = CheckTableSnapshot {
            day: DayIndex(0),
            params,
            buckets: vec![vec![digest], vec![], vec![], vec![]],
        };
        assert!(matches!(
            CheckTableSnapshot::from_file_bytes(&forged.to_file_bytes()),
            Err(TableError::CorruptSnapshot(_))
        ));
    }
}
