use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use super::PublicParamsDocument;
use crate::crypto::DayIndex;
use crate::tables::{
    snapshot_file_name, write_atomic, CheckTableSnapshot, RevocationTableSnapshot, SnapshotFile,
    SnapshotKind, TableError,
};

pub const PARAMS_FILE: &str = "params.json";

/// Named published files. Publication is a whole-file replace.
pub trait SnapshotStore: Send + Sync {
    fn read(&self, name: &str) -> io::Result<Option<Arc<[u8]>>>;

    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()>;

    fn remove(&self, name: &str) -> io::Result<()>;

    fn names(&self) -> io::Result<Vec<String>>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    files: RwLock<BTreeMap<String, Arc<[u8]>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        MemoryStore::default()
    }
}

impl SnapshotStore for MemoryStore {
    fn read(&self, name: &str) -> io::Result<Option<Arc<[u8]>>> {
        Ok(self.files.read().expect("store lock").get(name).cloned())
    }

    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        self.files.write().expect("store lock").insert(name.to_string(), Arc::from(bytes));
        Ok(())
    }

    fn remove(&self, name: &str) -> io::Result<()> {
        self.files.write().expect("store lock").remove(name);
        Ok(())
    }

    fn names(&self) -> io::Result<Vec<String>> {
        Ok(self.files.read().expect("store lock").keys().cloned().collect())
    }
}

/// Files in one directory, replaced atomically.
#[derive(Debug, Clone)]
pub struct DirStore {
    dir: PathBuf,
}

impl DirStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, name: &str) -> io::Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "bad file name"));
        }
        Ok(self.dir.join(name))
    }
}

impl SnapshotStore for DirStore {
    fn read(&self, name: &str) -> io::Result<Option<Arc<[u8]>>> {
        match fs::read(self.path(name)?) {
            Ok(bytes) => Ok(Some(Arc::from(bytes))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn put(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.path(name)?, bytes).map_err(|e| match e {
            TableError::Io(io) => io,
            other => io::Error::other(other.to_string()),
        })
    }

    fn remove(&self, name: &str) -> io::Result<()> {
        match fs::remove_file(self.path(name)?) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    fn names(&self) -> io::Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            if let Some(name) = entry?.file_name().to_str() {
                names.push(name.to_string());
            }
        }
        names.sort();
        Ok(names)
    }
}

pub fn publish_params<S: SnapshotStore + ?Sized>(store: &S, doc: &PublicParamsDocument) -> io::Result<()> {
    store.put(PARAMS_FILE, &doc.to_bytes())
}

/// Publishes both tables of one day. The check table goes first so a day
/// never has a revocation table without its check table.
pub fn publish_day<S: SnapshotStore + ?Sized>(
    store: &S,
    check: &CheckTableSnapshot,
    revocation: &RevocationTableSnapshot,
) -> io::Result<()> {
    store.put(&snapshot_file_name(SnapshotKind::Check, check.day), &check.to_file_bytes())?;
    store.put(
        &snapshot_file_name(SnapshotKind::Revocation, revocation.day()),
        &revocation.to_file_bytes(),
    )
}

/// Removes published days older than `oldest`.
pub fn prune_days<S: SnapshotStore + ?Sized>(store: &S, oldest: DayIndex) -> io::Result<()> {
    for name in store.names()? {
        if let Some(day) = parse_day_file(&name) {
            if day < oldest {
                store.remove(&name)?;
            }
        }
    }
    Ok(())
}

fn parse_day_file(name: &str) -> Option<DayIndex> {
    let stem = name.strip_suffix(".snap")?;
    let day = stem.strip_prefix("check-").or_else(|| stem.strip_prefix("revocation-"))?;
    day.parse().ok().map(DayIndex)
}
