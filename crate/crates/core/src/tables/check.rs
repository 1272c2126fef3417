use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{TableError, TableParams};
use crate::crypto::{check_bucket, CheckDigest, DayIndex};

/// One day's check table: `c` sorted buckets of digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckTableSnapshot {
    pub day: DayIndex,
    pub params: TableParams,
    pub buckets: Vec<Vec<CheckDigest>>,
}

/// The contiguous bucket range `[j·c/σ, (j+1)·c/σ)` of one check table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSegment {
    pub day: DayIndex,
    pub params: TableParams,
    pub segment_index: u64,
    pub buckets: Vec<Vec<CheckDigest>>,
}

/// Places every digest in its bucket, sorted and deduplicated.
pub fn build_check_table<I>(entries: I, params: TableParams, day: DayIndex) -> CheckTableSnapshot
where
    I: IntoIterator<Item = CheckDigest>,
{
    let mut sets = vec![BTreeSet::new(); params.c() as usize];
    for digest in entries {
        sets[check_bucket(&digest, params.c()).as_usize()].insert(digest);
    }
    CheckTableSnapshot {
        day,
        params,
        buckets: sets.into_iter().map(|set| set.into_iter().collect()).collect(),
    }
}

pub fn segment_for_digest(digest: &CheckDigest, params: &TableParams) -> u64 {
    check_bucket(digest, params.c()).0 / params.buckets_per_segment()
}

fn segment_range(params: &TableParams, j: u64) -> Range<usize> {
    let width = params.buckets_per_segment() as usize;
    let start = j as usize * width;
    start..start + width
}

impl CheckTableSnapshot {
    pub fn segment(&self, j: u64) -> Result<CheckSegment, TableError> {
        if j >= self.params.sigma() {
            return Err(TableError::IndexOutOfRange { index: j, size: self.params.sigma() });
        }
        Ok(CheckSegment {
            day: self.day,
            params: self.params,
            segment_index: j,
            buckets: self.buckets[segment_range(&self.params, j)].to_vec(),
        })
    }

    pub fn contains(&self, digest: &CheckDigest) -> bool {
        self.buckets[check_bucket(digest, self.params.c()).as_usize()]
            .binary_search(digest)
            .is_ok()
    }

    pub fn digest_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn max_bucket_load(&self) -> usize {
        self.buckets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Reassembles a table from all of its segments, in any order.
    pub fn from_segments(mut segments: Vec<CheckSegment>) -> Result<Self, TableError> {
        segments.sort_by_key(|s| s.segment_index);
        let first = segments.first().ok_or_else(|| TableError::Params("no segments".into()))?;
        let (day, params) = (first.day, first.params);
        let complete = segments.len() as u64 == params.sigma()
            && segments.iter().enumerate().all(|(i, s)| {
                s.segment_index == i as u64 && s.day == day && s.params == params
            });
        if !complete {
            return Err(TableError::Params("segments do not form one table".into()));
        }
        let buckets = segments.into_iter().flat_map(|s| s.buckets).collect();
        Ok(CheckTableSnapshot { day, params, buckets })
    }
}

impl CheckSegment {
    /// Binary search for `digest` in its bucket. The digest must map to this
    /// segment.
    pub fn segment_contains(&self, digest: &CheckDigest) -> Result<bool, TableError> {
        let expected = segment_for_digest(digest, &self.params);
        if expected != self.segment_index {
            return Err(TableError::WrongSegment { expected, actual: self.segment_index });
        }
        let bucket = check_bucket(digest, self.params.c()).as_usize();
        let local = bucket - segment_range(&self.params, self.segment_index).start;
        let list = self.buckets.get(local).ok_or_else(|| {
            TableError::Integrity(format!("segment is missing bucket {bucket}"))
        })?;
        Ok(list.binary_search(digest).is_ok())
    }

    pub fn digest_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }
}
