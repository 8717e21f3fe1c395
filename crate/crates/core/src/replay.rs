// Copyright 2026 The VAMS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Deterministic log-to-map replay.
//!
//! Every decodable log entry becomes one map write: requests under their
//! common identifier, audit manifests under a reserved per-index key. A key
//! written twice keeps the later entry, and its value records how many
//! earlier entries it displaced so that clients can flag reuse.

use std::collections::HashMap;

use crate::codec::DecodeError;
use crate::envelope::{LogRecord, MapValue};
use crate::merkle::{Digest, MapError, MapRevision, SparseMap};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvalidEntry {
    pub index: u64,
    pub error: DecodeError,
}

/// Incremental replayer. Feeding the same entries in the same batches always
/// yields the same revisions.
#[derive(Clone, Debug, Default)]
pub struct MapReplayer {
    map: SparseMap,
    writes: HashMap<Digest, u32>,
    covered: u64,
    invalid: Vec<InvalidEntry>,
}

impl MapReplayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn map(&self) -> &SparseMap {
        &self.map
    }

    /// Number of log entries consumed so far.
    pub fn covered(&self) -> u64 {
        self.covered
    }

    pub fn invalid(&self) -> &[InvalidEntry] {
        &self.invalid
    }

    /// Applies the next entries of the log as one map revision.
    pub fn apply_batch<E: AsRef<[u8]>>(&mut self, entries: &[E]) -> Result<MapRevision, MapError> {
        let mut batch = Vec::with_capacity(entries.len());
        for entry in entries {
            let index = self.covered;
            self.covered += 1;
            let bytes = entry.as_ref();
            let key = match LogRecord::decode(bytes) {
                Ok(record) => record.map_key_digest(index),
                Err(error) => {
                    self.invalid.push(InvalidEntry { index, error });
                    continue;
                }
            };
            let seen = self.writes.entry(key).or_insert(0);
            let value = MapValue { log_index: index, superseded: *seen, record: bytes.to_vec() };
            *seen += 1;
            if value.superseded > 0 {
                tracing::warn!(key = %key, index, "map key written more than once");
            }
            batch.push((key, value.encode()));
        }
        self.map.set_batch(batch)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub root: Digest,
    pub invalid: Vec<InvalidEntry>,
}

/// Replays a verified log prefix into a fresh map and returns its root.
pub fn replay_log_to_map<E: AsRef<[u8]>>(entries: &[E]) -> ReplayOutcome {
    let mut r = MapReplayer::new();
    let rev = r.apply_batch(entries).expect("replay writes are never empty");
    ReplayOutcome { root: rev.root, invalid: r.invalid }
}
