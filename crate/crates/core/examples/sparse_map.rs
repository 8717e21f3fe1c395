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


// A versioned sparse Merkle map: every key has a proof, either of its value
// or of its absence, against the root of a given revision.

use vams::merkle::{Digest, SparseMap};

pub fn run_example() -> u64 {
    let mut map = SparseMap::new();
    let key = |s: &str| Digest::sha256(s.as_bytes());
    map.set_batch([(key("alice"), b"v1".to_vec()), (key("bob"), b"v1".to_vec())]).expect("non-empty values");
    let rev = map.set_batch([(key("alice"), b"v2".to_vec())]).expect("non-empty values");
    println!("revision {} root {}", rev.revision, rev.root);

    for (name, revision) in [("alice", 1), ("alice", 2), ("carol", 2)] {
        let proof = map.prove(&key(name), revision).expect("revision exists");
        assert_eq!(proof.compute_root().expect("well-formed proof"), map.root(revision).unwrap());
        let value = proof.value.as_deref().map(String::from_utf8_lossy);
        println!("{name} at revision {revision}: {value:?}");
    }
    rev.revision
}

#[allow(dead_code)]
fn main() {
    run_example();
}
