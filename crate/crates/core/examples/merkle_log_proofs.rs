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


// An append-only log: prove that an entry is in it, and that a later
// version extends an earlier one.

use vams::merkle::{leaf_hash, verify_consistency_roots, verify_inclusion_hash, MerkleLog};

pub fn run_example() -> (u64, u64) {
    let mut log = MerkleLog::new();
    for i in 0..7u32 {
        log.append(format!("entry {i}").as_bytes());
    }
    let old_size = log.len();
    let old_root = log.root();
    for i in 7..20u32 {
        log.append(format!("entry {i}").as_bytes());
    }
    println!("log of {} entries, root {}", log.len(), log.root());

    let proof = log.prove_inclusion(3, log.len()).expect("index in range");
    verify_inclusion_hash(&log.root(), &leaf_hash(b"entry 3"), &proof).expect("entry 3 is logged");
    println!("entry 3 included: {} sibling hashes", proof.path.len());
    assert!(verify_inclusion_hash(&log.root(), &leaf_hash(b"entry 99"), &proof).is_err());

    let cons = log.prove_consistency(old_size, log.len()).expect("sizes in range");
    verify_consistency_roots(old_size, &old_root, log.len(), &log.root(), &cons.path).expect("append-only");
    println!("size {old_size} -> {} is append-only: {} hashes", log.len(), cons.path.len());
    (old_size, log.len())
}

#[allow(dead_code)]
fn main() {
    run_example();
}
