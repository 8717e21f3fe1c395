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


// An auditor publishes itemset supports with a MultiBallot share dataset.
// Anyone can recompute the supports from the shares, and each user can
// confirm their own shares are there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vams::identity::CommonId;
use vams::multiballot::{Record, RecordSet};
use vams::roles::{monitor, prepare_publication, PublishOptions, DEFAULT_DISTRIBUTION_TOLERANCE};

pub fn run_example() -> (bool, Vec<&'static str>) {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let records: Vec<Record> = (0..2000u64)
        .map(|i| {
            let mut id = [0u8; 16];
            id[..8].copy_from_slice(&i.to_be_bytes());
            let bits = if rng.gen_bool(0.4) { 0b110 } else { rng.gen_range(0..8) };
            Record { id_c: CommonId(id), bits }
        })
        .collect();
    let dataset = RecordSet::new(3, records).expect("three elements");
    let opts = PublishOptions {
        k: 1,
        queries: Vec::new(),
        threshold: 1e-4,
        known: None,
        tolerance: None,
        seed: [5; 32],
        dpriv_location: Some("https://example.org/dpriv.csv".into()),
        timestamp: 0,
    };
    let (manifest, dpriv) = prepare_publication(&dataset, &opts).expect("three elements are safe");
    for s in &manifest.itemsets {
        println!("support{} = {:.4}", s.elements, s.support);
    }
    println!("declared tolerance {:.4}, {} shares", manifest.tolerance, dpriv.shares.len());

    let me = dataset.records[17];
    let honest = monitor(&manifest, &dpriv, Some((me.id_c, me.bits)), DEFAULT_DISTRIBUTION_TOLERANCE);
    println!("honest publication accepted: {}", honest.accepted);

    let mut inflated = manifest.clone();
    inflated.itemsets[0].support += 2.0 * manifest.tolerance;
    let caught = monitor(&inflated, &dpriv, None, DEFAULT_DISTRIBUTION_TOLERANCE);
    let codes: Vec<&'static str> = caught.rejections.iter().map(|r| r.code()).collect();
    println!("inflated support rejected with {codes:?}");
    (honest.accepted, codes)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
