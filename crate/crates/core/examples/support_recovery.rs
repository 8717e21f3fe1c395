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


// Randomized shares hide each record, yet the expected share counts are a
// known linear function of the original counts, so supports come back by
// solving one small system.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vams::experiments::{gen_synthetic, Planted, SyntheticSpec};
use vams::multiballot::generate_share_rows;
use vams::stats::{ElementSet, ShareView};

pub fn run_example() -> (f64, f64) {
    let pair = ElementSet::new(vec![0, 1]).expect("distinct elements");
    let spec = SyntheticSpec {
        r: 100_000,
        t: 4,
        planted: vec![Planted { elements: pair.clone(), support: 0.11 }],
        background: 0.1,
    };
    let original = gen_synthetic(&spec, 6).expect("achievable");
    let truth = original.support(&pair).expect("elements in range");
    let shares = generate_share_rows(&original, 1, &mut ChaCha20Rng::seed_from_u64(7));
    let naive = shares.support(&pair).expect("elements in range");
    let recovered = ShareView { shares: &shares, k: 1 }.support(&pair).expect("well-conditioned");
    println!("support{pair}: original {truth:.4}, raw shares {naive:.4}, recovered {recovered:.4}");
    (truth, recovered)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
