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


// Percent error of recovered supports as the record count grows.

use vams::experiments::{run_settings, Setting};

pub fn run_example() -> Vec<f64> {
    let settings: Vec<Setting> =
        [1_000, 10_000, 100_000].iter().map(|&r| Setting { k: 1, r, t: 4, size: 2, support: 0.1 }).collect();
    let result = run_settings("records", &settings, 10, 0).expect("valid settings");
    settings
        .iter()
        .map(|s| {
            let row = result.find(s).expect("every setting is summarised");
            println!("r={:>6}: mean error {:.2}% (variance {:.2})", s.r, row.mean_percent_error, row.variance);
            row.mean_percent_error
        })
        .collect()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
