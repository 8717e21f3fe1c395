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


// Submission throughput as the map batch size grows.

use std::time::Duration;

use vams::experiments::{bench_throughput, BenchOptions};

pub fn run_example() -> usize {
    let opts = BenchOptions {
        batch_sizes: vec![1, 10, 100],
        duration: Duration::from_millis(300),
        file_backed: false,
        ..Default::default()
    };
    let report = bench_throughput(&opts).expect("in-memory server");
    for row in &report.rows {
        println!("batch {:>4}: {:>7.0} tx/s, mean latency {:.1} ms", row.batch_size, row.throughput_tps, row.mean_latency_ms);
    }
    report.rows.len()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
