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

// How many elements per record can a MultiBallot dataset publish before an
// adversary holding some of a user's shares can single out the rest?
//
// Prints the safe element count and its reconstruction probability for
// 3- and 5-share schemes across population sizes, at a 0.01% threshold.

use vams::bounds::{table2, valid_combo_probability, write_table2_csv};

pub fn run_example() -> Vec<vams::bounds::Table2Cell> {
    for k in 1..=2 {
        println!("k={k}: P(random shares form a valid ballot) = {:.6}", valid_combo_probability(k));
    }
    let cells = table2().expect("fixed parameters are valid");
    write_table2_csv(&cells, std::io::stdout()).expect("stdout");
    cells
}

#[allow(dead_code)]
fn main() {
    run_example();
}
