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


//! Every example runs and produces what it claims to.

mod http_roundtrip {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/http_roundtrip.rs"));
}

#[test]
fn http_roundtrip_example_runs() {
    assert_eq!(http_roundtrip::run_example(), 4);
}
