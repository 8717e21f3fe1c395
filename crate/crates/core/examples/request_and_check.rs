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


// The core loop: an agent logs requests, the user finds and decrypts every
// one of them, and the data provider refuses anything not in the log.

use vams::identity::{DataProviderIdentifier, EncryptionKeyPair};
use vams::roles::{check, provide, request, CheckOptions, RequestBody};
use vams::sandbox::Sandbox;

pub fn run_example() -> usize {
    let mut sb = Sandbox::new(2, 1);
    let user = EncryptionKeyPair::from_secret([9; 32]);
    let id_dp = DataProviderIdentifier::new(b"hospital".to_vec()).expect("non-empty");
    let agent_id = sb.deriver(b"insurer");
    let auditor = sb.auditor_keys.public();
    let mut last = None;
    for (n, category) in ["claims", "claims", "underwriting"].into_iter().enumerate() {
        let now = sb.now();
        let body = RequestBody::new(category, "annual review");
        let (envelope, receipt) =
            request(&sb.server, &sb.agent, &agent_id, &id_dp, n as u64, &body, &user.public(), &auditor, now, &mut sb.rng)
                .expect("registered agent");
        println!("logged {category} at index {}", receipt.index);
        last = Some(envelope.id_c);
    }
    sb.flush();

    let vk = sb.verifying_key();
    let found = check(&sb.server, &vk, &agent_id, &id_dp, &user, CheckOptions::default()).expect("honest server");
    for e in &found.entries {
        println!("session {}: {:?}", e.n, e.body.as_ref().map(|b| &b.category));
    }
    let fetched = provide(&sb.server, &vk, &last.unwrap()).expect("logged");
    println!("provider sees log index {}", fetched.value.log_index);
    found.entries.len()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
