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


// The auditor replays the whole log against every published map head and
// classifies the requests it has not seen yet.

use vams::identity::{DataProviderIdentifier, EncryptionKeyPair};
use vams::roles::{audit, request, AuditCursor, RequestBody};
use vams::sandbox::Sandbox;

pub fn run_example() -> (u64, u64) {
    let mut sb = Sandbox::new(3, 2);
    let user = EncryptionKeyPair::from_secret([4; 32]).public();
    let auditor = sb.auditor_keys.public();
    let id_dp = DataProviderIdentifier::new(b"bank".to_vec()).expect("non-empty");
    let d = sb.deriver(b"lender");
    let submit = |sb: &mut Sandbox, from: u64, to: u64| {
        for n in from..to {
            let now = sb.now();
            let body = RequestBody::new(if n % 2 == 0 { "credit" } else { "fraud" }, "");
            request(&sb.server, &sb.agent, &d, &id_dp, n, &body, &user, &auditor, now, &mut sb.rng).expect("accepted");
        }
        sb.flush();
    };

    submit(&mut sb, 0, 5);
    let vk = sb.verifying_key();
    let (first, cursor) = audit(&sb.server, &vk, &sb.auditor_keys, &AuditCursor::default()).expect("honest log");
    println!("first audit: {} valid, categories {:?}", first.valid, first.categories);

    submit(&mut sb, 5, 9);
    let (second, _) = audit(&sb.server, &vk, &sb.auditor_keys, &cursor).expect("log only grew");
    println!("second audit from size {}: {} new, {} map heads replayed", second.from_size, second.valid, second.map_heads_checked);
    (first.valid, second.valid)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
