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


// Gossip of signed heads: two clients compare what the server told them.
// A server that shows different histories under the same key is caught
// with a transferable proof.

use vams::identity::{DataProviderIdentifier, EncryptionKeyPair};
use vams::merkle::EvidenceKind;
use vams::roles::{detect, request, HeadSource, RequestBody};
use vams::sandbox::Sandbox;

fn history(category: &str) -> Sandbox {
    // Same seed, same signing key.
    let mut sb = Sandbox::new(4, 3);
    let user = EncryptionKeyPair::from_secret([1; 32]).public();
    let auditor = sb.auditor_keys.public();
    let id_dp = DataProviderIdentifier::new(b"provider".to_vec()).expect("non-empty");
    let d = sb.deriver(b"agent");
    for n in 0..8 {
        let now = sb.now();
        request(&sb.server, &sb.agent, &d, &id_dp, n, &RequestBody::new(category, ""), &user, &auditor, now, &mut sb.rng)
            .expect("accepted");
    }
    sb.flush();
    sb
}

pub fn run_example() -> Vec<EvidenceKind> {
    let (alice_view, bob_view) = (history("care"), history("marketing"));
    let vk = alice_view.verifying_key();
    let sources = [
        HeadSource { name: "alice".into(), heads: Ok(vec![alice_view.server.get_signed_heads()]) },
        HeadSource { name: "bob".into(), heads: Ok(vec![bob_view.server.get_signed_heads()]) },
    ];
    let report = detect(&sources, &vk, None);
    for e in &report.evidence {
        println!("{:?}, verifies on its own: {}", e.kind(), e.is_valid(&vk));
    }
    report.evidence.iter().map(|e| e.kind()).collect()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
