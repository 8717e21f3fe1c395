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


// A broker answers requests on users' behalf by policy and logs each
// decision where the user will find it.

use vams::identity::{DataProviderIdentifier, EncryptionKeyPair};
use vams::roles::{broker_respond, check, BrokerPolicy, BrokerStore, CheckOptions, IncomingRequest, Subscription};
use vams::sandbox::Sandbox;

pub fn run_example() -> Vec<String> {
    let mut sb = Sandbox::new(1, 5);
    let user = EncryptionKeyPair::from_secret([2; 32]);
    let mut store = BrokerStore {
        subscriptions: vec![Subscription { user: "sam".into(), id_dp: "pharmacy".into(), user_public: user.public(), next_n: 0 }],
    };
    let policy: BrokerPolicy = serde_json::from_str(r#"{"allow": ["research"], "deny": ["advertising"]}"#).expect("policy");
    let broker_id = sb.deriver(b"broker's name for sam");
    let auditor = sb.auditor_keys.public();
    for category in ["research", "advertising"] {
        let incoming = IncomingRequest { user: "sam".into(), category: category.into(), purpose: String::new() };
        let now = sb.now();
        let (decision, receipt) =
            broker_respond(&sb.server, &sb.broker, &broker_id, &mut store, &policy, &incoming, &auditor, now, &mut sb.rng)
                .expect("subscribed user");
        println!("{category}: allowed={} ({}), logged at {}", decision.allowed, decision.reason, receipt.index);
    }
    sb.flush();

    let id_dp = DataProviderIdentifier::new(b"pharmacy".to_vec()).expect("non-empty");
    let seen = check(&sb.server, &sb.verifying_key(), &broker_id, &id_dp, &user, CheckOptions::default()).expect("honest");
    seen.entries.iter().filter_map(|e| e.body.as_ref()?.decision.clone()).collect()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
