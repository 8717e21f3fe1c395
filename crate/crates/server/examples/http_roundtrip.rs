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


// Serve a log over HTTP and drive it with the blocking client: every role
// works the same against a remote server as against an in-process one.

use vams::api::LogApi;
use vams::identity::{DataProviderIdentifier, EncryptionKeyPair};
use vams::roles::{audit, check, request, AuditCursor, CheckOptions, RequestBody};
use vams::sandbox::Sandbox;
use vams_server::{HttpLogClient, ServerHandle};

pub fn run_example() -> u64 {
    let mut sb = Sandbox::new(2, 8);
    let handle = ServerHandle::spawn("127.0.0.1:0", sb.server.clone()).expect("bind a free port");
    let http = HttpLogClient::new(&handle.url()).expect("valid URL");
    println!("serving on {}", handle.url());

    let user = EncryptionKeyPair::from_secret([6; 32]);
    let id_dp = DataProviderIdentifier::new(b"lab".to_vec()).expect("non-empty");
    let d = sb.deriver(b"clinic");
    let auditor = sb.auditor_keys.public();
    for n in 0..4 {
        let now = sb.now();
        let receipt = request(&http, &sb.agent, &d, &id_dp, n, &RequestBody::new("results", ""), &user.public(), &auditor, now, &mut sb.rng)
            .expect("registered agent")
            .1;
        println!("POST /v1/request -> index {}", receipt.index);
    }
    sb.flush();

    let vk = sb.verifying_key();
    let heads = http.signed_heads().expect("reachable");
    println!("GET heads: log size {}, map revision {}", heads.log.tree_size, heads.map.revision);
    let found = check(&http, &vk, &d, &id_dp, &user, CheckOptions::default()).expect("honest server");
    let (report, _) = audit(&http, &vk, &sb.auditor_keys, &AuditCursor::default()).expect("honest server");
    println!("user found {}, auditor classified {}", found.entries.len(), report.valid);
    handle.stop().expect("clean shutdown");
    report.valid
}

#[allow(dead_code)]
fn main() {
    run_example();
}
