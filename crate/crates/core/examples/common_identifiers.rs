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


// Per-request identifiers: the agent and the user derive the same `id_c`
// for each session, and nobody else can link two of them. Request bodies
// are sealed once for the user and once for the auditor.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vams::identity::{
    open_payload, seal_payload, AgentIdentifier, CommonIdDeriver, DataProviderIdentifier, EncryptionKeyPair, KdfParams,
};

pub fn run_example() -> Vec<String> {
    let params = KdfParams::new([7; 16]);
    let id_a = AgentIdentifier::new(b"agent's name for the user".to_vec()).expect("non-empty");
    let id_dp = DataProviderIdentifier::new(b"provider's name for the user".to_vec()).expect("non-empty");
    let agent = CommonIdDeriver::for_agent(&id_a, &params);
    let user = CommonIdDeriver::for_agent(&id_a, &params);
    let ids: Vec<String> = (0..3).map(|n| agent.derive(&id_dp, n).expect("session in range").to_hex()).collect();
    for (n, id) in ids.iter().enumerate() {
        assert_eq!(*id, user.derive(&id_dp, n as u64).unwrap().to_hex());
        println!("session {n}: id_c {id}");
    }

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (user_keys, auditor_keys) = (EncryptionKeyPair::generate(&mut rng), EncryptionKeyPair::generate(&mut rng));
    let sealed = seal_payload(b"blood test results", &user_keys.public(), &auditor_keys.public(), &mut rng);
    let opened = open_payload(&sealed.user_ct, &user_keys).expect("sealed for the user");
    assert_eq!(open_payload(&sealed.auditor_ct, &auditor_keys).unwrap(), opened);
    assert!(open_payload(&sealed.user_ct, &auditor_keys).is_err());
    println!("user and auditor both read {:?}", String::from_utf8_lossy(&opened));
    ids
}

#[allow(dead_code)]
fn main() {
    run_example();
}
