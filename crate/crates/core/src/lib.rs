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

//! Verifiable access-request logging.
//!
//! Agents append signed, dual-encrypted access requests to an append-only
//! Merkle log that backs a sparse Merkle map keyed by unlinkable common
//! identifiers. Users look up their own requests with inclusion and
//! non-inclusion proofs, auditors replay the log against published map heads,
//! and anyone can check published audit statistics against a MultiBallot
//! share dataset.

pub mod codec;
pub mod heads;
pub mod merkle;
pub mod identity;
pub mod envelope;
pub mod storage;
pub mod replay;
pub mod api;
pub mod server;
pub mod stats;
pub mod multiballot;
pub mod bounds;
pub mod roles;
pub mod sandbox;
pub mod experiments;
