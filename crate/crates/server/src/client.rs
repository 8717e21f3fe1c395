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


use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::Serialize;
use vams::api::{ApiError, EntryResponse, LogApi, MapLookup, SignedHeads, SubmitReceipt, WireError};
use vams::envelope::{RequestEnvelope, SignedManifest};
use vams::heads::{SignedLogRoot, SignedMapRoot};
use vams::merkle::{ConsistencyProof, Digest, InclusionProof};

/// Blocking [`LogApi`] over the HTTP API. Must not be used from inside an
/// async runtime.
#[derive(Clone, Debug)]
pub struct HttpLogClient {
    base: String,
    http: Client,
}

impl HttpLogClient {
    pub fn new(base_url: &str) -> Result<Self, ApiError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ApiError::Transport(e.to_string()))?;
        Ok(Self { base: base_url.trim_end_matches('/').to_owned(), http })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ApiError> {
        let resp = req.send().map_err(|e| ApiError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.bytes().map_err(|e| ApiError::Transport(e.to_string()))?;
        if status.is_success() {
            serde_json::from_slice(&body).map_err(|e| ApiError::Transport(format!("undecodable response: {e}")))
        } else {
            Err(match serde_json::from_slice::<WireError>(&body) {
                Ok(w) => w.into(),
                Err(_) => ApiError::Transport(format!("HTTP {status}: {}", String::from_utf8_lossy(&body))),
            })
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> Result<T, ApiError> {
        self.send(self.http.get(format!("{}{path}", self.base)).query(query))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ApiError> {
        self.send(self.http.post(format!("{}{path}", self.base)).json(body))
    }

    fn entry(&self, path: String, index: u64) -> Result<Vec<u8>, ApiError> {
        let e: EntryResponse = self.get(&path, &[])?;
        if e.index != index {
            return Err(ApiError::Transport(format!("asked for entry {index}, got {}", e.index)));
        }
        Ok(e.entry)
    }
}

impl LogApi for HttpLogClient {
    fn submit_request(&self, envelope: &RequestEnvelope) -> Result<SubmitReceipt, ApiError> {
        self.post("/v1/request", envelope)
    }

    fn submit_audit(&self, manifest: &SignedManifest) -> Result<SubmitReceipt, ApiError> {
        self.post("/v1/audit", manifest)
    }

    fn log_root(&self) -> Result<SignedLogRoot, ApiError> {
        self.get("/v1/log/root", &[])
    }

    fn log_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.entry(format!("/v1/log/entry/{index}"), index)
    }

    fn log_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.get("/v1/log/inclusion", &[("index", index.to_string()), ("size", size.to_string())])
    }

    fn log_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        self.get("/v1/log/consistency", &[("old", old_size.to_string()), ("new", new_size.to_string())])
    }

    fn map_root(&self) -> Result<SignedMapRoot, ApiError> {
        self.get("/v1/map/root", &[])
    }

    fn map_proof(&self, key: &Digest, revision: Option<u64>) -> Result<MapLookup, ApiError> {
        let mut q = vec![("key", key.to_hex())];
        if let Some(r) = revision {
            q.push(("revision", r.to_string()));
        }
        self.get("/v1/map/proof", &q)
    }

    fn headlog_root(&self) -> Result<SignedLogRoot, ApiError> {
        self.get("/v1/headlog/root", &[])
    }

    fn headlog_entry(&self, index: u64) -> Result<Vec<u8>, ApiError> {
        self.entry(format!("/v1/headlog/entry/{index}"), index)
    }

    fn headlog_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, ApiError> {
        self.get("/v1/headlog/inclusion", &[("index", index.to_string()), ("size", size.to_string())])
    }

    fn headlog_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ApiError> {
        self.get("/v1/headlog/consistency", &[("old", old_size.to_string()), ("new", new_size.to_string())])
    }

    fn signed_heads(&self) -> Result<SignedHeads, ApiError> {
        self.get("/v1/heads", &[])
    }
}
