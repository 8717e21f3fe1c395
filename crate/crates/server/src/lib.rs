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


//! HTTP+JSON front end for a [`LogApi`] and a blocking client that speaks it.
//! Binary fields travel as lowercase hex.

mod client;

pub use client::HttpLogClient;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use vams::api::{parse_map_key, ApiError, EntryResponse, LogApi, RejectCode, WireError};
use vams::envelope::{RequestEnvelope, SignedManifest};

type Api = Arc<dyn LogApi>;

struct HttpError(ApiError);

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ApiError::Rejected { code: RejectCode::RejectedFormat, .. } | ApiError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::Rejected { .. } => StatusCode::FORBIDDEN,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Internal(_) | ApiError::Transport(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(WireError::from(&self.0))).into_response()
    }
}

type Reply<T> = Result<Json<T>, HttpError>;

/// Runs a blocking [`LogApi`] call off the async executor.
async fn call<T, F>(api: Api, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&dyn LogApi) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(api.as_ref()))
        .await
        .map_err(|e| HttpError(ApiError::Internal(e.to_string())))?
        .map(Json)
        .map_err(HttpError)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, HttpError> {
    serde_json::from_slice(body).map_err(|e| HttpError(ApiError::rejected(RejectCode::RejectedFormat, e.to_string())))
}

#[derive(Deserialize)]
struct IndexSize {
    index: u64,
    size: u64,
}

#[derive(Deserialize)]
struct OldNew {
    old: u64,
    new: u64,
}

#[derive(Deserialize)]
struct ProofQuery {
    key: String,
    revision: Option<u64>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn submit_request(State(api): State<Api>, body: Bytes) -> impl IntoResponse {
    let envelope: RequestEnvelope = match parse_body(&body) {
        Ok(e) => e,
        Err(e) => return e.into_response(),
    };
    call(api, move |a| a.submit_request(&envelope)).await.into_response()
}

async fn submit_audit(State(api): State<Api>, body: Bytes) -> impl IntoResponse {
    let manifest: SignedManifest = match parse_body(&body) {
        Ok(m) => m,
        Err(e) => return e.into_response(),
    };
    call(api, move |a| a.submit_audit(&manifest)).await.into_response()
}

/// All routes of the API, served from `api`.
pub fn router(api: Arc<dyn LogApi>) -> Router {
    Router::new()
        .route("/v1/health", get(|| async { Json(Health { status: "ok" }) }))
        .route("/v1/request", post(submit_request))
        .route("/v1/audit", post(submit_audit))
        .route("/v1/heads", get(|State(api): State<Api>| call(api, |a| a.signed_heads())))
        .route("/v1/log/root", get(|State(api): State<Api>| call(api, |a| a.log_root())))
        .route(
            "/v1/log/entry/:index",
            get(|State(api): State<Api>, Path(index): Path<u64>| {
                call(api, move |a| a.log_entry(index).map(|entry| EntryResponse { index, entry }))
            }),
        )
        .route(
            "/v1/log/inclusion",
            get(|State(api): State<Api>, Query(q): Query<IndexSize>| call(api, move |a| a.log_inclusion(q.index, q.size))),
        )
        .route(
            "/v1/log/consistency",
            get(|State(api): State<Api>, Query(q): Query<OldNew>| call(api, move |a| a.log_consistency(q.old, q.new))),
        )
        .route("/v1/map/root", get(|State(api): State<Api>| call(api, |a| a.map_root())))
        .route(
            "/v1/map/proof",
            get(|State(api): State<Api>, Query(q): Query<ProofQuery>| {
                call(api, move |a| a.map_proof(&parse_map_key(&q.key)?, q.revision))
            }),
        )
        .route("/v1/headlog/root", get(|State(api): State<Api>| call(api, |a| a.headlog_root())))
        .route(
            "/v1/headlog/entry/:index",
            get(|State(api): State<Api>, Path(index): Path<u64>| {
                call(api, move |a| a.headlog_entry(index).map(|entry| EntryResponse { index, entry }))
            }),
        )
        .route(
            "/v1/headlog/inclusion",
            get(|State(api): State<Api>, Query(q): Query<IndexSize>| {
                call(api, move |a| a.headlog_inclusion(q.index, q.size))
            }),
        )
        .route(
            "/v1/headlog/consistency",
            get(|State(api): State<Api>, Query(q): Query<OldNew>| {
                call(api, move |a| a.headlog_consistency(q.old, q.new))
            }),
        )
        .with_state(api)
}

/// Serves `api` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    api: Arc<dyn LogApi>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(api)).with_graceful_shutdown(shutdown).await
}

/// A server running on its own runtime thread; stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn spawn(addr: &str, api: Arc<dyn LogApi>) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let local = std_listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("vams-http".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = TcpListener::from_std(std_listener)?;
                serve(listener, api, async {
                    let _ = rx.await;
                })
                .await
            })
        })?;
        Ok(Self { addr: local, stop: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server exits (after [`ServerHandle::stop`] or an error).
    pub fn join(mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.join()
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
