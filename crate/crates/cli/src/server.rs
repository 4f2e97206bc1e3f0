use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tokio::sync::oneshot;

use crate::bundle::EngineBundle;
use crate::error::{CliError, Result};
use crate::latency::{LiveStats, Sample};

pub struct AppState {
    pub bundle: EngineBundle,
    pub stats: LiveStats,
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, msg: &str) -> Response {
    json(status, serde_json::json!({ "error": msg }).to_string().into_bytes())
}

fn bad_request(msg: String) -> Response {
    error(StatusCode::BAD_REQUEST, &msg)
}

async fn recommend(
    State(state): State<Arc<AppState>>,
    query: std::result::Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let Ok(Query(q)) = query else {
        return bad_request("malformed query string".into());
    };
    let Some(author) = q.get("author").filter(|a| !a.is_empty()) else {
        return bad_request("missing parameter: author".into());
    };
    let k = match q.get("k").map(|s| s.parse::<usize>()) {
        None => 10,
        Some(Ok(k)) if k >= 1 => k,
        Some(_) => return bad_request("k must be a positive integer".into()),
    };
    let alpha = match q.get("alpha").map(|s| s.parse::<f64>()) {
        None => state.bundle.hybrid().alpha,
        Some(Ok(a)) if (0.0..=1.0).contains(&a) => a,
        Some(_) => return bad_request("alpha must be a number in [0, 1]".into()),
    };
    if !state.bundle.recommender().contains(author) {
        return error(StatusCode::NOT_FOUND, &format!("unknown author {author:?}"));
    }
    let t0 = Instant::now();
    let pool = match state.bundle.candidates(author) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    };
    let t1 = Instant::now();
    let items = match state.bundle.recommender().rerank(author, &pool, alpha, k) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    };
    let t2 = Instant::now();
    state.stats.record(&Sample {
        retrieval_ns: (t1 - t0).as_nanos() as u64,
        rerank_ns: (t2 - t1).as_nanos() as u64,
        total_ns: (t2 - t0).as_nanos() as u64,
    });
    let body = crate::bundle::RecommendResponse {
        query: author.clone(),
        alpha,
        items,
    };
    json(StatusCode::OK, serde_json::to_vec(&body).expect("response serializes"))
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let body = serde_json::json!({ "status": "ok", "build": state.bundle.metadata() });
    json(StatusCode::OK, body.to_string().into_bytes())
}

async fn stats(State(state): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, serde_json::to_vec(&state.stats.report()).expect("report serializes"))
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/recommend", get(recommend))
        .route("/healthz", get(healthz))
        .route("/stats", get(stats))
        .fallback(not_found)
        .with_state(state)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Server(e.to_string()))
}

/// Serves until Ctrl-C. `on_bound` sees the bound address first.
pub fn serve(bundle: EngineBundle, bind: &str, on_bound: impl FnOnce(SocketAddr)) -> Result<()> {
    let rt = runtime()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::Server(format!("bind {bind}: {e}")))?;
        on_bound(listener.local_addr().map_err(|e| CliError::Server(e.to_string()))?);
        let app = router(Arc::new(AppState {
            bundle,
            stats: LiveStats::default(),
        }));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Server(e.to_string()))
    })
}

/// A server on a background thread, stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
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

pub fn spawn(bundle: EngineBundle, bind: &str) -> Result<ServerHandle> {
    let rt = runtime()?;
    let std_listener = std::net::TcpListener::bind(bind).map_err(|e| CliError::Server(format!("bind {bind}: {e}")))?;
    std_listener
        .set_nonblocking(true)
        .map_err(|e| CliError::Server(e.to_string()))?;
    let addr = std_listener.local_addr().map_err(|e| CliError::Server(e.to_string()))?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(Arc::new(AppState {
        bundle,
        stats: LiveStats::default(),
    }));
    let thread = std::thread::spawn(move || {
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener registers");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr,
        stop: Some(tx),
        thread: Some(thread),
    })
}
