//! HTTP service exposing a filesystem store.
//!
//! ```text
//! GET  /healthz
//! PUT  /api/v1/models/{model}/versions/{version}/{kind}s/{id}
//! GET  /api/v1/models/{model}/versions/{version}/{kind}s/{id}[?revision=n]
//! GET  /api/v1/models/{model}/versions/{version}/artifacts[?kind=k]
//! ```
//!
//! Bodies are canonical envelope JSON. Errors are
//! `{"error": code, "detail": text}`.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use super::{ArtifactStore, FsStore, StoreError};
use crate::artifact::{ArtifactEnvelope, ArtifactKind};
use crate::context::{ModelContext, StoreLocator};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    AddressInUse(String),
    #[error("store root {} is not writable: {reason}", .root.display())]
    RootUnwritable { root: PathBuf, reason: String },
    #[error("server I/O error: {0}")]
    Io(#[from] io::Error),
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn bad_request(detail: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "schema_violation",
            detail: detail.into(),
        }
    }

    fn not_found(detail: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            detail: detail.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound { .. } => StatusCode::NOT_FOUND,
            StoreError::SchemaViolation(_) => StatusCode::BAD_REQUEST,
            StoreError::StoreUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        };
        ApiError {
            status,
            code: e.code(),
            detail: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "detail": self.detail})),
        )
            .into_response()
    }
}

#[derive(Clone)]
struct AppState {
    store: FsStore,
}

fn context(state: &AppState, model: String, version: String) -> Result<ModelContext, ApiError> {
    ModelContext::with_locator(
        model,
        version,
        StoreLocator::Local(state.store.root().to_path_buf()),
    )
    .map_err(|e| ApiError::bad_request(e.to_string()))
}

fn collection_kind(collection: &str) -> Result<ArtifactKind, ApiError> {
    ArtifactKind::from_collection(collection)
        .ok_or_else(|| ApiError::not_found(format!("unknown collection {collection:?}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            detail: e.to_string(),
        }),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn put_artifact(
    State(state): State<AppState>,
    UrlPath((model, version, collection, id)): UrlPath<(String, String, String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let kind = collection_kind(&collection)?;
    let ctx = context(&state, model, version)?;
    let envelope =
        ArtifactEnvelope::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if envelope.kind() != kind || envelope.identifier() != id {
        return Err(ApiError::bad_request(format!(
            "document is {} {:?} but the URL names {kind} {id:?}",
            envelope.kind(),
            envelope.identifier()
        )));
    }
    let store = state.store.clone();
    let revision = blocking(move || store.save(&ctx, &envelope)).await?;
    Ok((StatusCode::CREATED, Json(json!({"revision": revision}))).into_response())
}

#[derive(Deserialize)]
struct RevisionQuery {
    revision: Option<u64>,
}

async fn get_artifact(
    State(state): State<AppState>,
    UrlPath((model, version, collection, id)): UrlPath<(String, String, String, String)>,
    Query(query): Query<RevisionQuery>,
) -> Result<Response, ApiError> {
    let kind = collection_kind(&collection)?;
    let ctx = context(&state, model, version)?;
    let store = state.store.clone();
    let (bytes, _) = blocking(move || store.load_raw(&ctx, kind, &id, query.revision)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Deserialize)]
struct KindQuery {
    kind: Option<String>,
}

async fn list_artifacts(
    State(state): State<AppState>,
    UrlPath((model, version)): UrlPath<(String, String)>,
    Query(query): Query<KindQuery>,
) -> Result<Response, ApiError> {
    let kind = match query.kind.as_deref() {
        None => None,
        Some(k) => Some(
            k.parse::<ArtifactKind>()
                .map_err(|e| ApiError::bad_request(e.to_string()))?,
        ),
    };
    let ctx = context(&state, model, version)?;
    let store = state.store.clone();
    let listing = blocking(move || store.list(&ctx, kind)).await?;
    Ok(Json(listing).into_response())
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        %method,
        path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    response
}

/// Routes for a store rooted at `root`.
pub fn router(root: impl Into<PathBuf>) -> Router {
    let state = AppState {
        store: FsStore::new(root),
    };
    Router::new()
        .route("/healthz", get(healthz))
        .route(
            "/api/v1/models/{model}/versions/{version}/artifacts",
            get(list_artifacts),
        )
        .route(
            "/api/v1/models/{model}/versions/{version}/{collection}/{id}",
            get(get_artifact).put(put_artifact),
        )
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

fn check_root(root: &Path) -> Result<(), ServeError> {
    let unwritable = |e: io::Error| ServeError::RootUnwritable {
        root: root.to_path_buf(),
        reason: e.to_string(),
    };
    std::fs::create_dir_all(root).map_err(unwritable)?;
    tempfile::tempfile_in(root).map_err(unwritable)?;
    Ok(())
}

/// A bound, not yet running, server.
pub struct Server {
    listener: TcpListener,
    app: Router,
}

impl Server {
    pub async fn bind(root: impl Into<PathBuf>, address: &str) -> Result<Server, ServeError> {
        let root = root.into();
        check_root(&root)?;
        let listener = TcpListener::bind(address)
            .await
            .map_err(|e| match e.kind() {
                io::ErrorKind::AddrInUse => ServeError::AddressInUse(address.to_string()),
                _ => ServeError::Io(e),
            })?;
        Ok(Server {
            listener,
            app: router(root),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then drains in-flight requests.
    pub async fn run(
        self,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> Result<(), ServeError> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}

/// Serves `root` on `address` until interrupted (Ctrl-C or SIGTERM).
pub async fn serve(root: impl Into<PathBuf>, address: &str) -> Result<(), ServeError> {
    let server = Server::bind(root, address).await?;
    tracing::info!(address = %server.local_addr()?, "artifact store listening");
    server.run(shutdown_signal()).await?;
    tracing::info!("artifact store stopped");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

/// A server running on its own thread and runtime, for embedding in
/// synchronous programs and tests.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), ServeError>>>,
}

impl BackgroundServer {
    pub fn start(root: impl Into<PathBuf>, address: &str) -> Result<BackgroundServer, ServeError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let server = runtime.block_on(Server::bind(root, address))?;
        let addr = server.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("artifact-store".into())
            .spawn(move || {
                runtime.block_on(server.run(async {
                    let _ = rx.await;
                }))
            })?;
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Store URI clients can pass to [`ModelContext::new`].
    pub fn uri(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> Result<(), ServeError> {
        self.stop()
    }

    fn stop(&mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}
