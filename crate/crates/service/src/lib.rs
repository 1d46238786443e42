//! HTTP API over cloudgate analysis sessions.
//!
//! Every endpoint lives under `/api` and answers JSON. Failures use the
//! [`ApiError`] body. Mutations carry the session `revision` they were based
//! on and are rejected with `409 stale_revision` when another write got there
//! first. Sessions are persisted as one `.session.json` file each.

mod error;
mod routes;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use cloudgate_core::{DatasetSource, Repository, RepositoryError};
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use error::ApiError;
pub use routes::AppState;
pub use store::{valid_session_id, SessionStore};

pub const DEFAULT_PORT: u16 = 7340;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub host: String,
    /// `0` asks the OS for a free port.
    pub port: u16,
    /// Dataset file; the bundled catalogue when `None`.
    pub dataset: Option<PathBuf>,
    pub sessions_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            dataset: None,
            sessions_dir: PathBuf::from("sessions"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("dataset: {0}")]
    Dataset(#[from] RepositoryError),
    #[error("sessions directory {path}: {source}")]
    Sessions { path: PathBuf, source: std::io::Error },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

/// Builds the router over an opened session directory.
pub async fn app(repo: Repository, sessions_dir: &std::path::Path) -> Result<Router, ServiceError> {
    let store = SessionStore::open(sessions_dir, &repo)
        .await
        .map_err(|source| ServiceError::Sessions { path: sessions_dir.to_path_buf(), source })?;
    Ok(routes::router(Arc::new(AppState { repo, store })))
}

/// A running server.
pub struct ServerHandle {
    pub local_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    /// Asks the server to stop and waits for in-flight requests.
    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.wait().await
    }

    /// Waits until the server stops on its own.
    pub async fn wait(self) -> Result<(), ServiceError> {
        match self.task.await {
            Ok(r) => r.map_err(ServiceError::Serve),
            Err(e) => Err(ServiceError::Serve(std::io::Error::other(e))),
        }
    }
}

/// Loads the dataset, opens the session directory and starts listening.
pub async fn serve(config: ServiceConfig) -> Result<ServerHandle, ServiceError> {
    let source = match &config.dataset {
        Some(p) => DatasetSource::Path(p.clone()),
        None => DatasetSource::Bundled,
    };
    let repo = cloudgate_core::repository::load_repository(&source)?;
    let router = app(repo, &config.sessions_dir).await?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    let local_addr = listener.local_addr().map_err(|source| ServiceError::Bind { addr, source })?;
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%local_addr, "listening");
    Ok(ServerHandle { local_addr, shutdown: Some(tx), task })
}
