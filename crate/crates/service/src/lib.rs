//! Die-link datasets over HTTP: upload a zip of coin images, let the pairs be
//! scored in the background, then page through the ranking, record
//! evaluations and export the results file.

pub mod api;
pub mod config;
pub mod datastore;
pub mod jobs;
pub mod upload;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{router, AppState};
pub use config::{Config, ConfigError};
pub use datastore::{DatasetKind, DatasetRecord, DatasetState, DatasetSummary, Store, StoreError};
pub use jobs::{JobTicket, Jobs};
pub use upload::{validate_upload, UploadEntry, UploadError, UploadLimits};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open datastore: {0}")]
    Store(#[from] StoreError),
    #[error("cannot start scoring workers: {0}")]
    Workers(#[from] rayon::ThreadPoolBuildError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the datastore under `config.data_dir`, resumes unfinished jobs and
/// returns the application state.
pub fn open_state(config: &Config) -> Result<AppState, ServeError> {
    config.ensure_data_dir()?;
    let store = Store::open(&config.data_dir)?;
    let jobs = Jobs::new(store.clone(), config.workers, config.seed)?;
    jobs.resume()?;
    Ok(AppState {
        store,
        jobs,
        token: Arc::from(config.token.as_str()),
        limits: config.limits,
    })
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    state: AppState,
}

impl Server {
    pub async fn bind(config: &Config) -> Result<Self, ServeError> {
        let state = open_state(config)?;
        let listener = TcpListener::bind(config.bind)
            .await
            .map_err(|source| ServeError::Bind {
                addr: config.bind,
                source,
            })?;
        Ok(Self { listener, state })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}
