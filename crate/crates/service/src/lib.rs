//! HTTP API over a curator catalog, plus the directory ingest and annotator job pool it uses.
//!
//! Handlers only parse parameters and serialize the result of one catalog
//! call; the helpers in [`api`] are shared with the command line so both
//! front ends answer identically.

pub mod api;
pub mod config;
pub mod error;
pub mod ingest;
pub mod jobs;
mod routes;

use std::collections::BTreeMap;
use std::sync::Arc;

use curator_core::annotator::{load_manifests, AnnotatorManifest};
use curator_core::catalog::{Catalog, CatalogError};

pub use config::Config;
pub use error::{ApiError, ERROR_CODES};
pub use ingest::{ingest_directory, IngestError, IngestReport};
pub use jobs::{Job, JobStatus, JobTable};
pub use routes::router;

/// Shared state behind every handler.
#[derive(Clone)]
pub struct AppState {
    pub catalog: Arc<Catalog>,
    pub annotators: Arc<BTreeMap<String, AnnotatorManifest>>,
    pub jobs: Arc<JobTable>,
    pub thumb_edge: u32,
}

impl AppState {
    pub fn new(catalog: Arc<Catalog>, manifests: Vec<AnnotatorManifest>, cfg: &Config) -> Self {
        let work = cfg.data_dir.join("work");
        AppState {
            catalog,
            annotators: Arc::new(manifests.into_iter().map(|m| (m.name.clone(), m)).collect()),
            jobs: JobTable::new(cfg.annotator_workers, work),
            thumb_edge: cfg.thumb_edge,
        }
    }

    /// Opens the catalog and annotator manifests named by `cfg`.
    pub fn open(cfg: &Config) -> Result<Self, CatalogError> {
        let (catalog, report) = Catalog::open(&cfg.data_dir, &cfg.archive_dir())?;
        if !report.reconciled.is_empty() || !report.reindexed.is_empty() {
            tracing::warn!(
                reconciled = report.reconciled.len(),
                reindexed = report.reindexed.len(),
                "catalog repaired at open"
            );
        }
        Ok(AppState::new(Arc::new(catalog), load_manifests(&cfg.annotator_dir), cfg))
    }
}

/// Serves until ctrl-c.
pub async fn serve(cfg: Config) -> std::io::Result<()> {
    let state = AppState::open(&cfg).map_err(|e| std::io::Error::other(e.to_string()))?;
    let app = router(state, &cfg.static_dir);
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
