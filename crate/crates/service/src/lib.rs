//! Local HTTP service for reviewing matches: browse scans and candidates,
//! submit annotations, run QC sampling and export training quadruples.

pub mod api;
pub mod error;
pub mod render;
pub mod routes;
pub mod state;

use std::net::SocketAddr;
use std::path::Path;

pub use error::ServiceError;
pub use routes::router;
pub use state::AppState;

/// Loads the bundles under `root` and serves until the task is cancelled.
pub async fn serve(root: &Path, addr: SocketAddr) -> Result<(), ServiceError> {
    let app = AppState::load(root)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Conflict(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(
        "serving {} scene(s) from {} on {addr}",
        app.scenes.len(),
        root.display()
    );
    axum::serve(listener, router(app)).await.map_err(|e| {
        ServiceError::Core(replica_core::Error::Io {
            path: root.to_path_buf(),
            source: e,
        })
    })
}
