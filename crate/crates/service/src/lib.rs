//! HTTP service over one precomputed matching session.
//!
//! Matrices, scores and proposals are computed once when the session is
//! built; clients re-run selection and evaluation through
//! `POST /api/reselect` without repeating the search.
//!
//! Routes (all accept an optional `session` query parameter):
//!
//! - `GET /api/session`
//! - `GET /api/matrix?kind=raw|enhanced|scores&method=&downsample=`
//! - `POST /api/reselect` with a JSON selection config
//! - `GET /api/pr-curve?method=&search=`
//! - `GET /api/match/{query}?context=&method=`
//! - `GET /api/image?traverse=reference|query&index=` (PNG)
//!
//! Errors are JSON `{"error": ..., "detail": ...}` with a 4xx/5xx status.

mod api;
mod session;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{block_means, router, ApiError, AppState, MatrixPayload, Registry, ReselectRequest, MAX_CELLS};
pub use session::{Artifacts, MethodArtifacts, ReselectError, Selection, Session};

/// Serves `session` until the process is stopped.
pub async fn serve(addr: SocketAddr, session: Session) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving session {} on http://{}", session.id, listener.local_addr()?);
    axum::serve(listener, router(Arc::new(Registry::single(session)))).await
}
