//! HTTP JSON API over a trained model bundle: schema introspection,
//! candidate action sets, recourse search and what-if evaluation.
//!
//! Every response is a pure function of the bundle and the request body.
//! Errors use the body `{code, message, detail}`: 400 for malformed input,
//! 422 for violated preconditions (already positive, immutable feature in
//! `S`) and 409 when a search ends without a counterfactual, with the
//! partial result in `detail`.

mod error;
mod routes;
mod session;
pub mod views;

pub use error::{ApiError, ErrorBody};
pub use routes::router;
pub use session::{ApiSession, RequestCounts, SessionConfig};

use std::sync::Arc;

/// Serves the API on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, session: Arc<ApiSession>) -> std::io::Result<()> {
    axum::serve(listener, router(session)).await
}
