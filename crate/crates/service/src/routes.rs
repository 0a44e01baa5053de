use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::error::ApiError;
use crate::session::ApiSession;
use crate::views::*;

type Shared = State<Arc<ApiSession>>;

pub fn router(session: Arc<ApiSession>) -> Router {
    let origin = match &session.config().allowed_origin {
        Some(o) => HeaderValue::from_str(o).map(AllowOrigin::exact).unwrap_or_else(|_| AllowOrigin::any()),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/schema", get(schema))
        .route("/api/candidates", post(candidates))
        .route("/api/recourse", post(recourse))
        .route("/api/whatif", post(whatif))
        .layer(cors)
        .with_state(session)
}

/// CAE training and search are CPU-bound; keep them off the async workers.
async fn blocking<T, F>(session: Arc<ApiSession>, f: F) -> Result<Json<T>, ApiError>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&ApiSession) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&session))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map(Json)
}

async fn schema(State(session): Shared) -> Json<SchemaView> {
    Json(session.schema())
}

async fn candidates(
    State(session): Shared,
    body: Result<Json<CandidatesRequest>, JsonRejection>,
) -> Result<Json<CandidatesView>, ApiError> {
    let Json(body) = body?;
    blocking(session, move |s| s.candidates(&body)).await
}

async fn recourse(
    State(session): Shared,
    body: Result<Json<RecourseBody>, JsonRejection>,
) -> Result<Json<RecourseView>, ApiError> {
    let Json(body) = body?;
    blocking(session, move |s| s.recourse(&body)).await
}

async fn whatif(State(session): Shared, body: Result<Json<WhatIfBody>, JsonRejection>) -> Result<Json<WhatIfView>, ApiError> {
    let Json(body) = body?;
    blocking(session, move |s| s.whatif(&body)).await
}
