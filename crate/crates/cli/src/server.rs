//! Local HTTP service backing the design UI.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::Query;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use serde::Deserialize;

use crate::api::{self, ApiError, ApiResult, ExportFormat, ExportRequest};

pub const DEFAULT_PORT: u16 = 8737;

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::Schema(_) => StatusCode::BAD_REQUEST,
            ApiError::Domain(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        json(status, self.body())
    }
}

fn ok<T: serde::Serialize>(r: ApiResult<T>) -> Response {
    match r {
        Ok(v) => json(StatusCode::OK, api::to_json(&v)),
        Err(e) => e.into_response(),
    }
}

async fn validate(body: Bytes) -> Response {
    ok(api::parse(&body).and_then(|spec| api::validate(&spec)))
}

async fn pattern(body: Bytes) -> Response {
    ok(api::parse(&body).and_then(|req| api::pattern(&req)))
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<ExportFormat>,
}

async fn export(
    query: Result<Query<FormatQuery>, axum::extract::rejection::QueryRejection>,
    body: Bytes,
) -> Response {
    let result = (|| {
        let query = query.map_err(|e| ApiError::Schema(e.body_text()))?;
        let req: ExportRequest = api::parse(&body)?;
        let format = match (query.format, req.format) {
            (Some(a), Some(b)) if a != b => {
                return Err(ApiError::Schema("conflicting formats".into()))
            }
            (a, b) => a.or(b).unwrap_or(ExportFormat::Svg),
        };
        Ok((format, api::export(&req.pattern, format)))
    })();
    match result {
        Ok((format, text)) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, format.content_type())],
            text,
        )
            .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn decode(body: Bytes) -> Response {
    ok(api::parse(&body).and_then(api::decode))
}

async fn sweep(body: Bytes) -> Response {
    let plan = match api::parse(&body) {
        Ok(p) => p,
        Err(e) => return e.into_response(),
    };
    match tokio::task::spawn_blocking(move || api::sweep(&plan)).await {
        Ok(r) => ok(r),
        Err(e) => json(
            StatusCode::INTERNAL_SERVER_ERROR,
            api::to_json(&serde_json::json!({"code": "Internal", "message": e.to_string()})),
        ),
    }
}

async fn not_found() -> Response {
    json(
        StatusCode::NOT_FOUND,
        api::to_json(&serde_json::json!({"code": "NotFound", "message": "no such endpoint"})),
    )
}

pub fn router() -> Router {
    Router::new()
        .route("/api/validate", post(validate))
        .route("/api/pattern", post(pattern))
        .route("/api/export", post(export))
        .route("/api/decode", post(decode))
        .route("/api/sweep", post(sweep))
        .fallback(not_found)
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await
}
