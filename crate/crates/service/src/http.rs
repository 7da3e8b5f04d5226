//! JSON over HTTP: `POST /api` takes a request with its `op` field,
//! `POST /api/{op}` takes the same object without it.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::api::{Request, Service};
use crate::ServiceError;

fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
        ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        ServiceError::Conflict(_) => StatusCode::CONFLICT,
        ServiceError::Client(_) => StatusCode::BAD_GATEWAY,
        ServiceError::Io(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(e: ServiceError) -> HttpResponse {
    let body = json!({"ok": false, "error": {"kind": e.kind(), "message": e.to_string()}});
    (status_of(&e), Json(body)).into_response()
}

async fn dispatch(service: Arc<Service>, body: Value) -> HttpResponse {
    let req: Request = match serde_json::from_value(body) {
        Ok(r) => r,
        Err(e) => return error_response(ServiceError::BadRequest(e.to_string())),
    };
    let op = req.op();
    let out = tokio::task::spawn_blocking(move || service.handle(req)).await;
    match out {
        Ok(Ok(resp)) => Json(json!({"ok": true, "result": resp})).into_response(),
        Ok(Err(e)) => {
            tracing::warn!(op, error = %e, "request failed");
            error_response(e)
        }
        Err(e) => error_response(ServiceError::Internal(e.to_string())),
    }
}

async fn api(State(service): State<Arc<Service>>, Json(body): Json<Value>) -> HttpResponse {
    dispatch(service, body).await
}

async fn api_op(State(service): State<Arc<Service>>, Path(op): Path<String>, Json(mut body): Json<Value>) -> HttpResponse {
    match body.as_object_mut() {
        Some(obj) => {
            obj.insert("op".into(), Value::String(op));
        }
        None => return error_response(ServiceError::BadRequest("request body must be an object".into())),
    }
    dispatch(service, body).await
}

async fn health() -> Json<Value> {
    Json(json!({"ok": true}))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api", post(api))
        .route("/api/health", get(health))
        .route("/api/:op", post(api_op))
        .with_state(service)
}

pub async fn serve(addr: SocketAddr, service: Arc<Service>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(service)).await
}
