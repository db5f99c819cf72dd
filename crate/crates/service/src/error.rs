use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use replica_core::annotation::FieldError;

use crate::api::API_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid annotation")]
    Invalid(Vec<FieldError>),
    #[error("{0}")]
    Unprocessable(String),
    #[error(transparent)]
    Core(#[from] replica_core::Error),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    v: u32,
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fields: Option<&'a [FieldError]>,
}

impl ServiceError {
    fn parts(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::Unprocessable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable"),
            ServiceError::Core(replica_core::Error::NotFound(_)) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Core(replica_core::Error::InvalidInput(_) | replica_core::Error::Precondition(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable")
            }
            ServiceError::Core(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.parts();
        let fields = match &self {
            ServiceError::Invalid(f) => Some(f.as_slice()),
            _ => None,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("{self}");
        }
        let body = ErrorBody {
            v: API_VERSION,
            error: code,
            message: self.to_string(),
            fields,
        };
        (status, Json(body)).into_response()
    }
}
