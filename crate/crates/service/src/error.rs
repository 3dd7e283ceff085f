use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use brahmi_core::OcrError;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

/// JSON error body. `field` names the offending parameter for 422s; `id`
/// correlates a 500 with the server log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Invalid { field: String, message: String },
    NoModel,
    Internal(String),
}

impl ApiError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<OcrError> for ApiError {
    fn from(e: OcrError) -> Self {
        match e {
            OcrError::InvalidParameter { field, reason } => ApiError::invalid(field, reason),
            OcrError::EvenKernel(k) => ApiError::invalid("median_kernel", format!("must be odd, got {k}")),
            OcrError::MalformedImage(_) | OcrError::UnsupportedFormat(_) | OcrError::EmptyImage => {
                ApiError::BadRequest(e.to_string())
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "bad_request".into(),
                    message,
                    field: None,
                    id: None,
                },
            ),
            ApiError::Invalid { field, message } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                ErrorBody {
                    error: "invalid_parameter".into(),
                    message: format!("{field}: {message}"),
                    field: Some(field),
                    id: None,
                },
            ),
            ApiError::NoModel => (
                StatusCode::SERVICE_UNAVAILABLE,
                ErrorBody {
                    error: "no_model".into(),
                    message: "no model is loaded".into(),
                    field: None,
                    id: None,
                },
            ),
            ApiError::Internal(detail) => {
                let id = format!("err-{:08x}", NEXT_ID.fetch_add(1, Ordering::Relaxed));
                tracing::error!(%id, %detail, "request failed");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    ErrorBody {
                        error: "internal".into(),
                        message: "internal error".into(),
                        field: None,
                        id: Some(id),
                    },
                )
            }
        };
        (status, Json(body)).into_response()
    }
}
