use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Body of every error response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    /// Stable machine-readable code.
    pub code: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("{0:?} is not in the pending batch")]
    NotInBatch(String),
    #[error("{0}")]
    OneToOne(String),
    #[error("{0}")]
    ConflictingLabel(String),
    #[error("the engine is retraining; try again shortly")]
    Busy,
    #[error("the campaign has used its budget")]
    Finished,
    #[error("an earlier iteration failed: {0}")]
    Failed(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Engine(#[from] alea_core::Error),
    #[error("session persistence failed: {0}")]
    Persistence(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownEntity(_) => "unknown_entity",
            ApiError::NotInBatch(_) => "not_in_batch",
            ApiError::OneToOne(_) => "one_to_one_violation",
            ApiError::ConflictingLabel(_) => "conflicting_label",
            ApiError::Busy => "busy",
            ApiError::Finished => "campaign_finished",
            ApiError::Failed(_) => "iteration_failed",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Engine(_) => "engine_error",
            ApiError::Persistence(_) => "persistence_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownEntity(_) => StatusCode::NOT_FOUND,
            ApiError::NotInBatch(_) | ApiError::OneToOne(_) | ApiError::ConflictingLabel(_) | ApiError::Finished => {
                StatusCode::CONFLICT
            }
            ApiError::Busy => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Failed(_) | ApiError::Engine(_) | ApiError::Persistence(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code().into(),
                message: self.to_string(),
            },
        };
        (self.status(), Json(body)).into_response()
    }
}
