use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use phishshoot::assessment::AssessmentError;
use phishshoot::session::{SessionError, SessionId};

use crate::protocol::{ErrorBody, ErrorDetail};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no session {0}")]
    UnknownSession(SessionId),
    #[error("no corpus named {0:?}")]
    UnknownCorpus(String),
    #[error("seq_expected {sent} is stale; the session is at seq {current}")]
    StaleSeq { sent: u64, current: u64 },
    #[error("action_id {0:?} was already used for a different request")]
    DuplicateActionId(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Storage(e.to_string())
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) | ApiError::UnknownCorpus(_) => StatusCode::NOT_FOUND,
            ApiError::StaleSeq { .. } | ApiError::DuplicateActionId(_) => StatusCode::CONFLICT,
            ApiError::Validation(_) => StatusCode::BAD_REQUEST,
            ApiError::Session(SessionError::Internal(_)) | ApiError::Storage(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            ApiError::Session(_) | ApiError::Assessment(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "UnknownSession",
            ApiError::UnknownCorpus(_) => "UnknownCorpus",
            ApiError::StaleSeq { .. } => "StaleSeq",
            ApiError::DuplicateActionId(_) => "DuplicateActionId",
            ApiError::Session(SessionError::Internal(_)) | ApiError::Storage(_) => "InternalError",
            ApiError::Validation(_) | ApiError::Session(_) | ApiError::Assessment(_) => "ValidationError",
        }
    }

    /// Finer cause of a `ValidationError`.
    pub fn reason(&self) -> Option<&'static str> {
        match self {
            ApiError::Session(e) => Some(e.code()),
            ApiError::Assessment(_) => Some("InvalidSubmission"),
            ApiError::Validation(_) => Some("MalformedRequest"),
            _ => None,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: ErrorDetail {
                code: self.code().to_owned(),
                reason: self.reason().map(str::to_owned),
                message: self.to_string(),
                current_seq: match self {
                    ApiError::StaleSeq { current, .. } => Some(*current),
                    _ => None,
                },
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
