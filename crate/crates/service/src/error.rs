use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use geneblend_core::{GenerateError, LatentError, SessionError, StoreError};

/// JSON error body: `{"code": "...", "message": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let body = Json(Body {
            code: self.code,
            message: &self.message,
        });
        (self.status, body).into_response()
    }
}

impl From<LatentError> for ApiError {
    fn from(e: LatentError) -> Self {
        use LatentError as L;
        let code = match &e {
            L::AllZeroWeights => "ALL_ZERO_WEIGHTS",
            L::InvalidWeight { .. } => "INVALID_WEIGHT",
            L::NotNormalized { .. } => "NOT_NORMALIZED",
            L::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            L::WeightCountMismatch { .. } => "WEIGHT_COUNT_MISMATCH",
            L::NoGenes => "NO_GENES",
            L::ZeroNormInput { .. } => "ZERO_NORM_INPUT",
            L::DegenerateAngle => "DEGENERATE_ANGLE",
            L::DegenerateBlend => "DEGENERATE_BLEND",
            L::InvalidTruncation(_) => "INVALID_TRUNCATION",
            L::InvalidSigma(_) => "INVALID_SIGMA",
            L::NonFinite { .. } => "NON_FINITE",
            L::InvalidClassMixture(_) => "INVALID_CLASS_MIXTURE",
        };
        Self::bad_request(code, e.to_string())
    }
}

impl From<GenerateError> for ApiError {
    fn from(e: GenerateError) -> Self {
        use GenerateError as G;
        let (status, code) = match &e {
            G::DimensionMismatch { .. } => (StatusCode::BAD_REQUEST, "DIMENSION_MISMATCH"),
            G::InvalidSize { .. } => (StatusCode::BAD_REQUEST, "INVALID_SIZE"),
            G::UnknownBackend(_) => (StatusCode::NOT_FOUND, "UNKNOWN_BACKEND"),
            G::BackendUnavailable(_) => (StatusCode::BAD_GATEWAY, "BACKEND_UNAVAILABLE"),
            G::BackendRejected { .. } => (StatusCode::BAD_GATEWAY, "BACKEND_REJECTED"),
            G::MalformedResponse(_) => (StatusCode::BAD_GATEWAY, "BACKEND_MALFORMED_RESPONSE"),
            G::OutOfDomain { .. } | G::BadChannel(_) | G::Image(_) => (StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StoreError as S;
        match &e {
            S::NotFound | S::InvalidId(_) => Self::not_found("ARTIFACT_NOT_FOUND", "artifact not found"),
            S::InvalidPageSize(_) => Self::bad_request("INVALID_PAGE_SIZE", e.to_string()),
            S::InvalidPage => Self::bad_request("INVALID_PAGE", e.to_string()),
            S::Io { .. } | S::Corrupt(_) | S::DigestMismatch { .. } | S::DuplicateId(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "STORAGE_FAILURE", e.to_string())
            }
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError as S;
        match e {
            S::PromptRequired => Self::bad_request("PROMPT_REQUIRED", e.to_string()),
            S::WrongSlotCount { .. } => Self::bad_request("WRONG_SLOT_COUNT", e.to_string()),
            S::UnknownSource(_) => Self::not_found("UNKNOWN_SOURCE", e.to_string()),
            S::BadSlotIndex { .. } => Self::not_found("UNKNOWN_SLOT", e.to_string()),
            S::PoolTooSmall { .. } | S::Config(_) | S::Image(_) => Self::internal(e.to_string()),
            S::Latent(e) => e.into(),
            S::Generate(e) => e.into(),
            S::Store(e) => e.into(),
        }
    }
}
