use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use curator_core::annotator::AnnotatorError;
use curator_core::catalog::CatalogError;
use curator_core::index::{IndexError, QueryParseError};
use curator_core::store::StoreError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Every `code` an error response can carry.
pub const ERROR_CODES: &[&str] = &[
    "query_parse_error",
    "bad_request",
    "not_found",
    "path_not_found",
    "unknown_series",
    "unknown_dataset",
    "unknown_annotator",
    "unknown_job",
    "duplicate_name",
    "invalid_name",
    "invalid_tag",
    "invalid_manifest",
    "invalid_thumbnail_config",
    "overlapping_add_remove",
    "page_too_large",
    "field_not_in_distribution",
    "missing_series_uid",
    "series_uid_mismatch",
    "annotator_failed",
    "annotator_timeout",
    "protocol_violation",
    "unreferenced_segmentation",
    "thumbnail_error",
    "storage_error",
    "io_error",
    "internal_error",
];

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "query_parse_error" => StatusCode::UNPROCESSABLE_ENTITY,
        "not_found" | "path_not_found" => StatusCode::NOT_FOUND,
        c if c.starts_with("unknown_") => StatusCode::NOT_FOUND,
        c if c.starts_with("duplicate_") => StatusCode::CONFLICT,
        c if c.starts_with("invalid_") => StatusCode::BAD_REQUEST,
        "bad_request"
        | "overlapping_add_remove"
        | "page_too_large"
        | "field_not_in_distribution"
        | "missing_series_uid"
        | "series_uid_mismatch" => StatusCode::BAD_REQUEST,
        "annotator_failed" | "annotator_timeout" | "protocol_violation" | "unreferenced_segmentation" => {
            StatusCode::BAD_GATEWAY
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Map<String, Value>>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code), "unlisted error code {code}");
        ApiError {
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        if let Value::Object(m) = details {
            self.details = Some(m);
        }
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new("bad_request", message)
    }

    pub fn status(&self) -> StatusCode {
        status_for(&self.code)
    }
}

impl From<QueryParseError> for ApiError {
    fn from(e: QueryParseError) -> Self {
        ApiError::new("query_parse_error", e.to_string())
            .with_details(json!({"position": e.position, "expected": e.expected}))
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let err = ApiError::new(e.code(), e.to_string());
        match &e {
            StoreError::OverlappingAddRemove(uids) => err.with_details(json!({ "series_uids": uids })),
            _ => err,
        }
    }
}

impl From<AnnotatorError> for ApiError {
    fn from(e: AnnotatorError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
