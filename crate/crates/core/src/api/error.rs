use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, MaskError};
use crate::latent::LatentError;
use crate::pipeline::PipelineError;
use crate::raster::RasterError;
use crate::session::SessionError;
use crate::transfer::TransferError;

/// Error body returned by every endpoint. `code` values are stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: &str) -> Self {
        self.field = Some(field.to_string());
        self
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id}"))
    }

    pub fn job_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "job_not_found", format!("no job {id}"))
    }

    pub fn image_not_found(image: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "image_not_found",
            format!("image {image} has not been uploaded to this session"),
        )
        .with_field("image")
    }

    pub fn bad_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", message)
    }

    pub fn timeout(secs: u64) -> Self {
        Self::new(
            StatusCode::GATEWAY_TIMEOUT,
            "generation_timeout",
            format!("generation exceeded {secs}s"),
        )
    }

    pub fn storage(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string())
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<&LatentError> for ApiError {
    fn from(e: &LatentError) -> Self {
        let (status, code) = match e {
            LatentError::Shape { .. } | LatentError::MaskLength { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "shape_mismatch")
            }
            LatentError::NonFinite(_) => (StatusCode::UNPROCESSABLE_ENTITY, "non_finite"),
            LatentError::Config(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<&BackendError> for ApiError {
    fn from(e: &BackendError) -> Self {
        match e {
            BackendError::Unavailable { .. } => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", e.to_string())
            }
            BackendError::InvalidInput(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_image", e.to_string())
                    .with_field("image")
            }
            BackendError::Latent(l) => l.into(),
            BackendError::Failure(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "generation_failed", e.to_string())
            }
        }
    }
}

impl From<&SessionError> for ApiError {
    fn from(e: &SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::NoTarget => {
                ApiError::new(StatusCode::CONFLICT, "ordering_error", msg).with_field("target")
            }
            SessionError::Duplicate(_) => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_reference", msg).with_field("image")
            }
            SessionError::NotFound(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "reference_not_found", msg).with_field("image")
            }
            SessionError::UnknownAttributes(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_attribute", msg)
                    .with_field("attributes")
            }
            SessionError::HistoryNotFound(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "history_not_found", msg)
            }
            SessionError::InvalidInput(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", msg)
            }
            SessionError::Latent(l) => l.into(),
            SessionError::Backend(b) => b.into(),
        }
    }
}

impl From<&TransferError> for ApiError {
    fn from(e: &TransferError) -> Self {
        let internal = |code| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, code, e.to_string());
        match e {
            TransferError::Mode { .. } => internal("mode_mismatch"),
            TransferError::Latent(l) => l.into(),
            TransferError::Raster(RasterError::Dimensions { .. })
            | TransferError::MaskSize { .. } => internal("dimension_mismatch"),
            TransferError::Raster(_) => internal("raster_error"),
            TransferError::MaskMissing(_) => internal("mask_missing"),
            TransferError::Masks(MaskError::Parser(_)) => internal("mask_failed"),
            TransferError::Generation(b) => b.into(),
        }
    }
}

impl From<&PipelineError> for ApiError {
    fn from(e: &PipelineError) -> Self {
        match e {
            PipelineError::Session(s) => s.into(),
            PipelineError::Transfer(t) => t.into(),
            PipelineError::Backend(b) => b.into(),
            PipelineError::Io(io) => ApiError::storage(io),
        }
    }
}

macro_rules! owned_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                (&e).into()
            }
        }
    )*};
}

owned_from!(LatentError, BackendError, SessionError, TransferError, PipelineError);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ImageRef;

    #[test]
    fn session_errors_map_to_stable_codes() {
        let r = ImageRef::for_bytes(b"x");
        let cases = [
            (SessionError::NoTarget, 409, "ordering_error"),
            (SessionError::Duplicate(r.clone()), 409, "duplicate_reference"),
            (SessionError::NotFound(r), 404, "reference_not_found"),
            (
                SessionError::UnknownAttributes(vec!["x".into()]),
                422,
                "unknown_attribute",
            ),
            (SessionError::HistoryNotFound(3), 404, "history_not_found"),
        ];
        for (err, status, code) in cases {
            let api = ApiError::from(err);
            assert_eq!((api.status, api.code.as_str()), (status, code));
        }
    }

    #[test]
    fn backend_failures_are_server_side() {
        let unavailable = ApiError::from(BackendError::Unavailable {
            reason: "r".into(),
            hint: "h".into(),
        });
        assert_eq!(unavailable.status, 503);
        let failed = ApiError::from(BackendError::Failure("boom".into()));
        assert!(failed.status >= 500);
        let bad_image = ApiError::from(BackendError::InvalidInput("x".into()));
        assert_eq!(bad_image.status, 400);
    }
}
