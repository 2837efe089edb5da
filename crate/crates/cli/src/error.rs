use std::fmt;

use axum::http::StatusCode;
use serde::{Deserialize, Serialize};
use spanshap_pipeline::{PipelineError, Stage, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BackendUnavailable,
    Capacity,
    ParseFailure,
    Internal,
}

impl ErrorCode {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::Capacity => 2,
            ErrorCode::BadRequest => 64,
            ErrorCode::ParseFailure => 65,
            ErrorCode::BackendUnavailable => 69,
            ErrorCode::Internal => 70,
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::Capacity => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::ParseFailure => StatusCode::BAD_GATEWAY,
            ErrorCode::BackendUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error shape shared by the CLI (stderr, exit code) and the service (JSON body).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    /// Failing pipeline stage, `null` when the failure precedes the pipeline.
    pub stage: Option<Stage>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            stage: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    /// Unknown runs are reported as 404 by the service.
    pub fn is_not_found(&self) -> bool {
        self.code == ErrorCode::BadRequest && self.message.starts_with("unknown run")
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let code = serde_json::to_value(self.code).ok();
        let code = code.as_ref().and_then(|v| v.as_str()).unwrap_or("internal");
        write!(f, "error[{code}]: {}", self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::UnknownRun(_) | StoreError::MissingStage { .. } => ErrorCode::BadRequest,
            StoreError::Format { .. } | StoreError::Schema { .. } => ErrorCode::ParseFailure,
            StoreError::Io { .. } | StoreError::Conflict { .. } => ErrorCode::Internal,
        };
        ServiceError::new(code, e.to_string())
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        let stage = e.stage();
        let mut out = match e {
            PipelineError::Store(s) => s.into(),
            e => {
                let code = match &e {
                    PipelineError::Backend { .. } => ErrorCode::BackendUnavailable,
                    PipelineError::Parse { .. } => ErrorCode::ParseFailure,
                    PipelineError::Capacity { .. } => ErrorCode::Capacity,
                    PipelineError::Prompt(_) | PipelineError::Config(_) | PipelineError::Input(_) => {
                        ErrorCode::BadRequest
                    }
                    _ => ErrorCode::Internal,
                };
                ServiceError::new(code, e.to_string())
            }
        };
        out.stage = stage;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_serialize_snake_case() {
        let e = ServiceError::new(ErrorCode::BackendUnavailable, "down");
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v, serde_json::json!({"code": "backend_unavailable", "message": "down", "stage": null}));
        assert_eq!(e.to_string(), "error[backend_unavailable]: down");
    }

    #[test]
    fn capacity_keeps_its_stage() {
        let e: ServiceError = PipelineError::Capacity { stage: Stage::Spans, spans: 9, limit: 8 }.into();
        assert_eq!((e.code, e.stage), (ErrorCode::Capacity, Some(Stage::Spans)));
        assert_eq!(e.code.exit_code(), 2);
    }

    #[test]
    fn unknown_runs_are_not_found() {
        let e: ServiceError = PipelineError::Store(StoreError::UnknownRun("abc".into())).into();
        assert!(e.is_not_found());
        assert_eq!(e.code.exit_code(), 64);
    }
}
