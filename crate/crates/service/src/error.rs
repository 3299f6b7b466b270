//! Structured API errors. Every engine error variant maps to one stable
//! code string.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use qwb_core::analysis::{EspError, MatchError};
use qwb_core::circuit::{CircuitError, VerificationReport};
use qwb_core::jobdata::{ErrorCode, JobDataError};
use qwb_core::machine::MachineError;
use qwb_core::problems::ProblemError;
use qwb_core::qasm::{EmitError, ParseError};
use qwb_core::results::ResultsError;
use qwb_core::sim::{CountsError, SimError};
use qwb_core::transpile::TranspileError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

/// Response body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "request-invalid", message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn timeout(secs: u64) -> Self {
        Self::new(StatusCode::GATEWAY_TIMEOUT, "timeout", format!("request exceeded {secs} s"))
    }

    pub fn unverified(report: &VerificationReport) -> Self {
        Self::unprocessable("circuit-unverified", report.summary()).with_detail(report)
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code.to_string(),
            message: self.message.clone(),
            detail: self.detail.clone(),
        }
    }

    /// User errors are client-side (4xx); everything else is internal.
    pub fn is_user_error(&self) -> bool {
        self.status.is_client_error()
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        ApiError::unprocessable("qasm-parse", e.to_string()).with_detail(&e)
    }
}

impl From<EmitError> for ApiError {
    fn from(e: EmitError) -> Self {
        ApiError::unprocessable("qasm-emit", e.to_string())
    }
}

impl From<CircuitError> for ApiError {
    fn from(e: CircuitError) -> Self {
        let code = match e {
            CircuitError::Unverified(_) => "circuit-unverified",
            CircuitError::TooManyQubits { .. } => "circuit-too-wide",
            CircuitError::MissingDuration { .. } => "circuit-missing-duration",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<ProblemError> for ApiError {
    fn from(e: ProblemError) -> Self {
        ApiError::unprocessable("problem-invalid", e.to_string())
    }
}

impl From<MachineError> for ApiError {
    fn from(e: MachineError) -> Self {
        let (status, code) = match e {
            MachineError::UnknownMachine(_) => (StatusCode::NOT_FOUND, "machine-unknown"),
            MachineError::NoSnapshots(_) => (StatusCode::UNPROCESSABLE_ENTITY, "machine-no-snapshots"),
            MachineError::UnknownSelector { .. } => (StatusCode::BAD_REQUEST, "selector-unknown"),
            MachineError::QueryParse { .. } => (StatusCode::BAD_REQUEST, "query-parse"),
            MachineError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "machine-invalid"),
            MachineError::File { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "machine-file"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<TranspileError> for ApiError {
    fn from(e: TranspileError) -> Self {
        let message = e.to_string();
        let (code, strategy) = transpile_code(&e, None);
        let err = ApiError::unprocessable(code, message);
        match strategy {
            Some(index) => err.with_detail(serde_json::json!({ "strategy": index })),
            None => err,
        }
    }
}

fn transpile_code(e: &TranspileError, strategy: Option<usize>) -> (&'static str, Option<usize>) {
    let code = match e {
        TranspileError::Unverified(_) => "transpile-unverified",
        TranspileError::TooWide { .. } => "transpile-too-wide",
        TranspileError::Disconnected { .. } => "transpile-disconnected",
        TranspileError::Basis(_) => "transpile-basis",
        TranspileError::InvalidOptions(_) => "transpile-options",
        TranspileError::Calibration(_) => "transpile-calibration",
        TranspileError::Strategy { index, source } => return transpile_code(source, Some(*index)),
    };
    (code, strategy)
}

impl From<EspError> for ApiError {
    fn from(e: EspError) -> Self {
        let code = match e {
            EspError::Unverified(_) => "esp-unverified",
            EspError::MissingGate { .. } => "esp-missing-gate",
            EspError::MissingReadout { .. } => "esp-missing-readout",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<MatchError> for ApiError {
    fn from(e: MatchError) -> Self {
        let code = match e {
            MatchError::Exhausted { .. } => "match-exhausted",
            MatchError::Mismatch { .. } => "match-mismatch",
            MatchError::Untranslatable { .. } => "match-untranslatable",
            MatchError::BadProvenance(_) => "match-provenance",
            MatchError::BadLayout(_) => "match-layout",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<CountsError> for ApiError {
    fn from(e: CountsError) -> Self {
        let code = match e {
            CountsError::TooWide(_) => "counts-too-wide",
            CountsError::BadKey { .. } => "counts-bad-key",
            CountsError::OutOfRange { .. } => "counts-out-of-range",
            CountsError::ZeroCount(_) => "counts-zero-count",
            CountsError::TotalMismatch { .. } => "counts-total-mismatch",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::TooWide { .. } => "sim-too-wide",
            SimError::NoMeasurements => "sim-no-measurements",
            SimError::NoShots => "sim-no-shots",
            SimError::Unverified(_) => "sim-unverified",
            SimError::MissingCalibration(_) => "sim-missing-calibration",
            SimError::Counts(inner) => return inner.into(),
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<ResultsError> for ApiError {
    fn from(e: ResultsError) -> Self {
        let code = match e {
            ResultsError::TooWide { .. } => "results-too-wide",
            ResultsError::Overlap(_) => "results-overlap",
            ResultsError::BitOutOfRange { .. } => "results-bit-out-of-range",
            ResultsError::SizeMismatch(_) => "results-size-mismatch",
            ResultsError::InvalidShor(_) => "results-invalid-shor",
            ResultsError::WidthMismatch { .. } => "results-width-mismatch",
            ResultsError::MissingCalibration(_) => "results-missing-calibration",
            ResultsError::TooFewTrials { .. } => "results-too-few-trials",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<JobDataError> for ApiError {
    fn from(e: JobDataError) -> Self {
        let (status, code) = match e.code {
            ErrorCode::Corrupt => (StatusCode::UNPROCESSABLE_ENTITY, "job-corrupt"),
            ErrorCode::Schema => (StatusCode::UNPROCESSABLE_ENTITY, "job-schema"),
            ErrorCode::WidthMismatch => (StatusCode::UNPROCESSABLE_ENTITY, "job-width-mismatch"),
            ErrorCode::VersionMismatch => (StatusCode::UNPROCESSABLE_ENTITY, "job-version-mismatch"),
            ErrorCode::Invalid => (StatusCode::UNPROCESSABLE_ENTITY, "job-invalid"),
            ErrorCode::Chunk => (StatusCode::UNPROCESSABLE_ENTITY, "job-chunk"),
            ErrorCode::Io => (StatusCode::INTERNAL_SERVER_ERROR, "job-io"),
        };
        ApiError::new(status, code, e.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_errors_carry_the_inner_code() {
        let e = TranspileError::Strategy {
            index: 2,
            source: Box::new(TranspileError::TooWide { qubits: 9, available: 5 }),
        };
        let api = ApiError::from(e);
        assert_eq!(api.code, "transpile-too-wide");
        assert_eq!(api.detail, Some(serde_json::json!({"strategy": 2})));
    }

    #[test]
    fn statuses_split_user_and_internal_errors() {
        assert!(ApiError::from(MachineError::UnknownMachine("x".into())).is_user_error());
        assert_eq!(ApiError::from(MachineError::UnknownMachine("x".into())).status, StatusCode::NOT_FOUND);
        assert!(!ApiError::from(JobDataError::new(ErrorCode::Io, "disk")).is_user_error());
        assert_eq!(ApiError::from(JobDataError::new(ErrorCode::Corrupt, "x")).code, "job-corrupt");
        assert_eq!(ApiError::from(SimError::Counts(CountsError::TooWide(70))).code, "counts-too-wide");
    }

    #[test]
    fn body_omits_empty_detail() {
        let body = serde_json::to_value(ApiError::bad_request("nope").body()).unwrap();
        assert_eq!(body, serde_json::json!({"code": "request-invalid", "message": "nope"}));
    }
}
