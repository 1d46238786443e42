use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cloudgate_core::risk::RiskError;
use cloudgate_core::{ModelError, RepositoryError, SessionError};
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    /// Stable machine-readable code, e.g. `stale_revision`.
    pub code: String,
    pub message: String,
    /// Node id or field the error is about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status: status.as_u16(), code: code.into(), message: message.into(), location: None }
    }

    pub fn at(mut self, location: impl Into<String>) -> ApiError {
        self.location = Some(location.into());
        self
    }

    pub fn not_found(what: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn bad_parameter(field: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", message).at(field)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> ApiError {
        let message = e.to_string();
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            ModelError::UnknownNode(id) => ApiError::new(StatusCode::NOT_FOUND, "unknown_node", message).at(id),
            ModelError::UnknownRepoGoal(id) | ModelError::UnknownRepoObstacle(id) | ModelError::UnknownRepoTactic(id) => {
                ApiError::new(unprocessable, "dangling_reference", message).at(id)
            }
            ModelError::DuplicateEvidential { target, .. } => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_attachment", message).at(target)
            }
            ModelError::DuplicateTactic { obstacle, .. } => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_attachment", message).at(obstacle)
            }
            ModelError::DoNothingWithoutNote => ApiError::new(unprocessable, "note_required", message).at("note"),
            ModelError::WouldCycle { obstacle, .. } => ApiError::new(unprocessable, "would_cycle", message).at(obstacle),
            ModelError::NotAGoal(id)
            | ModelError::NotAnObstacle(id)
            | ModelError::NotATactic(id)
            | ModelError::InvalidTarget(id) => ApiError::new(unprocessable, "wrong_node_kind", message).at(id),
            ModelError::InvalidAncestor { target, .. } => {
                ApiError::new(unprocessable, "invalid_ancestor", message).at(target)
            }
            ModelError::EmptyName
            | ModelError::EmptyDescriptor
            | ModelError::EmptyObstacleName
            | ModelError::UnknownPattern(_) => ApiError::new(unprocessable, "invalid_value", message),
        }
    }
}

impl From<RiskError> for ApiError {
    fn from(e: RiskError) -> ApiError {
        let message = e.to_string();
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            RiskError::Model(m) => m.into(),
            RiskError::OverrideWithoutNote => ApiError::new(unprocessable, "note_required", message).at("note"),
            RiskError::TacticNotOnObstacle { tactic, .. } => {
                ApiError::new(unprocessable, "wrong_node_kind", message).at(tactic)
            }
            RiskError::NoPriorAssessment(node) => ApiError::new(unprocessable, "no_prior_assessment", message).at(node),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        match e {
            SessionError::Model(m) => m.into(),
            SessionError::Risk(r) => r.into(),
            SessionError::NoRepositoryGoals => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_repository_goals", e.to_string())
            }
            SessionError::Replay(..) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<RepositoryError> for ApiError {
    fn from(e: RepositoryError) -> ApiError {
        let message = e.to_string();
        match e {
            RepositoryError::NotFound(id) => ApiError::new(StatusCode::NOT_FOUND, "not_found", message).at(id),
            RepositoryError::MalformedId(id) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_id", message).at(id),
            RepositoryError::UnknownGoal(id) | RepositoryError::UnknownObstacle(id) | RepositoryError::UnknownTactic(id) => {
                ApiError::new(StatusCode::BAD_REQUEST, "dangling_reference", message).at(id)
            }
            RepositoryError::UnknownMigrationType(_) => ApiError::bad_parameter("migration_type", message),
            RepositoryError::UnknownCategory(_) => ApiError::bad_parameter("category", message),
            RepositoryError::Io { .. } | RepositoryError::Schema { .. } | RepositoryError::Integrity(_) => {
                ApiError::internal(message)
            }
        }
    }
}
