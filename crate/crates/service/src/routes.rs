use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cloudgate_core::formats::{export_dot, session_to_json, DotOptions};
use cloudgate_core::model::NodeView;
use cloudgate_core::procedure::StepStatus;
use cloudgate_core::repository::{ObstacleFilter, TacticEntry, TacticFilter};
use cloudgate_core::{
    coverage_check, risk_of, Command, Consequence, Likelihood, MigrationType, Repository, RiskLevel, Session,
    TacticCategory,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApiError;
use crate::store::{valid_session_id, SessionStore};

pub struct AppState {
    pub repo: Repository,
    pub store: SessionStore,
}

type Shared = State<Arc<AppState>>;

/// JSON body whose rejections are reported as [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state).await.map(|Json(v)| ApiJson(v)).map_err(|r: JsonRejection| {
            ApiError::new(r.status(), "invalid_body", r.body_text())
        })
    }
}

/// Query string whose rejections are reported as [`ApiError`].
pub struct ApiQuery<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| ApiQuery(q.0))
            .map_err(|r: QueryRejection| ApiError::new(StatusCode::BAD_REQUEST, "invalid_parameter", r.body_text()))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/repo/goals", get(repo_goals))
        .route("/repo/obstacles", get(repo_obstacles))
        .route("/repo/tactics", get(repo_tactics))
        .route("/repo/entries/{id}", get(repo_entry))
        .route("/risk-matrix", get(risk_matrix))
        .route("/dataset/version", get(dataset_version))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/goals", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "add_goal")))
        .route("/sessions/{id}/obstacles", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "attach_obstacle")))
        .route("/sessions/{id}/rename", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "rename_obstacle")))
        .route("/sessions/{id}/tactics", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "attach_tactic")))
        .route("/sessions/{id}/assess", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "assess")))
        .route("/sessions/{id}/reassess", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "reassess")))
        .route("/sessions/{id}/apply-tactic", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "apply_tactic")))
        .route("/sessions/{id}/remove", post(|s: Shared, p: Path<String>, b| mutate(s, p, b, "remove_subtree")))
        .route("/sessions/{id}/suggestions/obstacles", get(suggest_obstacles))
        .route("/sessions/{id}/suggestions/tactics", get(suggest_tactics))
        .route("/sessions/{id}/check", get(check))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/export/dot", get(export_dot_handler))
        .route("/sessions/{id}/export/session", get(export_session))
        .route("/sessions/{id}/audit", get(audit))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed);
    Router::new()
        .route("/", get(index))
        .nest("/api", api)
        .fallback(not_found)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}

async fn index() -> Html<&'static str> {
    Html(include_str!("index.html"))
}

// Repository

async fn repo_goals(State(st): Shared) -> Json<Value> {
    Json(serde_json::to_value(st.repo.goals()).expect("serializable"))
}

#[derive(Deserialize)]
struct ObstacleQuery {
    goal: Option<String>,
    migration_type: Option<String>,
    text: Option<String>,
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.is_empty())
}

async fn repo_obstacles(State(st): Shared, ApiQuery(q): ApiQuery<ObstacleQuery>) -> Result<Json<Value>, ApiError> {
    let migration_type = non_empty(q.migration_type).map(|m| m.parse::<MigrationType>()).transpose()?;
    let filter = ObstacleFilter { goal: non_empty(q.goal), migration_type, text: non_empty(q.text) };
    let found = st.repo.query_obstacles(&filter)?;
    Ok(Json(serde_json::to_value(found).expect("serializable")))
}

#[derive(Deserialize)]
struct TacticQuery {
    obstacle: Option<String>,
    category: Option<String>,
    universal: Option<bool>,
}

#[derive(Serialize)]
struct TacticRow<'a> {
    #[serde(flatten)]
    tactic: &'a TacticEntry,
    via_universal: bool,
}

/// `universal` decides whether universal tactics join an obstacle's
/// catalogued ones (default true).
async fn repo_tactics(State(st): Shared, ApiQuery(q): ApiQuery<TacticQuery>) -> Result<Json<Value>, ApiError> {
    let category = non_empty(q.category).map(|c| c.parse::<TacticCategory>()).transpose()?;
    let filter = TacticFilter { obstacle: non_empty(q.obstacle), category, include_universal: q.universal.unwrap_or(true) };
    let rows: Vec<TacticRow> = st
        .repo
        .query_tactics(&filter)?
        .into_iter()
        .map(|m| TacticRow { tactic: m.tactic, via_universal: m.via_universal })
        .collect();
    Ok(Json(serde_json::to_value(rows).expect("serializable")))
}

async fn repo_entry(State(st): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let entry = st.repo.get_entry(&id)?;
    Ok(Json(serde_json::to_value(entry).expect("serializable")))
}

#[derive(Serialize)]
struct Matrix {
    likelihoods: Vec<Likelihood>,
    consequences: Vec<Consequence>,
    /// `cells[i][j]` is the level for `likelihoods[i]` x `consequences[j]`.
    cells: Vec<Vec<RiskLevel>>,
    levels: Vec<RiskLevel>,
}

async fn risk_matrix() -> Json<Matrix> {
    Json(Matrix {
        likelihoods: Likelihood::ALL.to_vec(),
        consequences: Consequence::ALL.to_vec(),
        cells: Likelihood::ALL.iter().map(|l| Consequence::ALL.iter().map(|c| risk_of(*l, *c)).collect()).collect(),
        levels: RiskLevel::ALL.to_vec(),
    })
}

async fn dataset_version(State(st): Shared) -> Json<Value> {
    let r = &st.repo;
    Json(serde_json::json!({
        "version": r.version(),
        "goals": r.goals().len(),
        "obstacles": r.obstacles().len(),
        "tactics": r.tactics().len(),
        "studies": r.studies().len(),
    }))
}

// Sessions

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    name: String,
    migration_type: MigrationType,
    repository_version: String,
    revision: u64,
    nodes: Vec<NodeView>,
    status: StepStatus,
}

impl SessionView {
    fn of(s: &Session) -> SessionView {
        SessionView {
            session_id: s.session_id.clone(),
            name: s.name().to_string(),
            migration_type: s.migration_type(),
            repository_version: s.repository_version.clone(),
            revision: s.revision(),
            nodes: s.model().views(),
            status: s.step_status(RiskLevel::H),
        }
    }
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    name: String,
    migration_type: MigrationType,
    revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    name: String,
    migration_type: MigrationType,
    #[serde(default)]
    session_id: Option<String>,
}

async fn create_session(
    State(st): Shared,
    ApiJson(body): ApiJson<NewSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let id = body.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if !valid_session_id(&id) {
        return Err(ApiError::bad_parameter("session_id", "session ids use letters, digits, `-` and `_` (at most 64)"));
    }
    let session = Session::start(&id, &body.name, body.migration_type, &st.repo)?;
    let view = SessionView::of(&session);
    st.store.insert(session).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(st): Shared) -> Json<Vec<SessionSummary>> {
    let mut out = Vec::new();
    for cell in st.store.list().await {
        let s = cell.lock().await;
        out.push(SessionSummary {
            session_id: s.session_id.clone(),
            name: s.name().to_string(),
            migration_type: s.migration_type(),
            revision: s.revision(),
        });
    }
    Json(out)
}

async fn get_session(State(st): Shared, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(SessionView::of(&s)))
}

async fn delete_session(State(st): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    st.store.remove(&id).await?;
    Ok(StatusCode::NO_CONTENT)
}

/// Splits a mutation body into the expected revision and the command.
fn parse_mutation(op: &str, body: Value) -> Result<(u64, Command), ApiError> {
    let Value::Object(mut fields) = body else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "expected a JSON object"));
    };
    let revision = fields
        .remove("revision")
        .and_then(|r| r.as_u64())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing_revision", "mutations must carry the current `revision`").at("revision"))?;
    fields.insert("op".into(), Value::String(op.into()));
    let command: Command = serde_json::from_value(Value::Object(fields))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()))?;
    Ok((revision, command))
}

async fn mutate(State(st): Shared, Path(id): Path<String>, ApiJson(body): ApiJson<Value>, op: &str) -> Result<Response, ApiError> {
    let (revision, command) = parse_mutation(op, body)?;
    let cell = st.store.get(&id).await?;
    let mut current = cell.lock().await;
    if current.revision() != revision {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale_revision",
            format!("session is at revision {}, request was based on {revision}", current.revision()),
        )
        .at("revision"));
    }
    let mut next = current.clone();
    let outcome = next.execute(&st.repo, command)?;
    st.store.persist(&next).await?;
    *current = next;
    Ok(Json(outcome).into_response())
}

async fn suggest_obstacles(State(st): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(serde_json::to_value(s.suggest_obstacles(&st.repo)?).expect("serializable")))
}

#[derive(Deserialize)]
struct NodeQuery {
    node: Option<String>,
}

async fn suggest_tactics(
    State(st): Shared,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<NodeQuery>,
) -> Result<Json<Value>, ApiError> {
    let node = non_empty(q.node).ok_or_else(|| ApiError::bad_parameter("node", "query parameter `node` is required"))?;
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(serde_json::to_value(s.suggest_tactics(&st.repo, &node)?).expect("serializable")))
}

#[derive(Deserialize)]
struct ThresholdQuery {
    threshold: Option<String>,
}

fn threshold(raw: Option<String>) -> Result<RiskLevel, ApiError> {
    match non_empty(raw) {
        None => Ok(RiskLevel::H),
        Some(t) => t.parse().map_err(|e: cloudgate_core::risk::ParseLevelError| ApiError::bad_parameter("threshold", e.to_string())),
    }
}

async fn check(
    State(st): Shared,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<ThresholdQuery>,
) -> Result<Json<cloudgate_core::CheckReport>, ApiError> {
    let t = threshold(q.threshold)?;
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(coverage_check(s.model(), t)))
}

async fn status(
    State(st): Shared,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<ThresholdQuery>,
) -> Result<Json<StepStatus>, ApiError> {
    let t = threshold(q.threshold)?;
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(s.step_status(t)))
}

async fn export_dot_handler(
    State(st): Shared,
    Path(id): Path<String>,
    ApiQuery(options): ApiQuery<DotOptions>,
) -> Result<Response, ApiError> {
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    let dot = export_dot(s.model(), options)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_model", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz; charset=utf-8")], dot).into_response())
}

async fn export_session(State(st): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(([(header::CONTENT_TYPE, "application/json")], session_to_json(&s)).into_response())
}

async fn audit(State(st): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let cell = st.store.get(&id).await?;
    let s = cell.lock().await;
    Ok(Json(serde_json::to_value(s.audit()).expect("serializable")))
}
