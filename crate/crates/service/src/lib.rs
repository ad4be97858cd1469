//! JSON-over-HTTP annotation service for a live campaign.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/state` | budget, iteration, phase, latest metrics |
//! | GET | `/api/queries` | pending batch with context and candidates |
//! | POST | `/api/labels` | `{"query": uri, "outcome": "bachelor" \| {"counterpart": uri}}` |
//! | GET | `/api/entities/{uri}/context?side=1` | 1-hop neighbourhood |
//! | GET | `/api/search?side=2&q=...&limit=20` | entities by uri substring |
//! | POST | `/api/admin/advance` | commit a partial batch |
//!
//! Errors carry `{"error": {"code", "message"}}`.

mod error;
mod session;

use std::sync::{Arc, Mutex, MutexGuard};

use alea_core::dataset::KnowledgeGraph;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ErrorBody, ErrorDetail};
pub use session::{
    advance, neighbourhood, AckStatus, Candidate, Direction, LabelAck, LabelOutcome, LastMetrics, Neighbour, Phase,
    Queries, QueryCard, Session, StateSummary, ANSWERS_FILE, SNAPSHOT_FILE,
};

struct Shared {
    session: Mutex<Session>,
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
}

/// Cloneable handle shared by all handlers.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(session: Session, kg1: KnowledgeGraph, kg2: KnowledgeGraph) -> Self {
        Self(Arc::new(Shared {
            session: Mutex::new(session),
            kg1,
            kg2,
        }))
    }

    pub fn session(&self) -> MutexGuard<'_, Session> {
        // A panic while holding the lock leaves the session usable enough to report state.
        self.0.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs the commit and the next selection off the request path.
    fn spawn_advance(&self, forced: bool) -> Result<(), ApiError> {
        let (mut campaign, answers) = self.session().begin_advance()?;
        let app = self.clone();
        tokio::task::spawn_blocking(move || {
            let outcome = advance(&mut campaign, &answers, forced);
            if let Err(e) = &outcome {
                tracing::error!("iteration failed: {e}");
            }
            app.session().finish_advance(campaign, outcome);
        });
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub query: String,
    pub outcome: LabelOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityContext {
    pub entity: String,
    pub side: u8,
    pub context: Vec<Neighbour>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct SideParam {
    #[serde(default = "side_one")]
    pub side: u8,
}

fn side_one() -> u8 {
    1
}

#[derive(Clone, Debug, Deserialize)]
pub struct SearchParams {
    #[serde(default = "side_two")]
    pub side: u8,
    #[serde(default)]
    pub q: String,
    #[serde(default = "default_limit")]
    pub limit: usize,
}

fn side_two() -> u8 {
    2
}

fn default_limit() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub entity: String,
    /// KG2 only: not yet matched by a committed or pending label.
    pub available: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResults {
    pub side: u8,
    pub results: Vec<SearchHit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvanceAck {
    pub status: AckStatus,
    pub answered: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/queries", get(get_queries))
        .route("/api/labels", post(post_label))
        .route("/api/entities/{*path}", get(get_context))
        .route("/api/search", get(search))
        .route("/api/admin/advance", post(admin_advance))
        .with_state(state)
}

async fn get_state(State(app): State<AppState>) -> Json<StateSummary> {
    Json(app.session().state())
}

async fn get_queries(State(app): State<AppState>) -> Json<Queries> {
    Json(app.session().queries())
}

async fn post_label(
    State(app): State<AppState>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Result<Json<LabelAck>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let ack = app.session().record(&req.query, &req.outcome)?;
    if ack.status == AckStatus::IterationAdvancing {
        app.spawn_advance(false)?;
    }
    Ok(Json(ack))
}

fn graph(app: &AppState, side: u8) -> Result<&KnowledgeGraph, ApiError> {
    match side {
        1 => Ok(&app.0.kg1),
        2 => Ok(&app.0.kg2),
        _ => Err(ApiError::BadRequest(format!("side must be 1 or 2, got {side}"))),
    }
}

async fn get_context(
    State(app): State<AppState>,
    Path(path): Path<String>,
    params: Result<Query<SideParam>, QueryRejection>,
) -> Result<Json<EntityContext>, ApiError> {
    let Query(p) = params.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let uri = path
        .strip_suffix("/context")
        .ok_or_else(|| ApiError::UnknownEntity(path.clone()))?;
    let kg = graph(&app, p.side)?;
    let e = kg.entity(uri).ok_or_else(|| ApiError::UnknownEntity(uri.into()))?;
    Ok(Json(EntityContext {
        entity: uri.into(),
        side: p.side,
        context: neighbourhood(kg, e),
    }))
}

async fn search(
    State(app): State<AppState>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Json<SearchResults>, ApiError> {
    let Query(p) = params.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let kg = graph(&app, p.side)?;
    let needle = p.q.to_lowercase();
    let taken = if p.side == 2 { app.session().taken_targets() } else { None };
    let results = kg
        .entity_ids()
        .filter(|&e| kg.uri(e).to_lowercase().contains(&needle))
        .take(p.limit)
        .map(|e| SearchHit {
            entity: kg.uri(e).into(),
            available: taken.as_ref().map(|t| !t.contains(&e)),
        })
        .collect();
    Ok(Json(SearchResults { side: p.side, results }))
}

async fn admin_advance(State(app): State<AppState>) -> Result<Json<AdvanceAck>, ApiError> {
    let answered = app.session().state().answered;
    app.spawn_advance(true)?;
    Ok(Json(AdvanceAck {
        status: AckStatus::IterationAdvancing,
        answered,
    }))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
