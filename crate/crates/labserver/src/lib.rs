//! HTTP service that walks raters through a listening-test session plan and
//! journals their answers.
//!
//! Raters are identified by a self-entered name. The first `next` call for a
//! name registers it and returns a token that must accompany every response.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::RngCore;
use revtts::perceptual::{
    rubric, Choice, Journal, JournalRecord, MosResponse, NextItem, PerceptualError, PreferenceResponse, Progress,
    Rubric, SessionPlan, SessionState, SubmitError,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Perceptual(#[from] PerceptualError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default)]
pub struct LabConfig {
    /// Directory of front-end assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// When set, `export` requires `?key=<operator_key>`.
    pub operator_key: Option<String>,
}

struct Session {
    state: RwLock<SessionState>,
    journal: Mutex<Journal>,
}

#[derive(Clone)]
pub struct Lab {
    session: Arc<Session>,
    rubric: Arc<Rubric>,
    config: Arc<LabConfig>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Lab {
    /// Opens the journal (creating it if needed) and replays any responses
    /// already recorded for this plan.
    pub fn open(plan: SessionPlan, journal_path: impl AsRef<Path>, config: LabConfig) -> Result<Self, LabError> {
        let (mut journal, records) = Journal::open(journal_path)?;
        let state = SessionState::replay(plan, &records)?;
        if records.is_empty() {
            let plan = state.plan();
            journal.append(&JournalRecord::Session {
                session_id: plan.session_id.clone(),
                seed: plan.seed,
                items: plan.total_items(),
                timestamp: now_ms(),
            })?;
        } else {
            log::info!("replayed {} journal records", records.len());
        }
        Ok(Self {
            session: Arc::new(Session {
                state: RwLock::new(state),
                journal: Mutex::new(journal),
            }),
            rubric: Arc::new(rubric()),
            config: Arc::new(config),
        })
    }

    pub fn router(self) -> Router {
        let api = Router::new()
            .route("/api/session/{sid}/next", get(next_item))
            .route("/api/session/{sid}/response", post(submit))
            .route("/api/session/{sid}/export", get(export))
            .route("/api/audio/{audio_ref}", get(audio))
            .route("/api/rubric", get(rubric_asset));
        let api = match &self.config.static_dir {
            Some(dir) => api.fallback_service(ServeDir::new(dir)),
            None => api,
        };
        api.with_state(self)
    }

    fn session_id(&self) -> String {
        self.session.state.read().expect("state lock").plan().session_id.clone()
    }

    fn check_sid(&self, sid: &str) -> Result<(), ApiError> {
        if sid == self.session_id() {
            Ok(())
        } else {
            Err(ApiError(StatusCode::NOT_FOUND, format!("unknown session {sid:?}")))
        }
    }

    /// Appends under the journal lock, then updates the in-memory state, so
    /// the check-append-apply sequence is serialized across requests.
    fn commit(&self, check: impl FnOnce(&SessionState) -> Result<JournalRecord, ApiError>) -> Result<Progress, ApiError> {
        let mut journal = self.session.journal.lock().expect("journal lock");
        let record = check(&self.session.state.read().expect("state lock"))?;
        journal
            .append(&record)
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        let mut state = self.session.state.write().expect("state lock");
        state.apply(&record);
        let rater = match &record {
            JournalRecord::Rater { rater_id, .. } => rater_id,
            JournalRecord::Mos(m) => &m.rater_id,
            JournalRecord::Preference(p) => &p.rater_id,
            JournalRecord::Session { .. } => unreachable!("not committed by requests"),
        };
        Ok(state.progress(rater))
    }
}

/// Serves until Ctrl-C.
pub async fn serve(lab: Lab, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, lab.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"status": "error", "error": self.1}))).into_response()
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> Self {
        let code = match e {
            SubmitError::UnknownRater(_) | SubmitError::UnknownItem(_) => StatusCode::NOT_FOUND,
            SubmitError::BadToken => StatusCode::FORBIDDEN,
            SubmitError::Duplicate(_) | SubmitError::OutOfOrder { .. } => StatusCode::CONFLICT,
            SubmitError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(code, e.to_string())
    }
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: Option<String>,
}

#[derive(Serialize)]
struct PairUrls {
    first: String,
    second: String,
}

/// Rater-facing view of the next item. Holds opaque ids and URLs only.
#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NextPayload<'a> {
    Mos {
        item_id: String,
        audio_url: String,
        rubric: &'a Rubric,
        progress: Progress,
        #[serde(skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    Pair {
        pair_id: String,
        audio_urls: PairUrls,
        progress: Progress,
        #[serde(skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    Complete {
        progress: Progress,
        #[serde(skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
}

fn audio_url(r: &str) -> String {
    format!("/api/audio/{r}")
}

async fn next_item(
    State(lab): State<Lab>,
    UrlPath(sid): UrlPath<String>,
    Query(q): Query<RaterQuery>,
) -> Result<Response, ApiError> {
    lab.check_sid(&sid)?;
    let rater = q.rater.map(|r| r.trim().to_string()).unwrap_or_default();
    if rater.is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "rater name required".into()));
    }
    let known = lab.session.state.read().expect("state lock").token(&rater).is_some();
    let token = if known {
        None
    } else {
        let token = format!("{:016x}", rand::rng().next_u64());
        let t = token.clone();
        let r = rater.clone();
        lab.commit(move |st| {
            if st.token(&r).is_some() {
                // registered concurrently by another request
                return Err(ApiError(StatusCode::CONFLICT, format!("rater {r:?} already registered")));
            }
            Ok(JournalRecord::Rater {
                rater_id: r,
                token: t,
                timestamp: now_ms(),
            })
        })?;
        log::info!("registered rater {rater:?}");
        Some(token)
    };

    let state = lab.session.state.read().expect("state lock");
    let progress = state.progress(&rater);
    let payload = match state.next_for(&rater) {
        NextItem::Mos { item_id, audio_ref } => NextPayload::Mos {
            item_id,
            audio_url: audio_url(&audio_ref),
            rubric: &lab.rubric,
            progress,
            token,
        },
        NextItem::Pair { pair_id, first, second } => NextPayload::Pair {
            pair_id,
            audio_urls: PairUrls {
                first: audio_url(&first),
                second: audio_url(&second),
            },
            progress,
            token,
        },
        NextItem::Complete => NextPayload::Complete { progress, token },
    };
    Ok(Json(payload).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResponseBody {
    Mos {
        rater: String,
        token: String,
        item_id: String,
        naturalness: u8,
        intelligibility: u8,
    },
    Pair {
        rater: String,
        token: String,
        pair_id: String,
        choice: Choice,
    },
}

async fn submit(
    State(lab): State<Lab>,
    UrlPath(sid): UrlPath<String>,
    body: Result<Json<ResponseBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    lab.check_sid(&sid)?;
    let Json(body) = body.map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    let progress = match body {
        ResponseBody::Mos {
            rater,
            token,
            item_id,
            naturalness,
            intelligibility,
        } => {
            let r = MosResponse {
                rater_id: rater,
                item_id,
                naturalness,
                intelligibility,
                timestamp: now_ms(),
            };
            lab.commit(|st| {
                st.check_mos(&r, &token)?;
                Ok(JournalRecord::Mos(r))
            })?
        }
        ResponseBody::Pair {
            rater,
            token,
            pair_id,
            choice,
        } => {
            let r = PreferenceResponse {
                rater_id: rater,
                pair_id,
                choice,
                timestamp: now_ms(),
            };
            lab.commit(|st| {
                st.check_preference(&r, &token)?;
                Ok(JournalRecord::Preference(r))
            })?
        }
    };
    Ok(Json(json!({"status": "accepted", "progress": progress})).into_response())
}

#[derive(Deserialize)]
struct KeyQuery {
    key: Option<String>,
}

async fn export(
    State(lab): State<Lab>,
    UrlPath(sid): UrlPath<String>,
    Query(q): Query<KeyQuery>,
) -> Result<Response, ApiError> {
    lab.check_sid(&sid)?;
    if let Some(key) = &lab.config.operator_key {
        if q.key.as_deref() != Some(key.as_str()) {
            return Err(ApiError(StatusCode::FORBIDDEN, "operator key required".into()));
        }
    }
    // hold the writer lock so the dump ends on a record boundary
    let journal = lab.session.journal.lock().expect("journal lock");
    let bytes = std::fs::read(journal.path()).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    drop(journal);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn audio(State(lab): State<Lab>, UrlPath(audio_ref): UrlPath<String>) -> Result<Response, ApiError> {
    let path = lab
        .session
        .state
        .read()
        .expect("state lock")
        .plan()
        .audio
        .get(&audio_ref)
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown audio {audio_ref:?}")))?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| {
        log::error!("{}: {e}", path.display());
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, "audio unavailable".into())
    })?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn rubric_asset() -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        revtts::perceptual::RUBRIC_JSON,
    )
        .into_response()
}
