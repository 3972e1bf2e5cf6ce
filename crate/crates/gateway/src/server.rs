use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bpassist_core::agents::{Assistant, Notification, Session};
use bpassist_core::contract::{AgentDescriptor, Context, ContractError, DocumentRef, Role};
use bpassist_core::orchestrator::{OrchestratorError, TurnResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::remote::{Health, RemoteAgent};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("{0}")]
    Invalid(String),
    #[error("registration rejected: {0}")]
    Rejected(String),
    #[error("{0}")]
    Conflict(String),
}

impl From<OrchestratorError> for GatewayError {
    fn from(e: OrchestratorError) -> Self {
        GatewayError::Invalid(e.to_string())
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = match self {
            GatewayError::UnknownSession(_) => StatusCode::NOT_FOUND,
            GatewayError::Invalid(_) | GatewayError::Rejected(_) => StatusCode::BAD_REQUEST,
            GatewayError::Conflict(_) => StatusCode::CONFLICT,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub session_id: String,
    pub role: Role,
    pub context: Context,
    pub next_turn: u64,
    pub created_at: u64,
}

/// A registry entry as listed by `GET /v1/agents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentStatus {
    #[serde(flatten)]
    pub descriptor: AgentDescriptor,
    pub health: Health,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

struct SessionSlot {
    session: Mutex<Session>,
    created_at: u64,
}

/// Session store in front of the stateless orchestrator. Turns on one
/// session run one at a time, in arrival order; sessions run in parallel.
pub struct Gateway {
    assistant: Arc<Assistant>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    remotes: RwLock<BTreeMap<String, Arc<RemoteAgent>>>,
}

impl Gateway {
    pub fn new(assistant: Arc<Assistant>) -> Self {
        Self {
            assistant,
            sessions: RwLock::new(HashMap::new()),
            remotes: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn assistant(&self) -> &Arc<Assistant> {
        &self.assistant
    }

    pub fn create_session(&self, role: Role, user: Option<&str>) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let slot = SessionSlot {
            session: Mutex::new(Session::new(id.clone(), role, user)),
            created_at,
        };
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.clone(), Arc::new(slot));
        id
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, GatewayError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    pub async fn session(&self, id: &str) -> Result<SessionView, GatewayError> {
        let slot = self.slot(id)?;
        let s = slot.session.lock().await;
        Ok(SessionView {
            session_id: s.id.clone(),
            role: s.role,
            context: s.context.clone(),
            next_turn: s.next_turn,
            created_at: slot.created_at,
        })
    }

    pub async fn post_message(
        &self,
        id: &str,
        text: &str,
        attachments: Vec<DocumentRef>,
    ) -> Result<TurnResult, GatewayError> {
        let slot = self.slot(id)?;
        let mut session = slot.session.lock().await;
        Ok(self.assistant.say(&mut session, text, attachments).await?)
    }

    pub fn poll_notifications(&self, id: &str, since: u64) -> Result<Vec<Notification>, GatewayError> {
        self.slot(id)?;
        Ok(self.assistant.world().hub.poll(id, since))
    }

    pub fn agents(&self) -> Vec<AgentStatus> {
        let remotes = self.remotes.read().unwrap_or_else(|p| p.into_inner());
        self.assistant
            .descriptors()
            .into_iter()
            .map(|descriptor| {
                let remote = remotes.get(&descriptor.agent_id);
                AgentStatus {
                    health: remote.map_or(Health::Up, |r| r.health()),
                    endpoint: remote.map(|r| r.endpoint().to_string()),
                    descriptor,
                }
            })
            .collect()
    }

    /// Handshakes with the endpoint, then adds the agent to the registry.
    pub async fn register_remote(
        &self,
        descriptor: AgentDescriptor,
        endpoint: &str,
    ) -> Result<AgentStatus, GatewayError> {
        if descriptor.agent_id.trim().is_empty() {
            return Err(GatewayError::Invalid("empty agent id".into()));
        }
        if self.assistant.registry().get(&descriptor.agent_id).is_some() {
            return Err(GatewayError::Conflict(format!(
                "agent `{}` is already registered",
                descriptor.agent_id
            )));
        }
        let agent = RemoteAgent::connect(descriptor.clone(), endpoint)
            .await
            .map_err(|e| GatewayError::Rejected(e.to_string()))?;
        let agent = Arc::new(agent);
        self.assistant
            .register(agent.clone())
            .map_err(|e| GatewayError::Conflict(e.to_string()))?;
        self.remotes
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(descriptor.agent_id.clone(), agent.clone());
        Ok(AgentStatus {
            descriptor,
            health: agent.health(),
            endpoint: Some(endpoint.to_string()),
        })
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CreateSession {
    role: String,
    #[serde(default)]
    user: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    session_id: String,
    role: Role,
}

#[derive(Deserialize)]
struct PostMessage {
    text: String,
    #[serde(default)]
    attachments: Vec<DocumentRef>,
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

#[derive(Deserialize)]
struct Register {
    descriptor: AgentDescriptor,
    endpoint: String,
}

type Shared = State<Arc<Gateway>>;

async fn create_session(State(gw): Shared, Json(body): Json<CreateSession>) -> Result<Json<Created>, GatewayError> {
    let role: Role = body
        .role
        .parse()
        .map_err(|e: ContractError| GatewayError::Invalid(e.to_string()))?;
    let session_id = gw.create_session(role, body.user.as_deref());
    Ok(Json(Created { session_id, role }))
}

async fn get_session(State(gw): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, GatewayError> {
    gw.session(&id).await.map(Json)
}

async fn post_message(
    State(gw): Shared,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<PostMessage>,
) -> Result<Json<TurnResult>, GatewayError> {
    gw.post_message(&id, &body.text, body.attachments).await.map(Json)
}

async fn notifications(
    State(gw): Shared,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<Since>,
) -> Result<Json<Vec<Notification>>, GatewayError> {
    gw.poll_notifications(&id, q.since).map(Json)
}

async fn list_agents(State(gw): Shared) -> Json<Vec<AgentStatus>> {
    Json(gw.agents())
}

async fn register_agent(State(gw): Shared, Json(body): Json<Register>) -> Result<Json<AgentStatus>, GatewayError> {
    gw.register_remote(body.descriptor, &body.endpoint).await.map(Json)
}

/// The `/v1` API, plus static files from `static_dir` for every other path.
pub fn router(gateway: Arc<Gateway>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/notifications", get(notifications))
        .route("/v1/agents", get(list_agents).post(register_agent))
        .with_state(gateway);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves `app` until `shutdown` resolves, then lets in-flight turns finish.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
