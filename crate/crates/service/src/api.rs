//! HTTP API and server-sent event stream.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/sessions` | session summaries |
//! | POST | `/api/sessions` | create a session (`{command_line, working_dir}`) |
//! | GET | `/api/sessions/{id}` | full session |
//! | POST | `/api/sessions/{id}/build` | start a build; `?wait=true` blocks until analyzed |
//! | GET | `/api/sessions/{id}/solutions` | ranked solutions |
//! | GET | `/api/solutions/{id}/evidence` | evidence, cited first |
//! | POST | `/api/solutions/{id}/apply` | write the fix to disk |
//! | POST | `/api/solutions/{id}/reject` | decline the fix |
//! | GET | `/api/events` | event stream, one event per transition |

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast::error::RecvError;

use crate::service::{Service, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::InvalidState(_) | ServiceError::StaleFile { .. } => StatusCode::CONFLICT,
            ServiceError::ContextMismatch(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Build(_) | ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.code().into(), message: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map(Json),
        Err(e) => Err(ServiceError::Storage(format!("worker panicked: {e}"))),
    }
}

#[derive(Debug, Deserialize)]
struct NewSession {
    command_line: String,
    working_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
struct BuildParams {
    #[serde(default)]
    wait: bool,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/build", post(build_session))
        .route("/api/sessions/{id}/solutions", get(session_solutions))
        .route("/api/solutions/{id}/evidence", get(solution_evidence))
        .route("/api/solutions/{id}/apply", post(apply_solution))
        .route("/api/solutions/{id}/reject", post(reject_solution))
        .route("/api/events", get(events))
        .with_state(service)
}

async fn list_sessions(State(svc): State<Arc<Service>>) -> impl IntoResponse {
    Json(svc.list())
}

async fn create_session(State(svc): State<Arc<Service>>, Json(body): Json<NewSession>) -> Result<impl IntoResponse, ServiceError> {
    let s = svc.create_session(&body.command_line, &body.working_dir)?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn get_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    svc.get(&id).map(Json)
}

async fn build_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(params): Query<BuildParams>,
) -> Result<Response, ServiceError> {
    svc.get(&id)?;
    if params.wait {
        return blocking(move || svc.build(&id)).await.map(IntoResponse::into_response);
    }
    let task = svc.clone();
    let sid = id.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = task.build(&sid) {
            log::warn!("build of {sid}: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(svc.get(&id)?)).into_response())
}

async fn session_solutions(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    svc.solutions(&id).map(Json)
}

async fn solution_evidence(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    svc.evidence(&id).map(Json)
}

async fn apply_solution(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(move || svc.apply(&id)).await
}

async fn reject_solution(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(move || svc.reject(&id)).await
}

async fn events(State(svc): State<Arc<Service>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = svc.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let event = Event::default().id(ev.seq.to_string()).json_data(&ev).unwrap_or_default();
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Lagged(n)) => {
                    let event = Event::default().event("lagged").data(n.to_string());
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// A bound, not yet running, API server.
pub struct Server {
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
}

impl Server {
    pub async fn bind(addr: &str, service: Arc<Service>) -> Result<Server, ServeError> {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::BindFailure { addr: addr.into(), source })?;
        Ok(Server { listener, service })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self) -> Result<(), ServeError> {
        axum::serve(self.listener, router(self.service)).await?;
        Ok(())
    }
}
