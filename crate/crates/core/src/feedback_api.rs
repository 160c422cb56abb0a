//! Embedded HTTP/JSON service for human labelling.
//!
//! | method | path                | response                                   |
//! |--------|---------------------|--------------------------------------------|
//! | GET    | `/api/queries/next` | 200 [`QueryPayload`], or 204 when idle     |
//! | POST   | `/api/labels`       | 200 accepted, 400, 404 or 409              |
//! | GET    | `/api/status`       | 200 [`StatusPayload`]                      |

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::envs::{render_trajectory, EnvKind, Trajectory};
use crate::error::{Error, Result};
use crate::runner::{RunStatus, StatusHandle};
use crate::teacher::{Choice, HumanLabelInbox, PendingQuery};

const MAX_BODY: u64 = 64 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub id: u64,
    pub env: String,
    pub left: Trajectory,
    pub right: Trajectory,
    pub segment_length: usize,
    /// Milliseconds since the Unix epoch.
    pub issued_at: u64,
}

impl QueryPayload {
    pub fn from_query(kind: EnvKind, q: &PendingQuery) -> Result<Self> {
        Ok(QueryPayload {
            id: q.id,
            env: kind.name().to_string(),
            left: render_trajectory(kind, &q.pair.seg0)?,
            right: render_trajectory(kind, &q.pair.seg1)?,
            segment_length: q.pair.seg0.len(),
            issued_at: q.issued_at,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub id: u64,
    pub choice: Choice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusPayload {
    #[serde(flatten)]
    pub run: RunStatusView,
    pub pending_queries: usize,
}

/// Wire form of [`RunStatus`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatusView {
    pub phase: String,
    pub step: usize,
    pub total_steps: usize,
    pub sessions: usize,
    pub labels_used: usize,
    pub budget: usize,
    pub latest_eval_return: Option<f64>,
}

impl From<RunStatus> for RunStatusView {
    fn from(s: RunStatus) -> Self {
        RunStatusView {
            phase: serde_json::to_value(s.phase)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            step: s.step,
            total_steps: s.total_steps,
            sessions: s.sessions,
            labels_used: s.labels_used,
            budget: s.budget,
            latest_eval_return: s.latest_eval_return,
        }
    }
}

#[derive(Clone)]
struct Shared {
    env: EnvKind,
    inbox: HumanLabelInbox,
    status: StatusHandle,
}

/// Running server; stops when dropped.
pub struct FeedbackServer {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl FeedbackServer {
    /// Binds `addr` (port 0 picks a free port) and serves on a background
    /// thread.
    pub fn start(addr: &str, env: EnvKind, inbox: HumanLabelInbox, status: StatusHandle) -> Result<Self> {
        let server = Server::http(addr).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Config(format!("{addr} is not an IP address")))?;
        let server = Arc::new(server);
        let shared = Shared { env, inbox, status };
        let srv = Arc::clone(&server);
        let worker = std::thread::Builder::new()
            .name("feedback-api".into())
            .spawn(move || {
                for req in srv.incoming_requests() {
                    handle(&shared, req);
                }
            })?;
        Ok(FeedbackServer {
            server,
            addr,
            worker: Some(worker),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for FeedbackServer {
    fn drop(&mut self) {
        self.stop();
    }
}

type Reply = Response<std::io::Cursor<Vec<u8>>>;

fn header(k: &str, v: &str) -> Header {
    Header::from_bytes(k.as_bytes(), v.as_bytes()).expect("static header")
}

fn json<T: Serialize>(code: u16, body: &T) -> Reply {
    let bytes = serde_json::to_vec(body).unwrap_or_default();
    Response::from_data(bytes)
        .with_status_code(code)
        .with_header(header("Content-Type", "application/json"))
}

fn error(code: u16, msg: impl Into<String>) -> Reply {
    json(code, &serde_json::json!({ "error": msg.into() }))
}

fn handle(shared: &Shared, mut req: Request) {
    let path = req.url().split('?').next().unwrap_or("").to_string();
    let reply = match (req.method(), path.as_str()) {
        (Method::Get, "/api/queries/next") => next_query(shared),
        (Method::Post, "/api/labels") => submit_label(shared, &mut req),
        (Method::Get, "/api/status") => status(shared),
        (Method::Options, _) => Response::from_data(Vec::new()).with_status_code(204),
        (_, "/api/queries/next" | "/api/labels" | "/api/status") => error(405, "method not allowed"),
        _ => error(404, format!("no route for {path}")),
    };
    let reply = reply
        .with_header(header("Access-Control-Allow-Origin", "*"))
        .with_header(header("Access-Control-Allow-Headers", "Content-Type"))
        .with_header(header("Access-Control-Allow-Methods", "GET, POST, OPTIONS"));
    let _ = req.respond(reply);
}

fn next_query(shared: &Shared) -> Reply {
    match shared.inbox.next_pending() {
        None => Response::from_data(Vec::new()).with_status_code(204),
        Some(q) => match QueryPayload::from_query(shared.env, &q) {
            Ok(p) => json(200, &p),
            Err(e) => error(500, e.to_string()),
        },
    }
}

fn submit_label(shared: &Shared, req: &mut Request) -> Reply {
    let mut body = Vec::new();
    if let Err(e) = req.as_reader().take(MAX_BODY).read_to_end(&mut body) {
        return error(400, e.to_string());
    }
    let sub: LabelSubmission = match serde_json::from_slice(&body) {
        Ok(s) => s,
        Err(e) => return error(400, format!("bad label submission: {e}")),
    };
    match shared.inbox.answer(sub.id, sub.choice) {
        Ok(()) => json(200, &serde_json::json!({ "status": "accepted", "id": sub.id })),
        Err(Error::NotFound(m)) => error(404, m),
        Err(Error::Conflict(m)) => error(409, m),
        Err(e) => error(500, e.to_string()),
    }
}

fn status(shared: &Shared) -> Reply {
    json(
        200,
        &StatusPayload {
            run: shared.status.snapshot().into(),
            pending_queries: shared.inbox.pending_count(),
        },
    )
}
