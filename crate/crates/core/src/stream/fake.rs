//! A local stand-in for the comment-thread listing endpoint, for tests and
//! demos of the polling source.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use serde_json::json;
use tokio::sync::oneshot;

pub const FAKE_PATH: &str = "/youtube/v3/commentThreads";

#[derive(Debug, Clone)]
pub struct FakeItem {
    pub id: String,
    pub text: String,
}

impl FakeItem {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// A listing page in the API's JSON shape.
pub fn page_json(items: &[FakeItem], next_page_token: Option<&str>) -> String {
    let items: Vec<_> = items
        .iter()
        .map(|i| {
            json!({
                "kind": "youtube#commentThread",
                "id": i.id,
                "snippet": {"topLevelComment": {"id": i.id, "snippet": {
                    "textDisplay": i.text,
                    "textOriginal": i.text,
                    "publishedAt": "2024-01-01T00:00:00Z",
                }}},
            })
        })
        .collect();
    let mut page = json!({"kind": "youtube#commentThreadListResponse", "items": items});
    if let Some(t) = next_page_token {
        page["nextPageToken"] = json!(t);
    }
    page.to_string()
}

#[derive(Default)]
struct Script {
    responses: Vec<(u16, String)>,
    served: usize,
    queries: Vec<String>,
}

/// Serves scripted responses in order, repeating the last one once the
/// script runs out. Stops when dropped.
pub struct FakeCommentServer {
    addr: SocketAddr,
    script: Arc<Mutex<Script>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

async fn serve_page(State(script): State<Arc<Mutex<Script>>>, RawQuery(q): RawQuery) -> impl IntoResponse {
    let mut s = script.lock().expect("script lock");
    s.queries.push(q.unwrap_or_default());
    let i = s.served.min(s.responses.len().saturating_sub(1));
    s.served += 1;
    let (status, body) = s.responses.get(i).cloned().unwrap_or((200, page_json(&[], None)));
    (
        StatusCode::from_u16(status).unwrap_or(StatusCode::OK),
        [(header::CONTENT_TYPE, "application/json")],
        body,
    )
}

impl FakeCommentServer {
    /// Each response is a JSON body served with status 200.
    pub fn start(pages: Vec<String>) -> std::io::Result<Self> {
        Self::start_with_status(pages.into_iter().map(|p| (200, p)).collect())
    }

    pub fn start_with_status(responses: Vec<(u16, String)>) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let script = Arc::new(Mutex::new(Script {
            responses,
            ..Script::default()
        }));
        let app = Router::new().route(FAKE_PATH, get(serve_page)).with_state(script.clone());
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => return tracing::error!("fake server: {e}"),
                };
                let shutdown = async {
                    let _ = rx.await;
                };
                if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                    tracing::error!("fake server: {e}");
                }
            });
        });
        Ok(Self {
            addr,
            script,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// URL of the listing endpoint.
    pub fn url(&self) -> String {
        format!("http://{}{FAKE_PATH}", self.addr)
    }

    pub fn requests(&self) -> usize {
        self.script.lock().expect("script lock").served
    }

    /// Raw query strings received so far.
    pub fn queries(&self) -> Vec<String> {
        self.script.lock().expect("script lock").queries.clone()
    }
}

impl Drop for FakeCommentServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
