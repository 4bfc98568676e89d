//! HTTP moderation gateway: on-demand classification, a live feed of
//! classified comments, moderator decisions and operational statistics.
//!
//! Routes (all JSON unless noted):
//!
//! - `POST /v1/classify` `{"text": ...}` returns a prediction
//! - `POST /v1/decisions` records a keep/delete decision
//! - `GET /v1/decisions/{id}` returns the latest decision for a comment
//! - `GET /v1/stream` server-sent events, one `data:` line per sink row
//! - `GET /v1/stats`, `GET /v1/health`
//!
//! There is no authentication; the gateway assumes a single trusted operator.

use std::collections::{HashMap, HashSet};
use std::convert::Infallible;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio_stream::wrappers::errors::BroadcastStreamRecvError;
use tokio_stream::wrappers::BroadcastStream;

use crate::label::{Label, NUM_CLASSES};
use crate::pipeline::{CnnClassifier, LoadError, Predictor, Preprocessor, ResourcePaths};
use crate::stream::{
    open_source, read_jsonl, DeadLetter, JsonlDeadLetters, JsonlSink, Observer, Pipeline, PipelineConfig,
    SinkRow, SourceConfig, StreamError, TcpSource, DEFAULT_BATCH_INTERVAL_MS, DEFAULT_MAX_BATCH,
    DEFAULT_QUEUE_CAP,
};

pub const MAX_TEXT_CHARS: usize = 10_000;
pub const DEFAULT_HEARTBEAT_MS: u64 = 15_000;
pub const DEFAULT_EVENT_BUFFER: usize = 1024;
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Keep,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModerationDecision {
    pub comment_id: String,
    pub action: Action,
    pub moderator: String,
    /// UTC milliseconds.
    pub decided_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub counts: HashMap<Label, u64>,
    pub total_processed: u64,
    pub dead_letter_count: u64,
    pub mean_latency_ms: f64,
    pub uptime_s: f64,
}

#[derive(Debug, Default)]
struct StatsInner {
    counts: [u64; NUM_CLASSES],
    dead: u64,
    latency_sum: f64,
}

impl StatsInner {
    fn add_rows(&mut self, rows: &[SinkRow]) {
        for r in rows {
            self.counts[r.label.index()] += 1;
            self.latency_sum += r.latency_ms;
        }
    }
}

/// Items of the live feed.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedItem {
    /// A serialized sink row.
    Row(String),
    /// The subscriber fell behind and this many rows were dropped.
    Gap(u64),
}

impl FeedItem {
    fn into_event(self) -> Event {
        match self {
            FeedItem::Row(json) => Event::default().data(json),
            FeedItem::Gap(n) => Event::default().event("gap").data(json!({ "dropped": n }).to_string()),
        }
    }
}

type DecisionJob = (ModerationDecision, oneshot::Sender<io::Result<()>>);

/// Shared state behind every route; also observes the stream pipeline.
pub struct Gateway {
    predictor: Option<Predictor>,
    stats: Mutex<StatsInner>,
    started: Instant,
    known_ids: RwLock<HashSet<String>>,
    events: broadcast::Sender<String>,
    decisions: mpsc::Sender<DecisionJob>,
    current: RwLock<HashMap<String, ModerationDecision>>,
    heartbeat: Duration,
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub decision_log: PathBuf,
    pub heartbeat: Duration,
    pub event_buffer: usize,
}

impl GatewayOptions {
    pub fn new(decision_log: impl Into<PathBuf>) -> Self {
        Self {
            decision_log: decision_log.into(),
            heartbeat: Duration::from_millis(DEFAULT_HEARTBEAT_MS),
            event_buffer: DEFAULT_EVENT_BUFFER,
        }
    }
}

async fn decision_writer(mut file: tokio::fs::File, mut jobs: mpsc::Receiver<DecisionJob>) {
    while let Some((d, reply)) = jobs.recv().await {
        let mut line = serde_json::to_string(&d).expect("decision serializes");
        line.push('\n');
        let res = async {
            file.write_all(line.as_bytes()).await?;
            file.flush().await?;
            file.sync_data().await
        }
        .await;
        let _ = reply.send(res);
    }
}

impl Gateway {
    /// Must be called inside a Tokio runtime: it starts the decision-log writer.
    pub fn new(predictor: Option<Predictor>, opts: GatewayOptions) -> io::Result<Arc<Self>> {
        let mut current = HashMap::new();
        if opts.decision_log.exists() {
            for d in read_jsonl::<ModerationDecision>(&opts.decision_log)? {
                current.insert(d.comment_id.clone(), d);
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&opts.decision_log)?;
        let (tx, rx) = mpsc::channel(256);
        tokio::spawn(decision_writer(tokio::fs::File::from_std(file), rx));
        let (events, _) = broadcast::channel(opts.event_buffer.max(1));
        Ok(Arc::new(Self {
            predictor,
            stats: Mutex::default(),
            started: Instant::now(),
            known_ids: RwLock::default(),
            events,
            decisions: tx,
            current: RwLock::new(current),
            heartbeat: opts.heartbeat,
        }))
    }

    /// Counts rows already in a sink file and makes their ids decidable.
    pub fn seed_from_sink(&self, path: &Path) -> io::Result<usize> {
        if !path.exists() {
            return Ok(0);
        }
        let rows: Vec<SinkRow> = read_jsonl(path)?;
        self.record_rows(&rows);
        Ok(rows.len())
    }

    fn record_rows(&self, rows: &[SinkRow]) {
        {
            let mut ids = self.known_ids.write().expect("ids lock");
            ids.extend(rows.iter().map(|r| r.id.clone()));
        }
        self.stats.lock().expect("stats lock").add_rows(rows);
    }

    pub fn model_loaded(&self) -> bool {
        self.predictor.is_some()
    }

    pub fn stats(&self) -> StatsSnapshot {
        let s = self.stats.lock().expect("stats lock");
        let total: u64 = s.counts.iter().sum();
        StatsSnapshot {
            counts: Label::ALL.iter().map(|l| (*l, s.counts[l.index()])).collect(),
            total_processed: total,
            dead_letter_count: s.dead,
            mean_latency_ms: if total == 0 { 0.0 } else { s.latency_sum / total as f64 },
            uptime_s: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Live feed of rows produced from now on.
    pub fn subscribe(&self) -> impl Stream<Item = FeedItem> + Send + 'static {
        BroadcastStream::new(self.events.subscribe()).map(|r| match r {
            Ok(json) => FeedItem::Row(json),
            Err(BroadcastStreamRecvError::Lagged(n)) => FeedItem::Gap(n),
        })
    }

    pub fn decision(&self, comment_id: &str) -> Option<ModerationDecision> {
        self.current.read().expect("decision lock").get(comment_id).cloned()
    }

    /// Appends to the decision log, then updates the current state.
    pub async fn record_decision(&self, d: ModerationDecision) -> io::Result<()> {
        let (tx, rx) = oneshot::channel();
        self.decisions
            .send((d.clone(), tx))
            .await
            .map_err(|_| io::Error::other("decision writer stopped"))?;
        rx.await.map_err(|_| io::Error::other("decision writer stopped"))??;
        self.current.write().expect("decision lock").insert(d.comment_id.clone(), d);
        Ok(())
    }

    pub fn is_known(&self, comment_id: &str) -> bool {
        self.known_ids.read().expect("ids lock").contains(comment_id)
    }
}

impl Observer for Gateway {
    fn on_batch(&self, rows: &[SinkRow], dead_letters: &[DeadLetter]) {
        self.record_rows(rows);
        self.stats.lock().expect("stats lock").dead += dead_letters.len() as u64;
        for r in rows {
            if let Ok(json) = serde_json::to_string(r) {
                // no subscribers is not an error
                let _ = self.events.send(json);
            }
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn classify(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let Ok(v) = serde_json::from_slice::<Value>(&body) else {
        return error(StatusCode::BAD_REQUEST, "body must be JSON");
    };
    let Some(text) = v.get("text").and_then(Value::as_str) else {
        return error(StatusCode::BAD_REQUEST, "missing string field `text`");
    };
    if text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "`text` is empty");
    }
    if text.chars().count() > MAX_TEXT_CHARS {
        return error(StatusCode::PAYLOAD_TOO_LARGE, format!("`text` exceeds {MAX_TEXT_CHARS} characters"));
    }
    let Some(predictor) = gw.predictor.clone() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    let text = text.to_string();
    match tokio::task::spawn_blocking(move || predictor.predict_text(&text)).await {
        Ok(Ok(p)) => Json(p).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn post_decision(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let Ok(v) = serde_json::from_slice::<Value>(&body) else {
        return error(StatusCode::BAD_REQUEST, "body must be JSON");
    };
    let d: ModerationDecision = match serde_json::from_value(v) {
        Ok(d) => d,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if !gw.is_known(&d.comment_id) {
        return error(StatusCode::NOT_FOUND, format!("unknown comment_id {:?}", d.comment_id));
    }
    match gw.record_decision(d.clone()).await {
        Ok(()) => (StatusCode::CREATED, Json(d)).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_decision(State(gw): State<Arc<Gateway>>, UrlPath(id): UrlPath<String>) -> Response {
    match gw.decision(&id) {
        Some(d) => Json(d).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no decision for {id:?}")),
    }
}

async fn stream_events(State(gw): State<Arc<Gateway>>) -> impl IntoResponse {
    let events = gw.subscribe().map(|item| Ok::<_, Infallible>(item.into_event()));
    Sse::new(events).keep_alive(KeepAlive::new().interval(gw.heartbeat).text("heartbeat"))
}

async fn stats(State(gw): State<Arc<Gateway>>) -> Json<StatsSnapshot> {
    Json(gw.stats())
}

async fn health(State(gw): State<Arc<Gateway>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "model_loaded": gw.model_loaded(),
        "model_version": gw.predictor.as_ref().map(|p| p.model_version().to_string()),
    }))
}

pub fn router(gw: Arc<Gateway>) -> Router {
    Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/decisions", post(post_decision))
        .route("/v1/decisions/{id}", get(get_decision))
        .route("/v1/stream", get(stream_events))
        .route("/v1/stats", get(stats))
        .route("/v1/health", get(health))
        .with_state(gw)
}

/// Gateway configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub embeddings_path: Option<PathBuf>,
    #[serde(default)]
    pub resources: ResourcePaths,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    pub sink: PathBuf,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_queue_cap")]
    pub queue_cap: usize,
    #[serde(default = "default_batch_interval")]
    pub batch_interval_ms: u64,
    /// Defaults to `decisions.jsonl` next to the sink.
    #[serde(default)]
    pub decision_log: Option<PathBuf>,
    /// Defaults to `dead_letters.jsonl` next to the sink.
    #[serde(default)]
    pub dead_letter: Option<PathBuf>,
    #[serde(default = "default_heartbeat")]
    pub heartbeat_ms: u64,
    #[serde(default = "default_event_buffer")]
    pub event_buffer: usize,
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_queue_cap() -> usize {
    DEFAULT_QUEUE_CAP
}

fn default_batch_interval() -> u64 {
    DEFAULT_BATCH_INTERVAL_MS
}

fn default_heartbeat() -> u64 {
    DEFAULT_HEARTBEAT_MS
}

fn default_event_buffer() -> usize {
    DEFAULT_EVENT_BUFFER
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

impl GatewayConfig {
    pub fn new(sink: impl Into<PathBuf>) -> Self {
        serde_json::from_value(json!({ "sink": sink.into() })).expect("defaults deserialize")
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| GatewayError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn decision_log_path(&self) -> PathBuf {
        self.decision_log
            .clone()
            .unwrap_or_else(|| sibling(&self.sink, "decisions.jsonl"))
    }

    pub fn dead_letter_path(&self) -> PathBuf {
        self.dead_letter
            .clone()
            .unwrap_or_else(|| sibling(&self.sink, "dead_letters.jsonl"))
    }

    /// Loads the model named by the config. Embeddings default to
    /// `embeddings.txt` beside the checkpoint.
    pub fn predictor(&self) -> Result<Option<Predictor>, GatewayError> {
        let Some(model) = &self.model_path else {
            return Ok(None);
        };
        let embeddings = self
            .embeddings_path
            .clone()
            .unwrap_or_else(|| sibling(model, "embeddings.txt"));
        let pre = Preprocessor::from_paths(&self.resources).map_err(LoadError::from)?;
        let cnn = CnnClassifier::load(model, &embeddings)?;
        Ok(Some(Predictor::new(pre, cnn)))
    }
}

/// Runs the gateway and, when a model is loaded, the stream pipeline feeding
/// it, until `shutdown` resolves. Without a configured source the pipeline
/// listens for NDJSON over TCP on `port + 1`.
pub async fn run(
    cfg: GatewayConfig,
    predictor: Option<Predictor>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), GatewayError> {
    let opts = GatewayOptions {
        decision_log: cfg.decision_log_path(),
        heartbeat: Duration::from_millis(cfg.heartbeat_ms.max(1)),
        event_buffer: cfg.event_buffer,
    };
    let gw = Gateway::new(predictor.clone(), opts)?;
    let seeded = gw.seed_from_sink(&cfg.sink)?;
    tracing::info!(seeded, sink = %cfg.sink.display(), "loaded existing sink rows");

    let pipeline = match predictor {
        Some(predictor) => {
            let source = match &cfg.source {
                Some(s) => open_source(s)?,
                None => {
                    let addr = format!("127.0.0.1:{}", cfg.port.wrapping_add(1));
                    let src = TcpSource::bind(&addr)?;
                    tracing::info!(addr = %src.local_addr()?, "no source configured, accepting NDJSON over TCP");
                    Box::new(src)
                }
            };
            let pcfg = PipelineConfig {
                batch_interval_ms: cfg.batch_interval_ms,
                queue_cap: cfg.queue_cap,
                max_batch: DEFAULT_MAX_BATCH.min(cfg.queue_cap),
                ..PipelineConfig::default()
            };
            let handle = Pipeline::new(pcfg, predictor, JsonlSink::open(&cfg.sink)?)
                .with_dead_letters(JsonlDeadLetters::open(cfg.dead_letter_path())?)
                .with_observer(gw.clone())
                .spawn(vec![source])?;
            Some(handle)
        }
        None => {
            tracing::warn!("no model loaded: classify returns 503 and no stream runs");
            None
        }
    };

    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], cfg.port))).await?;
    tracing::info!(addr = %listener.local_addr()?, "gateway listening");
    let served = axum::serve(listener, router(gw)).with_graceful_shutdown(shutdown).await;

    if let Some(handle) = pipeline {
        handle.stop();
        let report = tokio::task::spawn_blocking(move || handle.join())
            .await
            .map_err(|e| io::Error::other(e.to_string()))??;
        tracing::info!(?report, "pipeline drained");
    }
    served?;
    Ok(())
}
