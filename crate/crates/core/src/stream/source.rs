use std::collections::HashSet;
use std::io::{BufRead, BufReader, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Emitter, StreamError};
use crate::normalize::RawComment;

/// Environment variable holding the API key for live comment polling.
pub const API_KEY_ENV: &str = "VISO_API_KEY";

/// A producer of comments. `run` blocks until the source is exhausted or
/// the emitter reports a stop.
pub trait Source: Send + 'static {
    fn name(&self) -> String;
    fn run(self: Box<Self>, emit: Emitter) -> Result<(), StreamError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Replay {
        path: PathBuf,
        /// Records per second; absent or zero replays as fast as possible.
        #[serde(default)]
        rate: Option<f64>,
    },
    Tcp {
        bind: String,
    },
    HttpPoll(HttpPollConfig),
}

pub fn open_source(cfg: &SourceConfig) -> Result<Box<dyn Source>, StreamError> {
    match cfg {
        SourceConfig::Replay { path, rate } => Ok(Box::new(ReplaySource::new(path.clone(), *rate)?)),
        SourceConfig::Tcp { bind } => Ok(Box::new(TcpSource::bind(bind)?)),
        SourceConfig::HttpPoll(c) => {
            let mut c = c.clone();
            if c.api_key.is_none() {
                c.api_key = std::env::var(API_KEY_ENV).ok();
            }
            Ok(Box::new(HttpPollSource::new(c)?))
        }
    }
}

/// Paces emission to `rate` records per second.
struct Pacer {
    start: Instant,
    rate: Option<f64>,
}

impl Pacer {
    fn new(rate: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            rate: rate.filter(|r| *r > 0.0),
        }
    }

    fn wait(&self, i: usize, emit: &Emitter) -> bool {
        match self.rate {
            None => !emit.is_stopped(),
            Some(rate) => {
                let due = self.start + Duration::from_secs_f64(i as f64 / rate);
                emit.stop_flag().sleep(due.saturating_duration_since(Instant::now()))
            }
        }
    }
}

/// Replays a JSON-lines file of comments in file order.
pub struct ReplaySource {
    path: PathBuf,
    rate: Option<f64>,
}

impl ReplaySource {
    pub fn new(path: impl Into<PathBuf>, rate: Option<f64>) -> Result<Self, StreamError> {
        let path = path.into();
        if !path.is_file() {
            return Err(StreamError::Config(format!("replay file {} not found", path.display())));
        }
        if rate.is_some_and(|r| !r.is_finite() || r < 0.0) {
            return Err(StreamError::Config("replay rate must be a non-negative number".into()));
        }
        Ok(Self { path, rate })
    }
}

impl Source for ReplaySource {
    fn name(&self) -> String {
        format!("replay:{}", self.path.display())
    }

    fn run(self: Box<Self>, emit: Emitter) -> Result<(), StreamError> {
        let file = std::fs::File::open(&self.path)?;
        let pacer = Pacer::new(self.rate);
        let mut n = 0;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if !pacer.wait(n, &emit) {
                break;
            }
            n += 1;
            let sent = match serde_json::from_str::<RawComment>(&line) {
                Ok(c) => emit.record(c),
                Err(e) => emit.dead_letter(None, line, format!("line {}: {e}", i + 1)),
            };
            if !sent {
                break;
            }
        }
        Ok(())
    }
}

/// Emits comments held in memory.
pub struct VecSource {
    name: String,
    comments: Vec<RawComment>,
    rate: Option<f64>,
}

impl VecSource {
    pub fn new(name: impl Into<String>, comments: Vec<RawComment>) -> Self {
        Self {
            name: name.into(),
            comments,
            rate: None,
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = Some(rate);
        self
    }
}

impl Source for VecSource {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn run(self: Box<Self>, emit: Emitter) -> Result<(), StreamError> {
        let pacer = Pacer::new(self.rate);
        for (i, c) in self.comments.into_iter().enumerate() {
            if !pacer.wait(i, &emit) || !emit.record(c) {
                break;
            }
        }
        Ok(())
    }
}

/// Accepts TCP connections carrying newline-delimited JSON comments.
pub struct TcpSource {
    listener: TcpListener,
}

impl TcpSource {
    pub fn bind(addr: &str) -> Result<Self, StreamError> {
        let listener = TcpListener::bind(addr)?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }
}

const POLL: Duration = Duration::from_millis(50);

fn handle_line(bytes: &[u8], emit: &Emitter) -> bool {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return emit.dead_letter(None, String::from_utf8_lossy(bytes), "invalid utf-8");
    };
    let text = text.trim();
    if text.is_empty() {
        return true;
    }
    match serde_json::from_str::<RawComment>(text) {
        Ok(c) => emit.record(c),
        Err(e) => emit.dead_letter(None, text, format!("malformed json: {e}")),
    }
}

fn serve_connection(stream: TcpStream, emit: Emitter) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    if let Err(e) = stream.set_read_timeout(Some(POLL)) {
        tracing::warn!(%peer, "cannot set read timeout: {e}");
    }
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => {
                if !buf.is_empty() {
                    handle_line(&buf, &emit);
                }
                break;
            }
            Ok(_) if buf.ends_with(b"\n") => {
                if !handle_line(&buf, &emit) {
                    break;
                }
                buf.clear();
            }
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {
                if emit.is_stopped() {
                    break;
                }
            }
            Err(e) => {
                tracing::warn!(%peer, "connection error: {e}");
                break;
            }
        }
    }
    tracing::debug!(%peer, "connection closed");
}

impl Source for TcpSource {
    fn name(&self) -> String {
        match self.listener.local_addr() {
            Ok(a) => format!("tcp:{a}"),
            Err(_) => "tcp".into(),
        }
    }

    fn run(self: Box<Self>, emit: Emitter) -> Result<(), StreamError> {
        self.listener.set_nonblocking(true)?;
        let mut connections = Vec::new();
        while !emit.is_stopped() {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    let emit = emit.clone();
                    connections.push(std::thread::spawn(move || serve_connection(stream, emit)));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(e.into()),
            }
        }
        for c in connections {
            let _ = c.join();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpPollConfig {
    /// Full URL of the comment-thread listing endpoint.
    pub base_url: String,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_ms: u64,
    #[serde(default = "default_max_results")]
    pub max_results: u32,
    #[serde(default = "default_text_format")]
    pub text_format: String,
    #[serde(default)]
    pub video_id: Option<String>,
    #[serde(default)]
    pub api_key: Option<String>,
    /// Stop after this many polling rounds; runs until stopped when absent.
    #[serde(default)]
    pub max_polls: Option<usize>,
}

fn default_poll_interval() -> u64 {
    5000
}

fn default_max_results() -> u32 {
    100
}

fn default_text_format() -> String {
    "plainText".into()
}

impl HttpPollConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            poll_interval_ms: default_poll_interval(),
            max_results: default_max_results(),
            text_format: default_text_format(),
            video_id: None,
            api_key: None,
            max_polls: None,
        }
    }
}

/// Polls a comment-thread listing (the YouTube Data API shape), following
/// page tokens and emitting each comment id once.
pub struct HttpPollSource {
    cfg: HttpPollConfig,
    agent: ureq::Agent,
}

impl HttpPollSource {
    pub fn new(cfg: HttpPollConfig) -> Result<Self, StreamError> {
        if !(cfg.base_url.starts_with("http://") || cfg.base_url.starts_with("https://")) {
            return Err(StreamError::Config(format!("base_url {:?} is not an http URL", cfg.base_url)));
        }
        if !(1..=100).contains(&cfg.max_results) {
            return Err(StreamError::Config("max_results must be within 1..=100".into()));
        }
        if !matches!(cfg.text_format.as_str(), "plainText" | "html") {
            return Err(StreamError::Config("text_format must be plainText or html".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, agent })
    }

    fn fetch(&self, page_token: Option<&str>) -> Result<(u16, String), ureq::Error> {
        let mut req = self
            .agent
            .get(&self.cfg.base_url)
            .query("part", "snippet")
            .query("maxResults", self.cfg.max_results.to_string())
            .query("textFormat", &self.cfg.text_format);
        if let Some(v) = &self.cfg.video_id {
            req = req.query("videoId", v);
        }
        if let Some(k) = &self.cfg.api_key {
            req = req.query("key", k);
        }
        if let Some(t) = page_token {
            req = req.query("pageToken", t);
        }
        let mut resp = req.call()?;
        let status = resp.status().as_u16();
        Ok((status, resp.body_mut().read_to_string()?))
    }
}

fn str_at<'a>(v: &'a Value, path: &[&str]) -> Option<&'a str> {
    path.iter().try_fold(v, |v, k| v.get(k))?.as_str()
}

/// Pulls `(id, text)` out of one comment-thread item.
fn parse_item(item: &Value) -> Result<(String, String), String> {
    let id = str_at(item, &["id"]).ok_or("item without id")?;
    let snippet = &item["snippet"]["topLevelComment"]["snippet"];
    let text = str_at(snippet, &["textOriginal"])
        .or_else(|| str_at(snippet, &["textDisplay"]))
        .ok_or("item without comment text")?;
    Ok((id.to_string(), text.to_string()))
}

impl Source for HttpPollSource {
    fn name(&self) -> String {
        format!("http_poll:{}", self.cfg.base_url)
    }

    fn run(self: Box<Self>, emit: Emitter) -> Result<(), StreamError> {
        let mut seen = HashSet::new();
        let mut rounds = 0;
        'poll: while !emit.is_stopped() && self.cfg.max_polls.is_none_or(|m| rounds < m) {
            rounds += 1;
            let mut token: Option<String> = None;
            let mut tokens_this_round = HashSet::new();
            loop {
                let (status, body) = match self.fetch(token.as_deref()) {
                    Ok(r) => r,
                    Err(e) => {
                        tracing::warn!("poll failed: {e}");
                        break;
                    }
                };
                if status != 200 {
                    if !emit.dead_letter(None, body, format!("http status {status}")) {
                        break 'poll;
                    }
                    break;
                }
                let page: Value = match serde_json::from_str(&body) {
                    Ok(v) => v,
                    Err(e) => {
                        if !emit.dead_letter(None, body, format!("malformed page: {e}")) {
                            break 'poll;
                        }
                        break;
                    }
                };
                let Some(items) = page.get("items").and_then(Value::as_array) else {
                    if !emit.dead_letter(None, body, "page without items array") {
                        break 'poll;
                    }
                    break;
                };
                for item in items {
                    let sent = match parse_item(item) {
                        Ok((id, text)) => {
                            if !seen.insert(id.clone()) {
                                continue;
                            }
                            emit.record(RawComment {
                                id,
                                text,
                                source: "http_poll".into(),
                                fetched_at: emit.now_ms().floor() as i64,
                            })
                        }
                        Err(reason) => {
                            let id = str_at(item, &["id"]).map(str::to_string);
                            emit.dead_letter(id, item.to_string(), reason)
                        }
                    };
                    if !sent {
                        break 'poll;
                    }
                }
                token = str_at(&page, &["nextPageToken"]).map(str::to_string);
                let Some(t) = &token else { break };
                if !tokens_this_round.insert(t.clone()) {
                    tracing::warn!(token = %t, "page token repeated within one poll, ending the round");
                    break;
                }
                if emit.is_stopped() {
                    break;
                }
            }
            if self.cfg.max_polls.is_some_and(|m| rounds >= m) {
                break;
            }
            if !emit.stop_flag().sleep(Duration::from_millis(self.cfg.poll_interval_ms)) {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_thread_items() {
        let item: Value = serde_json::from_str(
            r#"{"id":"t1","snippet":{"topLevelComment":{"snippet":{"textDisplay":"<b>hi</b>","textOriginal":"hi"}}}}"#,
        )
        .unwrap();
        assert_eq!(parse_item(&item).unwrap(), ("t1".into(), "hi".into()));
        assert!(parse_item(&serde_json::json!({"id": "x"})).is_err());
        assert!(parse_item(&serde_json::json!({})).is_err());
    }

    #[test]
    fn config_parsing() {
        let c: SourceConfig = serde_json::from_str(r#"{"kind":"replay","path":"a.jsonl","rate":10}"#).unwrap();
        assert_eq!(
            c,
            SourceConfig::Replay {
                path: "a.jsonl".into(),
                rate: Some(10.0)
            }
        );
        let c: SourceConfig =
            serde_json::from_str(r#"{"kind":"http_poll","base_url":"http://h/x","max_results":20}"#).unwrap();
        let SourceConfig::HttpPoll(h) = c else { panic!() };
        assert_eq!((h.max_results, h.text_format.as_str()), (20, "plainText"));
        assert!(HttpPollSource::new(HttpPollConfig::new("ftp://x")).is_err());
    }
}
