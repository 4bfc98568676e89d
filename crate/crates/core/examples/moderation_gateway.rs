//! The moderation gateway wired by hand: a stream pipeline feeds the
//! gateway, which serves classify, decisions, stats and the live SSE feed.
//! The example plays the dashboard with a few HTTP calls.
//!
//!     cargo run --example moderation_gateway            # scripted walk-through
//!     cargo run --example moderation_gateway -- serve   # keep serving until Ctrl-C
//!
//! `viso serve` does the same wiring from a config file.

use std::time::Duration;

use futures::StreamExt;
use serde_json::{json, Value};
use viso::gateway::{router, FeedItem, Gateway, GatewayOptions};
use viso::normalize::RawComment;
use viso::pipeline::Predictor;
use viso::stream::{JsonlSink, Pipeline, PipelineConfig, VecSource};

fn http(method: &str, url: &str, body: Option<Value>) -> anyhow::Result<(u16, Value)> {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = match body {
        Some(b) => agent.post(url).header("content-type", "application/json").send(b.to_string())?,
        None if method == "GET" => agent.get(url).call()?,
        None => anyhow::bail!("unsupported call"),
    };
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string()?;
    Ok((status, serde_json::from_str(&body).unwrap_or(Value::Null)))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let dir = tempfile::tempdir()?;
    let predictor = Predictor::fixture();
    let gw = Gateway::new(Some(predictor.clone()), GatewayOptions::new(dir.path().join("decisions.jsonl")))?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let app = router(gw.clone());
    tokio::spawn(async move { axum::serve(listener, app).await });
    println!("gateway on {base}");

    // what a dashboard would receive over GET /v1/stream
    let mut feed = Box::pin(gw.subscribe());
    let watcher = tokio::spawn(async move {
        for _ in 0..3 {
            match feed.next().await {
                Some(FeedItem::Row(json)) => println!("feed: {json}"),
                Some(FeedItem::Gap(n)) => println!("feed: missed {n} rows"),
                None => break,
            }
        }
    });

    let incoming = vec![
        RawComment::new("yt-1", "Bài hát hayyy, cảm ơn bạn"),
        RawComment::new("yt-2", "vkl."),
        RawComment::new("yt-3", "lũ ba que cút khỏi việt nam"),
    ];
    let sink = JsonlSink::open(dir.path().join("sink.jsonl"))?;
    let pipeline = Pipeline::new(PipelineConfig::default(), predictor, sink).with_observer(gw.clone());
    tokio::task::spawn_blocking(move || pipeline.run(vec![Box::new(VecSource::new("demo", incoming))])).await??;
    tokio::time::timeout(Duration::from_secs(5), watcher).await??;

    let calls = tokio::task::spawn_blocking(move || -> anyhow::Result<()> {
        let (s, v) = http("POST", &format!("{base}/v1/classify"), Some(json!({"text": "ngu vl"})))?;
        println!("POST /v1/classify -> {s} {v}");
        let decision = json!({"comment_id": "yt-2", "action": "delete", "moderator": "mod-1", "decided_at": 1_700_000_000_000i64});
        let (s, v) = http("POST", &format!("{base}/v1/decisions"), Some(decision))?;
        println!("POST /v1/decisions -> {s} {v}");
        let (s, v) = http("GET", &format!("{base}/v1/decisions/yt-2"), None)?;
        println!("GET /v1/decisions/yt-2 -> {s} {v}");
        let (s, v) = http("GET", &format!("{base}/v1/stats"), None)?;
        println!("GET /v1/stats -> {s} {v}");
        let (s, v) = http("GET", &format!("{base}/v1/health"), None)?;
        println!("GET /v1/health -> {s} {v}");
        Ok(())
    });
    calls.await??;

    if std::env::args().nth(1).as_deref() == Some("serve") {
        println!("serving until Ctrl-C");
        tokio::signal::ctrl_c().await?;
    }
    Ok(())
}
