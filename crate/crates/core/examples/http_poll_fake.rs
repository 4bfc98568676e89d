//! Polls a comment-thread API (YouTube Data API shaped) served by a local
//! fake, following page tokens and deduplicating across polls.
//!
//!     cargo run --example http_poll_fake

use viso::pipeline::Predictor;
use viso::stream::{page_json, FakeCommentServer, FakeItem, HttpPollConfig, HttpPollSource, MemorySink, Pipeline, PipelineConfig};

fn main() -> anyhow::Result<()> {
    let first = page_json(
        &[FakeItem::new("yt-a", "Bài hát hayyy, cảm ơn bạn"), FakeItem::new("yt-b", "vkl.")],
        Some("PAGE2"),
    );
    let second = page_json(&[FakeItem::new("yt-c", "lũ ba que cút khỏi việt nam")], None);
    // once the script runs out the fake keeps serving the last page, so the
    // second poll finds nothing new
    let server = FakeCommentServer::start(vec![first, second])?;

    let cfg = HttpPollConfig {
        poll_interval_ms: 50,
        max_polls: Some(2),
        video_id: Some("dQw4w9WgXcQ".into()),
        api_key: Some("demo-key".into()),
        ..HttpPollConfig::new(server.url())
    };
    let sink = MemorySink::default();
    let report = Pipeline::new(PipelineConfig::default(), Predictor::fixture(), sink.clone())
        .with_dead_letters(sink.clone())
        .run(vec![Box::new(HttpPollSource::new(cfg)?)])?;

    for q in server.queries() {
        println!("GET ?{q}");
    }
    for r in sink.rows() {
        println!("{:<5} {:<10} {:?}", r.id, r.label.as_str(), r.text);
    }
    println!("{} requests, {} rows", server.requests(), report.progress.rows_written);
    Ok(())
}
