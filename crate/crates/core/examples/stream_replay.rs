//! Replays a JSON-lines file through the micro-batch pipeline into a
//! JSON-lines sink, then replays it again to show the sink skipping ids it
//! already holds.
//!
//!     cargo run --release --example stream_replay [-- <n-comments>]

use std::io::Write;

use viso::pipeline::Predictor;
use viso::stream::{read_jsonl, JsonlDeadLetters, JsonlSink, Pipeline, PipelineConfig, ReplaySource, SinkRow};
use viso::synth::{comments, SynthConfig};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5000);

    let dir = tempfile::tempdir()?;
    let input = dir.path().join("comments.jsonl");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&input)?);
    for c in comments(n, &SynthConfig::default()) {
        writeln!(f, "{}", serde_json::to_string(&c)?)?;
    }
    // one broken line ends up in the dead-letter file
    writeln!(f, "{{\"id\": \"broken\"")?;
    drop(f);

    let sink = dir.path().join("predictions.jsonl");
    let dead = dir.path().join("dead_letters.jsonl");
    let cfg = PipelineConfig {
        batch_interval_ms: 100,
        ..PipelineConfig::default()
    };
    for attempt in 1..=2 {
        let report = Pipeline::new(cfg, Predictor::fixture(), JsonlSink::open(&sink)?)
            .with_dead_letters(JsonlDeadLetters::open(&dead)?)
            .run(vec![Box::new(ReplaySource::new(&input, None)?)])?;
        println!(
            "run {attempt}: {} written, {} already present, {} dead letters, {:.0} comments/s",
            report.progress.rows_written,
            report.progress.duplicates_skipped,
            report.progress.dead_letters,
            report.throughput()
        );
    }

    let rows: Vec<SinkRow> = read_jsonl(&sink)?;
    println!("sink holds {} rows; first three:", rows.len());
    for r in rows.iter().take(3) {
        println!("  {}", serde_json::to_string(r)?);
    }
    print!("dead letters: {}", std::fs::read_to_string(&dead)?);
    Ok(())
}
