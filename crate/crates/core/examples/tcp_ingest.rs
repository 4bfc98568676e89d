//! Newline-delimited JSON over TCP: a client thread writes comments (and
//! one malformed line) to the pipeline's listener.
//!
//!     cargo run --example tcp_ingest

use std::io::Write;
use std::net::TcpStream;
use std::time::Duration;

use viso::pipeline::Predictor;
use viso::stream::{MemorySink, Pipeline, PipelineConfig, TcpSource};

fn main() -> anyhow::Result<()> {
    let source = TcpSource::bind("127.0.0.1:0")?;
    let addr = source.local_addr()?;
    println!("listening on {addr}");

    let sink = MemorySink::default();
    let cfg = PipelineConfig {
        batch_interval_ms: 50,
        ..PipelineConfig::default()
    };
    let handle = Pipeline::new(cfg, Predictor::fixture(), sink.clone())
        .with_dead_letters(sink.clone())
        .spawn(vec![Box::new(source)])?;

    let client = std::thread::spawn(move || -> std::io::Result<()> {
        let mut conn = TcpStream::connect(addr)?;
        let lines = [
            r#"{"id":"t1","text":"vkl.","source":"chat"}"#,
            r#"{"id":"t2","text":"Bài hát hayyy, cảm ơn bạn"}"#,
            r#"{"id":"t3","text":"#,
            r#"{"id":"t4","text":"lũ ba que cút khỏi việt nam","fetched_at":1700000000000}"#,
        ];
        for line in lines {
            writeln!(conn, "{line}")?;
        }
        Ok(())
    });
    client.join().expect("client thread")?;

    if !handle.wait_settled(4, Duration::from_secs(5)) {
        eprintln!("timed out waiting for the pipeline");
    }
    handle.stop();
    let report = handle.join()?;
    for r in sink.rows() {
        println!("{:<3} {:<10} {:<28} {:.3?}", r.id, r.label.as_str(), format!("{:?}", r.text), r.probs);
    }
    for d in sink.dead() {
        println!("dead letter: {:?} ({})", d.raw, d.reason);
    }
    println!("{:?}", report.progress);
    Ok(())
}
