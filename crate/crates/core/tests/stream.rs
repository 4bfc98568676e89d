mod common;

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};
use std::net::TcpStream;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use common::duplicates;
use viso::normalize::RawComment;
use viso::pipeline::Predictor;
use viso::stream::{
    open_source, page_json, read_jsonl, DeadLetter, FakeCommentServer, FakeItem, FixedClock, HttpPollConfig,
    HttpPollSource, JsonlDeadLetters, JsonlSink, MemorySink, Observer, Pipeline, PipelineConfig, ReplaySource,
    RetryPolicy, RowSink, SinkRow, Source, SourceConfig, StreamError, TcpSource, VecSource,
};
use viso::synth::{comments, SynthConfig};

fn fast_cfg() -> PipelineConfig {
    PipelineConfig {
        batch_interval_ms: 20,
        max_batch: 256,
        queue_cap: 256,
        retry: RetryPolicy {
            attempts: 3,
            initial_backoff_ms: 1,
        },
    }
}

fn write_replay(path: &Path, items: &[RawComment]) {
    let mut f = std::fs::File::create(path).unwrap();
    for c in items {
        writeln!(f, "{}", serde_json::to_string(c).unwrap()).unwrap();
    }
}

fn boxed(s: impl Source) -> Vec<Box<dyn Source>> {
    vec![Box::new(s)]
}

fn assert_order_per_source(rows: &[SinkRow]) {
    let mut last: HashMap<&str, u64> = HashMap::new();
    for r in rows {
        if let Some(prev) = last.insert(&r.source, r.seq) {
            assert!(r.seq > prev, "source {} went {} -> {}", r.source, prev, r.seq);
        }
    }
}

#[test]
fn replay_preserves_order_and_conserves_records() {
    let dir = tempfile::tempdir().unwrap();
    let replay = dir.path().join("in.jsonl");
    let items = comments(1500, &SynthConfig::default());
    write_replay(&replay, &items);
    let sink_path = dir.path().join("out.jsonl");
    let report = Pipeline::new(fast_cfg(), Predictor::fixture(), JsonlSink::open(&sink_path).unwrap())
        .run(boxed(ReplaySource::new(&replay, None).unwrap()))
        .unwrap();
    assert_eq!(report.progress.rows_written, 1500);
    let rows: Vec<SinkRow> = read_jsonl(&sink_path).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    let expected: Vec<&str> = items.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, expected);
    assert_order_per_source(&rows);
    for r in &rows {
        assert!([0.0, 1.0, 2.0].contains(&r.label_code));
        assert_eq!(r.label.code(), r.label_code);
        assert!(r.latency_ms >= 0.0);
    }
}

#[test]
fn replay_of_three_records_keeps_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let replay = dir.path().join("in.jsonl");
    let items = vec![RawComment::new("z", "một"), RawComment::new("a", "hai"), RawComment::new("m", "ba")];
    write_replay(&replay, &items);
    let sink = MemorySink::default();
    Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .run(boxed(ReplaySource::new(&replay, Some(500.0)).unwrap()))
        .unwrap();
    let ids: Vec<String> = sink.rows().into_iter().map(|r| r.id).collect();
    assert_eq!(ids, ["z", "a", "m"]);
}

#[test]
fn malformed_replay_lines_become_dead_letters() {
    let dir = tempfile::tempdir().unwrap();
    let replay = dir.path().join("in.jsonl");
    std::fs::write(&replay, "{\"id\":\"1\",\"text\":\"hay\"}\nnot json\n{\"id\":\"\",\"text\":\"x\"}\n{\"id\":\"2\",\"text\":\"ok\"}\n").unwrap();
    let sink = MemorySink::default();
    let report = Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .with_dead_letters(sink.clone())
        .run(boxed(ReplaySource::new(&replay, None).unwrap()))
        .unwrap();
    assert_eq!(sink.rows().len(), 2);
    let dead = sink.dead();
    assert_eq!(dead.len(), 2);
    assert!(dead[0].reason.starts_with("line 2"), "{}", dead[0].reason);
    assert_eq!(dead[1].reason, "empty id");
    assert_eq!(report.progress.settled(), 4);
}

#[test]
fn tcp_two_valid_lines_and_one_malformed() {
    let source = TcpSource::bind("127.0.0.1:0").unwrap();
    let addr = source.local_addr().unwrap();
    let sink = MemorySink::default();
    let handle = Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .with_dead_letters(sink.clone())
        .spawn(boxed(source))
        .unwrap();
    let mut conn = TcpStream::connect(addr).unwrap();
    conn.write_all(
        "{\"id\":\"t1\",\"text\":\"vkl.\",\"source\":\"yt\",\"fetched_at\":5}\n{oops\n{\"id\":\"t2\",\"text\":\"bài hát hay\"}\n"
            .as_bytes(),
    )
    .unwrap();
    drop(conn);
    assert!(handle.wait_settled(3, Duration::from_secs(10)));
    handle.stop();
    handle.join().unwrap();
    let rows = sink.rows();
    assert_eq!(rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["t1", "t2"]);
    assert_eq!(rows[0].source, "yt");
    assert_eq!(rows[0].fetched_at, 5);
    assert!(rows[1].source.starts_with("tcp:"));
    let dead = sink.dead();
    assert_eq!(dead.len(), 1);
    assert_eq!(dead[0].raw, "{oops");
    assert!(dead[0].reason.starts_with("malformed json"));
}

#[test]
fn http_poll_same_page_twice_emits_each_id_once() {
    let page = page_json(&[FakeItem::new("y1", "hay quá"), FakeItem::new("y2", "ngu vl")], None);
    let server = FakeCommentServer::start(vec![page.clone(), page]).unwrap();
    let cfg = HttpPollConfig {
        poll_interval_ms: 10,
        max_polls: Some(3),
        video_id: Some("vid".into()),
        api_key: Some("k".into()),
        ..HttpPollConfig::new(server.url())
    };
    let sink = MemorySink::default();
    Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .run(boxed(HttpPollSource::new(cfg).unwrap()))
        .unwrap();
    let ids: Vec<String> = sink.rows().into_iter().map(|r| r.id).collect();
    assert_eq!(ids, ["y1", "y2"]);
    assert_eq!(server.requests(), 3);
    let q = &server.queries()[0];
    for part in ["part=snippet", "maxResults=100", "textFormat=plainText", "videoId=vid", "key=k"] {
        assert!(q.contains(part), "{q}");
    }
}

#[test]
fn http_poll_follows_page_tokens_and_dead_letters_bad_pages() {
    let p1 = page_json(&[FakeItem::new("a", "một")], Some("NEXT"));
    let p2 = page_json(&[FakeItem::new("b", "hai")], None);
    let server = FakeCommentServer::start_with_status(vec![
        (200, p1),
        (200, p2),
        (500, "{\"error\":\"boom\"}".into()),
        (200, "not json".into()),
    ])
    .unwrap();
    let cfg = HttpPollConfig {
        poll_interval_ms: 5,
        max_polls: Some(3),
        ..HttpPollConfig::new(server.url())
    };
    let sink = MemorySink::default();
    Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .with_dead_letters(sink.clone())
        .run(boxed(HttpPollSource::new(cfg).unwrap()))
        .unwrap();
    assert_eq!(sink.rows().iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    assert!(server.queries()[1].contains("pageToken=NEXT"));
    let reasons: Vec<String> = sink.dead().into_iter().map(|d| d.reason).collect();
    assert_eq!(reasons.len(), 2, "{reasons:?}");
    assert_eq!(reasons[0], "http status 500");
    assert!(reasons[1].starts_with("malformed page"));
}

#[test]
fn source_configs_parse_and_validate() {
    let cfg: SourceConfig = serde_json::from_str(r#"{"kind":"http_poll","base_url":"http://127.0.0.1:1/x","max_results":50}"#).unwrap();
    match &cfg {
        SourceConfig::HttpPoll(c) => {
            assert_eq!(c.max_results, 50);
            assert_eq!(c.text_format, "plainText");
            assert_eq!(c.poll_interval_ms, 5000);
        }
        other => panic!("{other:?}"),
    }
    assert!(open_source(&cfg).is_ok());
    let bad: SourceConfig = serde_json::from_str(r#"{"kind":"http_poll","base_url":"ftp://x","max_results":50}"#).unwrap();
    assert!(matches!(open_source(&bad), Err(StreamError::Config(_))));
    let missing: SourceConfig = serde_json::from_str(r#"{"kind":"replay","path":"/nonexistent/file.jsonl"}"#).unwrap();
    assert!(matches!(open_source(&missing), Err(StreamError::Config(_))));
    let tcp: SourceConfig = serde_json::from_str(r#"{"kind":"tcp","bind":"127.0.0.1:0"}"#).unwrap();
    assert!(open_source(&tcp).unwrap().name().starts_with("tcp:127.0.0.1:"));
}

/// Writes part of a batch, then fails without retry: a crash mid-batch.
struct CrashingSink {
    inner: JsonlSink,
    budget: usize,
}

impl RowSink for CrashingSink {
    fn contains(&self, id: &str) -> bool {
        self.inner.contains(id)
    }

    fn append(&mut self, rows: &[SinkRow]) -> io::Result<()> {
        if rows.len() <= self.budget {
            self.budget -= rows.len();
            return self.inner.append(rows);
        }
        let (head, _) = rows.split_at(self.budget);
        self.inner.append(head)?;
        self.budget = 0;
        Err(io::Error::other("simulated crash"))
    }
}

#[test]
fn crash_mid_batch_then_restart_leaves_no_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let replay = dir.path().join("in.jsonl");
    let items = comments(1200, &SynthConfig::default());
    write_replay(&replay, &items);
    let sink_path = dir.path().join("out.jsonl");
    let cfg = PipelineConfig {
        max_batch: 100,
        retry: RetryPolicy {
            attempts: 1,
            initial_backoff_ms: 1,
        },
        ..fast_cfg()
    };
    let crashing = CrashingSink {
        inner: JsonlSink::open(&sink_path).unwrap(),
        budget: 530,
    };
    let err = Pipeline::new(cfg, Predictor::fixture(), crashing)
        .run(boxed(ReplaySource::new(&replay, None).unwrap()))
        .unwrap_err();
    assert!(matches!(err, StreamError::Sink { attempts: 1, .. }), "{err}");
    // the process died while writing the next line
    std::fs::OpenOptions::new().append(true).open(&sink_path).unwrap().write_all(b"{\"id\":\"c9").unwrap();
    let before: Vec<SinkRow> = {
        let sink = JsonlSink::open(&sink_path).unwrap();
        assert_eq!(sink.len(), 530);
        read_jsonl(&sink_path).unwrap()
    };
    assert_eq!(before.len(), 530);

    let report = Pipeline::new(cfg, Predictor::fixture(), JsonlSink::open(&sink_path).unwrap())
        .run(boxed(ReplaySource::new(&replay, None).unwrap()))
        .unwrap();
    assert_eq!(report.progress.duplicates_skipped, 530);
    let rows: Vec<SinkRow> = read_jsonl(&sink_path).unwrap();
    assert_eq!(rows.len(), 1200);
    assert!(duplicates(rows.iter().map(|r| r.id.as_str())).is_empty());
    let got: HashSet<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    assert!(items.iter().all(|c| got.contains(c.id.as_str())));
}

struct SlowSink {
    inner: MemorySink,
    delay: Duration,
}

impl RowSink for SlowSink {
    fn contains(&self, id: &str) -> bool {
        self.inner.contains(id)
    }

    fn append(&mut self, rows: &[SinkRow]) -> io::Result<()> {
        std::thread::sleep(self.delay);
        self.inner.append(rows)
    }
}

#[test]
fn slow_sink_applies_backpressure() {
    let cfg = PipelineConfig {
        queue_cap: 16,
        max_batch: 4,
        batch_interval_ms: 5,
        ..fast_cfg()
    };
    let sink = MemorySink::default();
    let slow = SlowSink {
        inner: sink.clone(),
        delay: Duration::from_millis(15),
    };
    let items = comments(200, &SynthConfig::default());
    let handle = Pipeline::new(cfg, Predictor::fixture(), slow)
        .spawn(boxed(VecSource::new("fast", items)))
        .unwrap();
    let mut max_seen = 0;
    for _ in 0..40 {
        max_seen = max_seen.max(handle.in_flight());
        let p = handle.progress();
        assert!(p.ingested - p.settled() <= 16, "{p:?}");
        std::thread::sleep(Duration::from_millis(5));
    }
    let report = handle.join().unwrap();
    assert!(report.peak_in_flight <= 16, "peak {}", report.peak_in_flight);
    assert!(max_seen >= 8, "source never filled the queue ({max_seen})");
    assert_eq!(sink.rows().len(), 200);
}

struct BrokenSink {
    calls: Arc<Mutex<u32>>,
}

impl RowSink for BrokenSink {
    fn contains(&self, _: &str) -> bool {
        false
    }

    fn append(&mut self, _: &[SinkRow]) -> io::Result<()> {
        *self.calls.lock().unwrap() += 1;
        Err(io::Error::new(io::ErrorKind::StorageFull, "disk full"))
    }
}

#[test]
fn persistent_sink_failure_halts_cleanly() {
    let calls = Arc::new(Mutex::new(0));
    let cfg = PipelineConfig {
        retry: RetryPolicy {
            attempts: 4,
            initial_backoff_ms: 1,
        },
        queue_cap: 8,
        ..fast_cfg()
    };
    // an endless source: only the halt can end this run
    let source = VecSource::new("endless", comments(100_000, &SynthConfig::default()));
    let err = Pipeline::new(cfg, Predictor::fixture(), BrokenSink { calls: calls.clone() })
        .run(boxed(source))
        .unwrap_err();
    match err {
        StreamError::Sink { attempts, error } => {
            assert_eq!(attempts, 4);
            assert_eq!(error.kind(), io::ErrorKind::StorageFull);
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(*calls.lock().unwrap(), 4);
}

#[test]
fn fixed_clock_makes_sink_bytes_identical() {
    let dir = tempfile::tempdir().unwrap();
    let replay = dir.path().join("in.jsonl");
    write_replay(&replay, &comments(400, &SynthConfig::default()));
    let run = |name: &str| {
        let path = dir.path().join(name);
        Pipeline::new(fast_cfg(), Predictor::fixture(), JsonlSink::open(&path).unwrap())
            .with_clock(Arc::new(FixedClock(1_700_000_000_000.0)))
            .run(boxed(ReplaySource::new(&replay, None).unwrap()))
            .unwrap();
        std::fs::read(path).unwrap()
    };
    let a = run("a.jsonl");
    assert!(!a.is_empty());
    assert_eq!(a, run("b.jsonl"));
}

#[test]
fn stop_drains_everything_already_ingested() {
    let sink = MemorySink::default();
    let cfg = PipelineConfig {
        batch_interval_ms: 200,
        ..fast_cfg()
    };
    let source = VecSource::new("paced", comments(10_000, &SynthConfig::default())).with_rate(400.0);
    let handle = Pipeline::new(cfg, Predictor::fixture(), sink.clone()).spawn(boxed(source)).unwrap();
    std::thread::sleep(Duration::from_millis(300));
    handle.stop();
    let report = handle.join().unwrap();
    let p = report.progress;
    assert!(p.ingested > 0 && p.ingested < 10_000, "{p:?}");
    assert_eq!(p.rows_written, p.ingested);
    assert_eq!(sink.rows().len() as u64, p.ingested);
}

#[derive(Default)]
struct Recorder(Mutex<Vec<String>>);

impl Observer for Recorder {
    fn on_batch(&self, rows: &[SinkRow], _: &[DeadLetter]) {
        self.0.lock().unwrap().extend(rows.iter().map(|r| r.id.clone()));
    }
}

#[test]
fn multiple_sources_keep_their_own_order_and_observer_sees_sink_order() {
    let dir = tempfile::tempdir().unwrap();
    let sink_path = dir.path().join("out.jsonl");
    let dead_path = dir.path().join("dead.jsonl");
    let a: Vec<RawComment> = (0..300).map(|i| RawComment::new(format!("a{i}"), "hay quá")).collect();
    let b: Vec<RawComment> = (0..300).map(|i| RawComment::new(format!("b{i}"), "ngu vl")).collect();
    let recorder = Arc::new(Recorder::default());
    Pipeline::new(fast_cfg(), Predictor::fixture(), JsonlSink::open(&sink_path).unwrap())
        .with_dead_letters(JsonlDeadLetters::open(&dead_path).unwrap())
        .with_observer(recorder.clone())
        .run(vec![Box::new(VecSource::new("A", a)), Box::new(VecSource::new("B", b))])
        .unwrap();
    let rows: Vec<SinkRow> = read_jsonl(&sink_path).unwrap();
    assert_eq!(rows.len(), 600);
    assert_order_per_source(&rows);
    for src in ["A", "B"] {
        let seqs: Vec<u64> = rows.iter().filter(|r| r.source == src).map(|r| r.seq).collect();
        assert_eq!(seqs, (0..300).collect::<Vec<u64>>());
    }
    let observed = recorder.0.lock().unwrap().clone();
    assert_eq!(observed, rows.iter().map(|r| r.id.clone()).collect::<Vec<_>>());
    assert!(std::fs::read_to_string(&dead_path).unwrap().is_empty());
}

#[test]
fn rejects_bad_pipeline_config() {
    let cfg = PipelineConfig {
        batch_interval_ms: 0,
        ..fast_cfg()
    };
    let err = Pipeline::new(cfg, Predictor::fixture(), MemorySink::default())
        .run(Vec::new())
        .unwrap_err();
    assert!(matches!(err, StreamError::Config(_)));
}

#[test]
fn http_poll_stops_following_a_cycling_page_token() {
    // the fake repeats its last page, so the token never runs out
    let page = page_json(&[FakeItem::new("loop", "hay")], Some("SAME"));
    let server = FakeCommentServer::start(vec![page]).unwrap();
    let cfg = HttpPollConfig {
        poll_interval_ms: 5,
        max_polls: Some(2),
        ..HttpPollConfig::new(server.url())
    };
    let sink = MemorySink::default();
    Pipeline::new(fast_cfg(), Predictor::fixture(), sink.clone())
        .run(boxed(HttpPollSource::new(cfg).unwrap()))
        .unwrap();
    assert_eq!(sink.rows().len(), 1);
    assert_eq!(server.requests(), 4);
}
