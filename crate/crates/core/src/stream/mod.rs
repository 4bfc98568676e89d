//! Micro-batch streaming engine.
//!
//! Topology: one thread per source, a batcher thread, and a processing
//! thread that classifies each batch (in parallel, order-preserving) and
//! is the only writer of the sink files. Every record holds a permit from
//! an in-flight gate from ingestion until it is written, so a slow sink
//! blocks the sources instead of growing memory.

mod fake;
mod sink;
mod source;

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, NUM_CLASSES};
use crate::normalize::RawComment;
use crate::pipeline::Predictor;

pub use fake::{page_json, FakeCommentServer, FakeItem};
pub use sink::{read_jsonl, DeadLetterSink, JsonlDeadLetters, JsonlSink, MemorySink, RowSink};
pub use source::{
    open_source, HttpPollConfig, HttpPollSource, ReplaySource, Source, SourceConfig, TcpSource, VecSource,
    API_KEY_ENV,
};

pub const DEFAULT_QUEUE_CAP: usize = 1024;
pub const DEFAULT_BATCH_INTERVAL_MS: u64 = 1000;
pub const DEFAULT_MAX_BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sink write failed after {attempts} attempts: {error}")]
    Sink { attempts: u32, error: std::io::Error },
    #[error("dead-letter write failed: {0}")]
    DeadLetter(std::io::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("pipeline thread panicked")]
    Panicked,
}

/// Wall-clock source for ingest timestamps and latencies.
pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64() * 1000.0)
    }
}

/// A clock that never moves; makes sink files reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn now_ms(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    #[serde(flatten)]
    pub comment: RawComment,
    pub ingest_ts: i64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkRow {
    pub id: String,
    pub text: String,
    pub source: String,
    pub fetched_at: i64,
    pub ingest_ts: i64,
    pub seq: u64,
    pub label: Label,
    pub label_code: f64,
    pub probs: [f64; NUM_CLASSES],
    pub model_version: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub id: Option<String>,
    pub source: String,
    pub reason: String,
    pub raw: String,
    pub ingest_ts: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Record(StreamRecord),
    Dead(DeadLetter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroBatch {
    pub batch_id: u64,
    pub records: Vec<StreamRecord>,
    pub dead_letters: Vec<DeadLetter>,
    /// Batcher-relative milliseconds.
    pub window: (f64, f64),
}

impl MicroBatch {
    pub fn len(&self) -> usize {
        self.records.len() + self.dead_letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Groups records into batches on a fixed tick, or earlier when `max_batch`
/// items are waiting. Time is passed in explicitly.
#[derive(Debug)]
pub struct MicroBatcher {
    interval_ms: f64,
    max_batch: usize,
    tick_start: f64,
    next_id: u64,
    records: Vec<StreamRecord>,
    dead: Vec<DeadLetter>,
}

impl MicroBatcher {
    pub fn new(interval_ms: u64, max_batch: usize, now: f64) -> Result<Self, StreamError> {
        if interval_ms == 0 {
            return Err(StreamError::Config("batch interval must be positive".into()));
        }
        if max_batch == 0 {
            return Err(StreamError::Config("max batch must be positive".into()));
        }
        Ok(Self {
            interval_ms: interval_ms as f64,
            max_batch,
            tick_start: now,
            next_id: 0,
            records: Vec::new(),
            dead: Vec::new(),
        })
    }

    pub fn pending(&self) -> usize {
        self.records.len() + self.dead.len()
    }

    pub fn next_deadline(&self) -> f64 {
        self.tick_start + self.interval_ms
    }

    pub fn push(&mut self, item: Ingested, now: f64) -> Option<MicroBatch> {
        match item {
            Ingested::Record(r) => self.records.push(r),
            Ingested::Dead(d) => self.dead.push(d),
        }
        if self.pending() >= self.max_batch {
            self.take(now)
        } else {
            None
        }
    }

    /// Emits the buffer if the current tick has elapsed; empty ticks emit nothing.
    pub fn tick(&mut self, now: f64) -> Option<MicroBatch> {
        if now < self.next_deadline() {
            return None;
        }
        let batch = self.take(now);
        let elapsed_ticks = ((now - self.tick_start) / self.interval_ms).floor();
        self.tick_start += elapsed_ticks * self.interval_ms;
        batch
    }

    pub fn flush(&mut self, now: f64) -> Option<MicroBatch> {
        self.take(now)
    }

    fn take(&mut self, now: f64) -> Option<MicroBatch> {
        if self.pending() == 0 {
            return None;
        }
        let batch = MicroBatch {
            batch_id: self.next_id,
            records: std::mem::take(&mut self.records),
            dead_letters: std::mem::take(&mut self.dead),
            window: (self.tick_start, now),
        };
        self.next_id += 1;
        Some(batch)
    }
}

/// Classifies every record of a batch. Rows come back in record order;
/// records the classifier rejects become dead letters.
pub fn process_batch(batch: &MicroBatch, predictor: &Predictor, clock: &dyn Clock) -> (Vec<SinkRow>, Vec<DeadLetter>) {
    let results: Vec<Result<SinkRow, DeadLetter>> = batch
        .records
        .par_iter()
        .map(|r| match predictor.predict(&r.comment) {
            Ok(p) => Ok(SinkRow {
                id: r.comment.id.clone(),
                text: r.comment.text.clone(),
                source: r.comment.source.clone(),
                fetched_at: r.comment.fetched_at,
                ingest_ts: r.ingest_ts,
                seq: r.seq,
                label: p.label,
                label_code: p.label_code,
                probs: p.probs,
                model_version: p.model_version,
                latency_ms: (clock.now_ms() - r.ingest_ts as f64).max(0.0),
            }),
            Err(e) => Err(DeadLetter {
                id: Some(r.comment.id.clone()),
                source: r.comment.source.clone(),
                reason: format!("classify: {e}"),
                raw: r.comment.text.clone(),
                ingest_ts: r.ingest_ts,
            }),
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut dead = batch.dead_letters.clone();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(d) => dead.push(d),
        }
    }
    (rows, dead)
}

/// Shared shutdown signal.
#[derive(Debug, Clone, Default)]
pub struct StopFlag(Arc<AtomicBool>);

impl StopFlag {
    pub fn stop(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    /// Sleeps up to `d`, waking early when stopped. Returns `false` if stopped.
    pub fn sleep(&self, d: Duration) -> bool {
        let end = Instant::now() + d;
        while !self.is_stopped() {
            let now = Instant::now();
            if now >= end {
                return true;
            }
            std::thread::sleep((end - now).min(Duration::from_millis(20)));
        }
        false
    }
}

/// Counting semaphore bounding the records alive inside the pipeline.
#[derive(Debug, Clone)]
pub struct InFlightGate(Arc<GateState>);

#[derive(Debug)]
struct GateState {
    capacity: usize,
    counts: Mutex<(usize, usize)>,
    freed: Condvar,
}

impl InFlightGate {
    pub fn new(capacity: usize) -> Self {
        Self(Arc::new(GateState {
            capacity,
            counts: Mutex::new((0, 0)),
            freed: Condvar::new(),
        }))
    }

    /// Blocks while the gate is full.
    pub fn acquire(&self) {
        let g = &self.0;
        let mut counts = g.counts.lock().expect("gate lock");
        while counts.0 >= g.capacity {
            counts = g.freed.wait(counts).expect("gate lock");
        }
        counts.0 += 1;
        counts.1 = counts.1.max(counts.0);
    }

    pub fn release(&self, n: usize) {
        let mut counts = self.0.counts.lock().expect("gate lock");
        counts.0 = counts.0.saturating_sub(n);
        self.0.freed.notify_all();
    }

    pub fn current(&self) -> usize {
        self.0.counts.lock().expect("gate lock").0
    }

    pub fn peak(&self) -> usize {
        self.0.counts.lock().expect("gate lock").1
    }
}

struct EmitterInner {
    source: String,
    seq: Mutex<u64>,
    tx: Sender<Ingested>,
    gate: InFlightGate,
    clock: Arc<dyn Clock>,
    stop: StopFlag,
    counters: Arc<Counters>,
}

/// Handle a source uses to push records into the pipeline. Stamps
/// `ingest_ts` and a per-source `seq`.
#[derive(Clone)]
pub struct Emitter(Arc<EmitterInner>);

impl Emitter {
    pub fn source_name(&self) -> &str {
        &self.0.source
    }

    pub fn stop_flag(&self) -> &StopFlag {
        &self.0.stop
    }

    pub fn is_stopped(&self) -> bool {
        self.0.stop.is_stopped()
    }

    pub fn now_ms(&self) -> f64 {
        self.0.clock.now_ms()
    }

    fn send(&self, item: Ingested) -> bool {
        self.0.gate.acquire();
        if self.0.tx.send(item).is_err() {
            self.0.gate.release(1);
            return false;
        }
        self.0.counters.ingested.fetch_add(1, Ordering::SeqCst);
        true
    }

    /// Sends a comment; invalid comments go to the dead-letter stream.
    /// Returns `false` once the pipeline no longer accepts input.
    pub fn record(&self, mut comment: RawComment) -> bool {
        if let Err(reason) = comment.validate() {
            let raw = serde_json::to_string(&comment).unwrap_or_default();
            let id = (!comment.id.is_empty()).then(|| comment.id.clone());
            return self.dead_letter(id, raw, reason);
        }
        if comment.source.is_empty() {
            comment.source = self.0.source.clone();
        }
        // the lock spans stamping and sending so seq order is channel order
        let mut seq = self.0.seq.lock().expect("seq lock");
        let record = StreamRecord {
            comment,
            ingest_ts: self.0.clock.now_ms().floor() as i64,
            seq: *seq,
        };
        *seq += 1;
        self.send(Ingested::Record(record))
    }

    pub fn dead_letter(&self, id: Option<String>, raw: impl Into<String>, reason: impl Into<String>) -> bool {
        let d = DeadLetter {
            id,
            source: self.0.source.clone(),
            reason: reason.into(),
            raw: raw.into(),
            ingest_ts: self.0.clock.now_ms().floor() as i64,
        };
        self.send(Ingested::Dead(d))
    }
}

/// Called after each batch is durably written, with only the new rows.
pub trait Observer: Send + Sync {
    fn on_batch(&self, rows: &[SinkRow], dead_letters: &[DeadLetter]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 4,
            initial_backoff_ms: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub batch_interval_ms: u64,
    pub max_batch: usize,
    pub queue_cap: usize,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batch_interval_ms: DEFAULT_BATCH_INTERVAL_MS,
            max_batch: DEFAULT_MAX_BATCH,
            queue_cap: DEFAULT_QUEUE_CAP,
            retry: RetryPolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if self.batch_interval_ms == 0 {
            return Err(StreamError::Config("batch_interval_ms must be positive".into()));
        }
        if self.max_batch == 0 || self.queue_cap == 0 {
            return Err(StreamError::Config("max_batch and queue_cap must be positive".into()));
        }
        if self.retry.attempts == 0 {
            return Err(StreamError::Config("retry attempts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Counters {
    ingested: AtomicU64,
    written: AtomicU64,
    duplicates: AtomicU64,
    dead: AtomicU64,
    batches: AtomicU64,
}

/// Live counters of a running pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub ingested: u64,
    pub rows_written: u64,
    pub duplicates_skipped: u64,
    pub dead_letters: u64,
    pub batches: u64,
}

impl Progress {
    /// Items that have left the pipeline one way or another.
    pub fn settled(&self) -> u64 {
        self.rows_written + self.duplicates_skipped + self.dead_letters
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub progress: Progress,
    pub peak_in_flight: usize,
    pub source_errors: Vec<String>,
    pub elapsed_ms: f64,
}

impl PipelineReport {
    pub fn throughput(&self) -> f64 {
        if self.elapsed_ms <= 0.0 {
            0.0
        } else {
            self.progress.ingested as f64 * 1000.0 / self.elapsed_ms
        }
    }
}

pub struct Pipeline {
    cfg: PipelineConfig,
    predictor: Predictor,
    sink: Box<dyn RowSink>,
    dead_letters: Option<Box<dyn DeadLetterSink>>,
    observer: Option<Arc<dyn Observer>>,
    clock: Arc<dyn Clock>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, predictor: Predictor, sink: impl RowSink + 'static) -> Self {
        Self {
            cfg,
            predictor,
            sink: Box::new(sink),
            dead_letters: None,
            observer: None,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_dead_letters(mut self, d: impl DeadLetterSink + 'static) -> Self {
        self.dead_letters = Some(Box::new(d));
        self
    }

    pub fn with_observer(mut self, o: Arc<dyn Observer>) -> Self {
        self.observer = Some(o);
        self
    }

    pub fn with_clock(mut self, c: Arc<dyn Clock>) -> Self {
        self.clock = c;
        self
    }

    /// Runs until every source finishes, then drains.
    pub fn run(self, sources: Vec<Box<dyn Source>>) -> Result<PipelineReport, StreamError> {
        self.spawn(sources)?.join()
    }

    pub fn spawn(self, sources: Vec<Box<dyn Source>>) -> Result<PipelineHandle, StreamError> {
        self.cfg.validate()?;
        let started = Instant::now();
        let stop = StopFlag::default();
        let gate = InFlightGate::new(self.cfg.queue_cap);
        let counters = Arc::new(Counters::default());
        let (ingest_tx, ingest_rx) = bounded::<Ingested>(self.cfg.queue_cap);
        let (batch_tx, batch_rx) = bounded::<MicroBatch>(4);
        let source_errors = Arc::new(Mutex::new(Vec::new()));

        let mut source_threads = Vec::new();
        for source in sources {
            let emitter = Emitter(Arc::new(EmitterInner {
                source: source.name(),
                seq: Mutex::new(0),
                tx: ingest_tx.clone(),
                gate: gate.clone(),
                clock: self.clock.clone(),
                stop: stop.clone(),
                counters: counters.clone(),
            }));
            let errors = source_errors.clone();
            source_threads.push(std::thread::spawn(move || {
                let name = emitter.source_name().to_string();
                if let Err(e) = source.run(emitter) {
                    tracing::error!(source = %name, "source failed: {e}");
                    errors.lock().expect("errors lock").push(format!("{name}: {e}"));
                }
            }));
        }
        drop(ingest_tx);

        let cfg = self.cfg;
        let batcher = std::thread::spawn(move || run_batcher(cfg, ingest_rx, batch_tx));

        let processor = {
            let gate = gate.clone();
            let counters = counters.clone();
            let stop = stop.clone();
            std::thread::spawn(move || self.run_processor(batch_rx, gate, counters, stop))
        };

        Ok(PipelineHandle {
            stop,
            gate,
            counters,
            source_threads,
            batcher,
            processor,
            source_errors,
            started,
        })
    }

    fn run_processor(
        mut self,
        batches: Receiver<MicroBatch>,
        gate: InFlightGate,
        counters: Arc<Counters>,
        stop: StopFlag,
    ) -> Result<(), StreamError> {
        let mut failure = None;
        for batch in batches {
            let n = batch.len();
            if failure.is_none() {
                if let Err(e) = self.handle_batch(&batch, &counters) {
                    tracing::error!("halting pipeline: {e}");
                    stop.stop();
                    failure = Some(e);
                }
            }
            // after a failure, keep draining so blocked sources can exit
            gate.release(n);
        }
        failure.map_or(Ok(()), Err)
    }

    fn handle_batch(&mut self, batch: &MicroBatch, counters: &Counters) -> Result<(), StreamError> {
        let (rows, dead) = process_batch(batch, &self.predictor, self.clock.as_ref());
        let mut seen = std::collections::HashSet::new();
        let fresh: Vec<SinkRow> = rows
            .into_iter()
            .filter(|r| !self.sink.contains(&r.id) && seen.insert(r.id.clone()))
            .collect();
        let duplicates = batch.records.len() - fresh.len() - (dead.len() - batch.dead_letters.len());
        write_with_retry(self.sink.as_mut(), &fresh, self.cfg.retry)?;
        if let Some(d) = self.dead_letters.as_mut() {
            d.append(&dead).map_err(StreamError::DeadLetter)?;
        }
        counters.written.fetch_add(fresh.len() as u64, Ordering::SeqCst);
        counters.duplicates.fetch_add(duplicates as u64, Ordering::SeqCst);
        counters.dead.fetch_add(dead.len() as u64, Ordering::SeqCst);
        counters.batches.fetch_add(1, Ordering::SeqCst);
        if let Some(o) = &self.observer {
            o.on_batch(&fresh, &dead);
        }
        tracing::debug!(batch = batch.batch_id, rows = fresh.len(), dead = dead.len(), "batch written");
        Ok(())
    }
}

fn write_with_retry(sink: &mut dyn RowSink, rows: &[SinkRow], policy: RetryPolicy) -> Result<(), StreamError> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut backoff = Duration::from_millis(policy.initial_backoff_ms);
    let mut attempt = 1;
    loop {
        match sink.append(rows) {
            Ok(()) => return Ok(()),
            Err(error) if attempt >= policy.attempts => {
                return Err(StreamError::Sink {
                    attempts: attempt,
                    error,
                })
            }
            Err(e) => {
                tracing::warn!(attempt, "sink write failed, retrying: {e}");
                std::thread::sleep(backoff);
                backoff *= 2;
                attempt += 1;
            }
        }
    }
}

fn run_batcher(cfg: PipelineConfig, rx: Receiver<Ingested>, tx: Sender<MicroBatch>) {
    let start = Instant::now();
    let now = || start.elapsed().as_secs_f64() * 1000.0;
    let mut batcher = MicroBatcher::new(cfg.batch_interval_ms, cfg.max_batch, now()).expect("config validated");
    let emit = |b: Option<MicroBatch>| match b {
        Some(b) => tx.send(b).is_ok(),
        None => true,
    };
    loop {
        let wait = (batcher.next_deadline() - now()).max(0.0);
        let ok = match rx.recv_timeout(Duration::from_secs_f64(wait / 1000.0)) {
            Ok(item) => emit(batcher.push(item, now())) && emit(batcher.tick(now())),
            Err(RecvTimeoutError::Timeout) => emit(batcher.tick(now())),
            Err(RecvTimeoutError::Disconnected) => {
                emit(batcher.flush(now()));
                return;
            }
        };
        if !ok {
            return;
        }
    }
}

pub struct PipelineHandle {
    stop: StopFlag,
    gate: InFlightGate,
    counters: Arc<Counters>,
    source_threads: Vec<JoinHandle<()>>,
    batcher: JoinHandle<()>,
    processor: JoinHandle<Result<(), StreamError>>,
    source_errors: Arc<Mutex<Vec<String>>>,
    started: Instant,
}

impl PipelineHandle {
    pub fn stop_flag(&self) -> StopFlag {
        self.stop.clone()
    }

    /// Asks sources to stop; everything already ingested is still written.
    pub fn stop(&self) {
        self.stop.stop();
    }

    pub fn in_flight(&self) -> usize {
        self.gate.current()
    }

    pub fn progress(&self) -> Progress {
        let c = &self.counters;
        Progress {
            ingested: c.ingested.load(Ordering::SeqCst),
            rows_written: c.written.load(Ordering::SeqCst),
            duplicates_skipped: c.duplicates.load(Ordering::SeqCst),
            dead_letters: c.dead.load(Ordering::SeqCst),
            batches: c.batches.load(Ordering::SeqCst),
        }
    }

    /// Polls until `settled()` reaches `n` or the timeout passes.
    pub fn wait_settled(&self, n: u64, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while Instant::now() < end {
            if self.progress().settled() >= n {
                return true;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        self.progress().settled() >= n
    }

    pub fn join(self) -> Result<PipelineReport, StreamError> {
        for t in self.source_threads {
            t.join().map_err(|_| StreamError::Panicked)?;
        }
        self.batcher.join().map_err(|_| StreamError::Panicked)?;
        self.processor.join().map_err(|_| StreamError::Panicked)??;
        let progress = Progress {
            ingested: self.counters.ingested.load(Ordering::SeqCst),
            rows_written: self.counters.written.load(Ordering::SeqCst),
            duplicates_skipped: self.counters.duplicates.load(Ordering::SeqCst),
            dead_letters: self.counters.dead.load(Ordering::SeqCst),
            batches: self.counters.batches.load(Ordering::SeqCst),
        };
        let source_errors = std::mem::take(&mut *self.source_errors.lock().expect("errors lock"));
        Ok(PipelineReport {
            progress,
            peak_in_flight: self.gate.peak(),
            source_errors,
            elapsed_ms: self.started.elapsed().as_secs_f64() * 1000.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64) -> Ingested {
        Ingested::Record(StreamRecord {
            comment: RawComment::new(format!("r{i}"), "x"),
            ingest_ts: 0,
            seq: i,
        })
    }

    #[test]
    fn batcher_max_batch_split() {
        let mut b = MicroBatcher::new(1000, 2, 0.0).unwrap();
        let mut out = Vec::new();
        for i in 0..5 {
            out.extend(b.push(rec(i), i as f64));
        }
        assert!(b.tick(999.0).is_none());
        out.extend(b.tick(1000.0));
        let sizes: Vec<usize> = out.iter().map(MicroBatch::len).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let ids: Vec<u64> = out.iter().map(|b| b.batch_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let seqs: Vec<u64> = out.iter().flat_map(|b| b.records.iter().map(|r| r.seq)).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn batcher_ticks() {
        let mut b = MicroBatcher::new(100, 64, 0.0).unwrap();
        for i in 0..5 {
            assert!(b.push(rec(i), 10.0 + i as f64).is_none());
        }
        let batch = b.tick(100.0).unwrap();
        assert_eq!(batch.len(), 5);
        // empty ticks emit nothing
        assert!(b.tick(200.0).is_none());
        assert!(b.tick(350.0).is_none());
        assert_eq!(b.next_deadline(), 400.0);
        b.push(rec(9), 360.0);
        assert_eq!(b.tick(400.0).unwrap().batch_id, 1);
        assert!(b.flush(401.0).is_none());
        assert!(MicroBatcher::new(0, 1, 0.0).is_err());
    }

    #[test]
    fn gate_counts() {
        let g = InFlightGate::new(2);
        g.acquire();
        g.acquire();
        assert_eq!(g.current(), 2);
        g.release(1);
        g.acquire();
        g.release(2);
        assert_eq!((g.current(), g.peak()), (0, 2));
    }
}
