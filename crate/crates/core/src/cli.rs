//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::augment::{balance_dataset, read_examples, write_examples, EdaConfig, LabeledExample, SynonymMap};
use crate::baseline::{BaselineModel, DEFAULT_ALPHA};
use crate::embed::{embed_sequence, EmbeddingTable};
use crate::gateway::{self, GatewayConfig};
use crate::label::{Label, LabelCounts};
use crate::metrics::{confusion, kfold_pairs, MetricReport};
use crate::normalize::RawComment;
use crate::pipeline::{bundled_synonyms, Classifier, CnnClassifier, MnbClassifier, Predictor, Preprocessor, ResourcePaths};
use crate::segment::{corpus_stats, word_segment, TokenSequence};
use crate::stream::{
    open_source, JsonlDeadLetters, JsonlSink, MemorySink, Pipeline, PipelineConfig, SourceConfig, StopFlag,
    VecSource, DEFAULT_BATCH_INTERVAL_MS, DEFAULT_MAX_BATCH, DEFAULT_QUEUE_CAP,
};
use crate::synth::{self, SynthConfig};
use crate::textcnn::{self, AdamConfig, Architecture, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "viso", version, about = "Vietnamese hate-speech detection and moderation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase-1 cleaning of comments
    Normalize(TextInput),
    /// Phase-1 and Phase-2 processing into token sequences
    Segment(SegmentArgs),
    /// Balance a labeled token corpus with EDA
    Augment(AugmentArgs),
    /// Train a Text-CNN checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on labeled token sequences
    Eval(EvalArgs),
    /// TF-IDF + multinomial Naive Bayes baseline
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Classify comments
    Predict(PredictArgs),
    /// Run the streaming pipeline until its source ends or Ctrl-C
    Stream(StreamArgs),
    /// Run the moderation gateway together with the stream pipeline
    Serve(ServeArgs),
    /// Measure streaming throughput on synthetic comments
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ResourceArgs {
    /// Word-segmentation lexicon (one phrase per line)
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Teencode dictionary (TSV)
    #[arg(long)]
    teencode: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Tokens exempt from repeated-letter collapsing
    #[arg(long)]
    protected: Option<PathBuf>,
}

impl ResourceArgs {
    fn paths(&self) -> ResourcePaths {
        ResourcePaths {
            lexicon: self.lexicon.clone(),
            teencode: self.teencode.clone(),
            stopwords: self.stopwords.clone(),
            protected: self.protected.clone(),
        }
    }

    fn preprocessor(&self) -> anyhow::Result<Preprocessor> {
        Ok(Preprocessor::from_paths(&self.paths())?)
    }
}

#[derive(Debug, Args)]
struct TextInput {
    /// A single text to process
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// JSON-lines comments (`id`, `text`, ...), a labeled `.csv`
    /// (`free_text`, `label_id`), or `-` for stdin
    #[arg(long)]
    input: Option<String>,
    /// Treat each input line as raw text, numbered from 1
    #[arg(long)]
    plain: bool,
    #[arg(long, default_value = "-")]
    output: String,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    input: TextInput,
    /// Input lines carry a `label`; emit labeled examples
    #[arg(long)]
    labeled: bool,
    /// Print teencode/stopword statistics instead of sequences
    #[arg(long)]
    stats: bool,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Labeled examples (JSON lines of `id`, `tokens`, `label`)
    #[arg(long)]
    input: PathBuf,
    /// Target counts, e.g. `clean=19886,offensive=10147,hate=16849`
    #[arg(long)]
    targets: LabelCounts,
    #[arg(long, default_value_t = crate::augment::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synonym dictionary (TSV); the bundled one when absent
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labeled examples (JSON lines of `id`, `tokens`, `label`)
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Word vectors in text format (`V D` header)
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 2e-5)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Text-CNN checkpoint
    #[arg(long, required_unless_present = "fixture_model")]
    model: Option<PathBuf>,
    /// Defaults to `embeddings.txt` next to the checkpoint
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Use the small model shipped with the crate
    #[arg(long, conflicts_with = "model")]
    fixture_model: bool,
}

impl ModelArgs {
    fn classifier(&self) -> anyhow::Result<CnnClassifier> {
        match &self.model {
            _ if self.fixture_model => Ok(CnnClassifier::fixture()),
            Some(model) => {
                let emb = self.embeddings.clone().unwrap_or_else(|| sibling(model, "embeddings.txt"));
                CnnClassifier::load(model, &emb).with_context(|| format!("loading {}", model.display()))
            }
            None => bail!("no model given"),
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Labeled examples (JSON lines of `id`, `tokens`, `label`)
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Subcommand)]
enum BaselineCommand {
    /// Fit TF-IDF + MNB on labeled examples
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also report k-fold cross-validated scores
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify raw comments with a fitted model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: TextInput,
    },
    /// Score a fitted model on labeled examples
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    input: TextInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SourceKind {
    Replay,
    Tcp,
    #[value(name = "http_poll")]
    HttpPoll,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long, value_enum)]
    source: SourceKind,
    /// Source settings as JSON, or `@file.json`
    #[arg(long)]
    source_config: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    sink: PathBuf,
    /// Defaults to `dead_letters.jsonl` next to the sink
    #[arg(long)]
    dead_letter: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BATCH_INTERVAL_MS)]
    batch_interval_ms: u64,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_BATCH)]
    max_batch: usize,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Gateway config file; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, conflicts_with = "model")]
    fixture_model: bool,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    sink: Option<PathBuf>,
    #[arg(long, value_enum, requires = "source_config")]
    source: Option<SourceKind>,
    #[arg(long, requires = "source")]
    source_config: Option<String>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    batch_interval_ms: u64,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Text-CNN checkpoint; the shipped fixture model when absent
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn open_input(path: &str) -> anyhow::Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let f = File::open(path).with_context(|| format!("opening {path}"))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

fn open_output(path: &str) -> anyhow::Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        let f = File::create(path).with_context(|| format!("creating {path}"))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn write_json_line(out: &mut dyn Write, v: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct InputLine {
    id: String,
    text: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    fetched_at: i64,
    #[serde(default)]
    label: Option<Label>,
}

/// Comments (with optional labels) from `--text` or `--input`.
fn read_comments(input: &TextInput) -> anyhow::Result<Vec<(RawComment, Option<Label>)>> {
    if let Some(text) = &input.text {
        return Ok(vec![(RawComment::new("1", text.clone()), None)]);
    }
    let Some(path) = &input.input else {
        bail!("one of --text or --input is required");
    };
    if path.ends_with(".csv") && !input.plain {
        let rows = crate::dataset::load_labeled_csv(Path::new(path), "")?;
        return Ok(rows.into_iter().map(|(c, l)| (c, Some(l))).collect());
    }
    let mut out = Vec::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line?;
        if input.plain {
            out.push((RawComment::new((i + 1).to_string(), line), None));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let l: InputLine = serde_json::from_str(&line).with_context(|| format!("{path}:{}", i + 1))?;
        let c = RawComment {
            id: l.id,
            text: l.text,
            source: l.source,
            fetched_at: l.fetched_at,
        };
        out.push((c, l.label));
    }
    Ok(out)
}

fn cmd_normalize(args: &TextInput) -> anyhow::Result<()> {
    let pre = args.resources.preprocessor()?;
    let mut out = open_output(&args.output)?;
    for (c, _) in read_comments(args)? {
        let text = pre.phase1(&c.text);
        write_json_line(&mut out, &RawComment { text, ..c })?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_segment(args: &SegmentArgs) -> anyhow::Result<()> {
    let pre = args.input.resources.preprocessor()?;
    let comments = read_comments(&args.input)?;
    let mut out = open_output(&args.input.output)?;
    if args.stats {
        let segmented: Vec<Vec<String>> = comments
            .iter()
            .map(|(c, _)| word_segment(&pre.phase1(&c.text), &pre.phase2.lexicon))
            .collect();
        let stats = corpus_stats(&segmented, &pre.phase2.teencode, &pre.phase2.stopwords)?;
        write_json_line(&mut out, &stats)?;
    } else {
        for (c, label) in comments {
            let tokens = pre.tokens(&c.text);
            if args.labeled {
                let label = label.with_context(|| format!("comment {} has no label", c.id))?;
                write_json_line(&mut out, &LabeledExample { id: c.id, tokens, label })?;
            } else {
                write_json_line(&mut out, &TokenSequence::new(c.id, tokens))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_augment(args: &AugmentArgs) -> anyhow::Result<()> {
    let data = read_examples(&args.input)?;
    let synonyms = match &args.synonyms {
        Some(p) => SynonymMap::load(p)?,
        None => bundled_synonyms(),
    };
    let stopwords = match &args.stopwords {
        Some(p) => crate::segment::Stopwords::load(p)?,
        None => Preprocessor::bundled().phase2.stopwords,
    };
    let cfg = EdaConfig {
        alpha: args.alpha,
        seed: args.seed,
        synonyms,
        stopwords,
        ..EdaConfig::default()
    };
    let balanced = balance_dataset(&data, args.targets, &cfg)?;
    let counts = LabelCounts::of(balanced.iter().map(|e| e.label));
    eprintln!(
        "{} -> {} examples (clean={}, offensive={}, hate={})",
        data.len(),
        balanced.len(),
        counts.get(Label::Clean),
        counts.get(Label::Offensive),
        counts.get(Label::Hate)
    );
    let mut out = open_output(&args.output)?;
    write_examples(&mut out, &balanced)?;
    Ok(())
}

fn encode_examples(
    examples: &[LabeledExample],
    table: &EmbeddingTable,
    max_len: usize,
) -> Vec<(crate::embed::SequenceMatrix, Label)> {
    examples
        .iter()
        .map(|e| (embed_sequence(&e.tokens, table, max_len), e.label))
        .collect()
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let table = EmbeddingTable::load(&args.embeddings)?;
    let train_set = encode_examples(&read_examples(&args.train)?, &table, args.max_len);
    let dev_set = match &args.dev {
        Some(p) => encode_examples(&read_examples(p)?, &table, args.max_len),
        None => Vec::new(),
    };
    let arch = Architecture::new(table.dim(), args.max_len)?;
    let cfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: args.lr,
            ..AdamConfig::default()
        },
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        stop_at_train_accuracy: None,
    };
    let outcome = textcnn::train(&train_set, &dev_set, arch, &cfg)?;
    for r in &outcome.history {
        eprintln!(
            "epoch {:>3}  loss {:.4}  train acc {:.4}  dev F1 {}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.dev_f1.map_or("-".into(), |f| format!("{f:.4}"))
        );
    }
    textcnn::save_checkpoint(&outcome.params, &args.out)?;
    println!(
        "{}",
        json!({
            "checkpoint": args.out,
            "model_version": textcnn::model_version(&outcome.params),
            "best_epoch": outcome.best_epoch,
            "initial_loss": outcome.initial_loss,
        })
    );
    Ok(())
}

fn score(classifier: &dyn Classifier, data: &[LabeledExample]) -> anyhow::Result<MetricReport> {
    let mut preds = Vec::with_capacity(data.len());
    for e in data {
        preds.push(classifier.classify(&e.id, &e.tokens)?.label);
    }
    let golds: Vec<Label> = data.iter().map(|e| e.label).collect();
    Ok(confusion(&preds, &golds)?.report()?)
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let classifier = args.model.classifier()?;
    let report = score(&classifier, &read_examples(&args.data)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_baseline(cmd: &BaselineCommand) -> anyhow::Result<()> {
    match cmd {
        BaselineCommand::Fit {
            data,
            alpha,
            out,
            folds,
            seed,
        } => {
            let data = read_examples(data)?;
            let docs: Vec<&[String]> = data.iter().map(|e| e.tokens.as_slice()).collect();
            let labels: Vec<Label> = data.iter().map(|e| e.label).collect();
            if let Some(k) = folds {
                let mut reports = Vec::new();
                for (train, test) in kfold_pairs(data.len(), *k, *seed)? {
                    let d: Vec<&[String]> = train.iter().map(|&i| docs[i]).collect();
                    let l: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
                    let model = MnbClassifier::new(BaselineModel::fit(&d, &l, *alpha)?);
                    let held: Vec<LabeledExample> = test.iter().map(|&i| data[i].clone()).collect();
                    reports.push(score(&model, &held)?);
                }
                let mean_f1 = reports.iter().map(|r| r.f1).sum::<f64>() / reports.len() as f64;
                println!("{}", json!({ "folds": reports, "mean_f1": mean_f1 }));
            }
            let model = BaselineModel::fit(&docs, &labels, *alpha)?;
            model.save(out)?;
            eprintln!("vocabulary {} terms, saved {}", model.tfidf.vocab_size(), out.display());
        }
        BaselineCommand::Predict { model, input } => {
            let pred = Predictor::new(input.resources.preprocessor()?, MnbClassifier::new(BaselineModel::load(model)?));
            predict_all(&pred, input)?;
        }
        BaselineCommand::Eval { model, data } => {
            let m = MnbClassifier::new(BaselineModel::load(model)?);
            println!("{}", serde_json::to_string_pretty(&score(&m, &read_examples(data)?)?)?);
        }
    }
    Ok(())
}

fn predict_all(pred: &Predictor, input: &TextInput) -> anyhow::Result<()> {
    let mut out = open_output(&input.output)?;
    for (c, _) in read_comments(input)? {
        let p = pred.predict(&c)?;
        let mut v = serde_json::to_value(&p)?;
        v["id"] = Value::String(c.id);
        write_json_line(&mut out, &v)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> anyhow::Result<()> {
    let pred = Predictor::new(args.input.resources.preprocessor()?, args.model.classifier()?);
    predict_all(&pred, &args.input)
}

fn source_config(kind: SourceKind, raw: &str) -> anyhow::Result<SourceConfig> {
    let text = match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => raw.to_string(),
    };
    let mut v: Value = serde_json::from_str(&text).context("--source-config is not JSON")?;
    let Some(obj) = v.as_object_mut() else {
        bail!("--source-config must be a JSON object");
    };
    let kind = match kind {
        SourceKind::Replay => "replay",
        SourceKind::Tcp => "tcp",
        SourceKind::HttpPoll => "http_poll",
    };
    obj.insert("kind".into(), Value::String(kind.into()));
    serde_json::from_value(v).context("invalid --source-config")
}

/// Stops the pipeline on Ctrl-C.
fn stop_on_ctrl_c(stop: StopFlag) {
    std::thread::spawn(move || {
        let Ok(rt) = tokio::runtime::Builder::new_current_thread().enable_all().build() else {
            return;
        };
        if rt.block_on(tokio::signal::ctrl_c()).is_ok() {
            tracing::info!("interrupt received, draining");
            stop.stop();
        }
    });
}

fn cmd_stream(args: &StreamArgs) -> anyhow::Result<()> {
    let source = open_source(&source_config(args.source, &args.source_config)?)?;
    let pred = Predictor::new(args.resources.preprocessor()?, args.model.classifier()?);
    let cfg = PipelineConfig {
        batch_interval_ms: args.batch_interval_ms,
        queue_cap: args.queue_cap,
        max_batch: args.max_batch,
        ..PipelineConfig::default()
    };
    let dead = args.dead_letter.clone().unwrap_or_else(|| sibling(&args.sink, "dead_letters.jsonl"));
    let handle = Pipeline::new(cfg, pred, JsonlSink::open(&args.sink)?)
        .with_dead_letters(JsonlDeadLetters::open(&dead)?)
        .spawn(vec![source])?;
    stop_on_ctrl_c(handle.stop_flag());
    let report = handle.join()?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn cmd_serve(args: &ServeArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => GatewayConfig::load(p)?,
        None => GatewayConfig::new(args.sink.clone().unwrap_or_else(|| PathBuf::from("sink.jsonl"))),
    };
    if let Some(m) = &args.model {
        cfg.model_path = Some(m.clone());
    }
    if let Some(e) = &args.embeddings {
        cfg.embeddings_path = Some(e.clone());
    }
    if let Some(p) = args.port {
        cfg.port = p;
    }
    if let Some(s) = &args.sink {
        cfg.sink = s.clone();
    }
    if let (Some(kind), Some(raw)) = (args.source, &args.source_config) {
        cfg.source = Some(source_config(kind, raw)?);
    }
    let predictor = if args.fixture_model {
        Some(Predictor::new(Preprocessor::from_paths(&cfg.resources)?, CnnClassifier::fixture()))
    } else {
        cfg.predictor()?
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(gateway::run(cfg, predictor, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchReport {
    comments: usize,
    rows: u64,
    dead_letters: u64,
    batches: u64,
    elapsed_ms: f64,
    comments_per_s: f64,
    mean_latency_ms: f64,
    max_latency_ms: f64,
    peak_in_flight: usize,
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let classifier = match &args.model {
        Some(m) => {
            let emb = args.embeddings.clone().unwrap_or_else(|| sibling(m, "embeddings.txt"));
            CnnClassifier::load(m, &emb)?
        }
        None => CnnClassifier::fixture(),
    };
    let pred = Predictor::new(Preprocessor::bundled(), classifier);
    let comments = synth::comments(
        args.n,
        &SynthConfig {
            seed: args.seed,
            ..SynthConfig::default()
        },
    );
    let sink = MemorySink::default();
    let cfg = PipelineConfig {
        batch_interval_ms: args.batch_interval_ms,
        queue_cap: args.queue_cap,
        max_batch: DEFAULT_MAX_BATCH.min(args.queue_cap),
        ..PipelineConfig::default()
    };
    let report = Pipeline::new(cfg, pred, sink.clone())
        .with_dead_letters(sink.clone())
        .run(vec![Box::new(VecSource::new("bench", comments))])?;
    let rows = sink.rows();
    let latencies: Vec<f64> = rows.iter().map(|r| r.latency_ms).collect();
    let out = BenchReport {
        comments: args.n,
        rows: report.progress.rows_written,
        dead_letters: report.progress.dead_letters,
        batches: report.progress.batches,
        elapsed_ms: report.elapsed_ms,
        comments_per_s: report.throughput(),
        mean_latency_ms: latencies.iter().sum::<f64>() / latencies.len().max(1) as f64,
        max_latency_ms: latencies.iter().copied().fold(0.0, f64::max),
        peak_in_flight: report.peak_in_flight,
    };
    println!(
        "{} comments in {:.1} ms: {:.0} comments/s, mean latency {:.2} ms, max {:.2} ms",
        out.comments, out.elapsed_ms, out.comments_per_s, out.mean_latency_ms, out.max_latency_ms
    );
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Normalize(a) => cmd_normalize(&a),
        Command::Segment(a) => cmd_segment(&a),
        Command::Augment(a) => cmd_augment(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Baseline(c) => cmd_baseline(&c),
        Command::Predict(a) => cmd_predict(&a),
        Command::Stream(a) => cmd_stream(&a),
        Command::Serve(a) => cmd_serve(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            // many error types already embed their source in their message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            2
        }
    }
}
