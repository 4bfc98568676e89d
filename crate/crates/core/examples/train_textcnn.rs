//! Trains a Text-CNN end to end: synthetic comments are preprocessed,
//! embedded with a random static table, trained with Adam and
//! checkpointed, then reloaded for prediction.
//!
//!     cargo run --release --example train_textcnn

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viso::embed::{embed_sequence, EmbeddingTable, SequenceMatrix};
use viso::label::Label;
use viso::metrics::confusion;
use viso::normalize::RawComment;
use viso::pipeline::{CnnClassifier, Predictor, Preprocessor};
use viso::synth::{labeled_comments, SynthConfig};
use viso::textcnn::{self, AdamConfig, Architecture, TrainConfig};

const DIM: usize = 24;
const MAX_LEN: usize = 16;

fn main() -> anyhow::Result<()> {
    let pre = Preprocessor::bundled();
    let cfg = SynthConfig {
        mix: [0.5, 0.25, 0.25],
        ..SynthConfig::default()
    };
    let data: Vec<(Vec<String>, Label)> = labeled_comments(1000, "t", &cfg)
        .into_iter()
        .map(|(c, l)| (pre.tokens(&c.text), l))
        .collect();

    // any word2vec-style text file works here; random vectors keep the example self-contained
    let vocab: BTreeSet<&str> = data.iter().flat_map(|(t, _)| t.iter().map(String::as_str)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = vocab
        .into_iter()
        .map(|w| (w.to_string(), (0..DIM).map(|_| rng.gen_range(-0.5f32..0.5)).collect::<Vec<_>>()));
    let table = EmbeddingTable::from_rows(DIM, rows)?;

    let encoded: Vec<(SequenceMatrix, Label)> =
        data.iter().map(|(t, l)| (embed_sequence(t, &table, MAX_LEN), *l)).collect();
    let (train, rest) = encoded.split_at(700);
    let (dev, test) = rest.split_at(150);

    let train_cfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        epochs: 15,
        seed: 5,
        ..TrainConfig::default()
    };
    let outcome = textcnn::train(train, dev, Architecture::new(DIM, MAX_LEN)?, &train_cfg)?;
    println!("initial loss {:.4}", outcome.initial_loss);
    for r in &outcome.history {
        println!(
            "epoch {:>2}  loss {:.4}  train acc {:.3}  dev F1 {:.3}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.dev_f1.unwrap_or(f64::NAN)
        );
    }

    let mut preds = Vec::new();
    for (m, _) in test {
        preds.push(textcnn::argmax(&textcnn::predict_probs(&outcome.params, m)?));
    }
    let golds: Vec<Label> = test.iter().map(|(_, l)| *l).collect();
    let report = confusion(&preds, &golds)?.report()?;
    println!("best epoch {}; test macro-F1 {:.3}", outcome.best_epoch, report.f1);

    let dir = tempfile::tempdir()?;
    let ckpt = dir.path().join("textcnn.ckpt");
    let emb = dir.path().join("embeddings.txt");
    textcnn::save_checkpoint(&outcome.params, &ckpt)?;
    table.save(&emb)?;
    let predictor = Predictor::new(pre, CnnClassifier::load(&ckpt, &emb)?);
    println!("reloaded {}", predictor.model_version());
    for text in ["bài hát hay quá", "ngu vãi", "lũ ba que cút khỏi việt nam"] {
        let p = predictor.predict(&RawComment::new("demo", text))?;
        println!("  {text:?} -> {} {:.3?}", p.label, p.probs);
    }
    Ok(())
}
