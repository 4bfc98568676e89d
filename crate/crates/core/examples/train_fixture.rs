//! Trains the small fixture model on synthetic comments and writes
//! `fixtures/textcnn.ckpt` and `fixtures/embeddings.txt`.
//!
//!     cargo run --release --example train_fixture [-- <out-dir>]

use std::path::PathBuf;

use viso::pipeline::Preprocessor;
use viso::synth::{train_fixture, FixtureRecipe};
use viso::textcnn::{model_version, save_checkpoint};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&out)?;

    let recipe = FixtureRecipe::default();
    let started = std::time::Instant::now();
    let (table, outcome) = train_fixture(&recipe, &Preprocessor::bundled())?;
    for r in &outcome.history {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.3}  dev F1 {:.3}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.dev_f1.unwrap_or(f64::NAN)
        );
    }
    println!("best epoch {} ({:.1?})", outcome.best_epoch, started.elapsed());

    save_checkpoint(&outcome.params, &out.join("textcnn.ckpt"))?;
    table.save(&out.join("embeddings.txt"))?;
    println!("wrote {} ({})", out.display(), model_version(&outcome.params));
    Ok(())
}
