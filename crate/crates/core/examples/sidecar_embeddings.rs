//! Feeds precomputed per-comment matrices (for instance contextual
//! embeddings from an external encoder) to the classifier, falling back to
//! the static table for comments the sidecar does not cover.
//!
//!     cargo run --example sidecar_embeddings

use viso::embed::{embed_sequence, EmbeddingProvider, SidecarStore};
use viso::normalize::RawComment;
use viso::pipeline::{CnnClassifier, Predictor, Preprocessor};

fn main() -> anyhow::Result<()> {
    let pre = Preprocessor::bundled();
    let fixture = CnnClassifier::fixture();
    let params = fixture.params().clone();
    let table = fixture.provider().table.clone();
    let max_len = params.arch.max_len;

    // stand-in for encoder output: the static rows, dampened
    let mut store = SidecarStore::new(table.dim());
    for (id, text) in [("yt-1", "vkl."), ("yt-2", "bài hát hay quá")] {
        let mut m = embed_sequence(&pre.tokens(text), &table, max_len);
        m.rows.iter_mut().for_each(|v| *v *= 0.5);
        store.insert(id, m)?;
    }
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("sidecar.bin");
    store.save(&path)?;
    let store = SidecarStore::load(&path, table.dim())?;
    println!("sidecar holds {} comments", store.len());

    let provider = EmbeddingProvider::with_sidecar(table.clone(), store)?;
    let with_sidecar = Predictor::new(pre.clone(), CnnClassifier::new(params.clone(), provider.clone())?);
    let static_only = Predictor::fixture();
    for (id, text) in [("yt-1", "vkl."), ("yt-2", "bài hát hay quá"), ("yt-3", "lũ ba que cút khỏi việt nam")] {
        let c = RawComment::new(id, text);
        let a = with_sidecar.predict(&c)?;
        let b = static_only.predict(&c)?;
        println!("{id} {text:?}\n  sidecar {} {:.3?}\n  static  {} {:.3?}", a.label, a.probs, b.label, b.probs);
    }

    let strict = EmbeddingProvider {
        fallback_to_static: false,
        ..provider
    };
    let strict = Predictor::new(pre, CnnClassifier::new(params, strict)?);
    match strict.predict(&RawComment::new("yt-9", "không có trong sidecar")) {
        Ok(p) => println!("unexpected prediction {p:?}"),
        Err(e) => println!("without fallback: {e}"),
    }
    Ok(())
}
