//! Runs both preprocessing phases over a handful of noisy comments and
//! prints teencode/stopword statistics for the batch.
//!
//!     cargo run --example normalize_comments

use viso::pipeline::Preprocessor;
use viso::segment::{corpus_stats, word_segment};

const COMMENTS: &[&str] = &[
    "Bài hát hayyyyy QUÁ https://youtu.be/abc",
    "ko đc đâu bạn ơi, vlllll",
    "Học sinh Việt Nam  giỏi   lắm kk",
    "đc đấy, call mình nhé",
    "Khuyễn   QUÁN qủa lòa",
];

fn main() -> anyhow::Result<()> {
    let pre = Preprocessor::bundled();
    let mut segmented = Vec::new();
    for text in COMMENTS {
        let clean = pre.phase1(text);
        let tokens = pre.tokens(text);
        println!("{text:?}\n  phase 1: {clean:?}\n  tokens:  {tokens:?}");
        segmented.push(word_segment(&clean, &pre.phase2.lexicon));
    }

    let stats = corpus_stats(&segmented, &pre.phase2.teencode, &pre.phase2.stopwords)?;
    println!(
        "\n{} words, {} teencode ({:.1}%), {} stopwords ({:.1}%)",
        stats.total_words, stats.teencode_count, stats.teencode_pct, stats.stopword_count, stats.stopword_pct
    );
    Ok(())
}
