//! Seeded synthetic comments for demos, benchmarks and fixture training.
//!
//! Comments are stitched from small per-label phrase pools and then
//! roughened the way social-media text is: stray capitals, stretched
//! letters, links and teencode.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::{embed_sequence, EmbeddingTable, SequenceMatrix};
use crate::label::Label;
use crate::normalize::RawComment;
use crate::textcnn::{train, AdamConfig, Architecture, CnnError, TrainConfig, TrainOutcome};

const NEUTRAL: &[&str] = &[
    "video này",
    "bài hát",
    "hôm nay",
    "mọi người",
    "ca sĩ",
    "bình luận",
    "đội tuyển",
    "bây giờ",
    "người ta",
    "xem lại",
];

const CLEAN: &[&str] = &[
    "hay quá",
    "tuyệt vời",
    "cảm ơn bạn",
    "dễ thương ghê",
    "chúc mừng đội tuyển việt nam",
    "giọng hát đẹp",
    "xem mãi không chán",
    "cố lên nhé",
    "ủng hộ ca sĩ",
    "thích bài này lắm",
    "hạnh phúc quá",
    "đc đấy",
    "nghe bình thường thôi",
    "xinh đẹp quá",
];

const OFFENSIVE: &[&str] = &[
    "vkl",
    "hay vkl",
    "ngu vl",
    "đm",
    "vãi cả l*n",
    "như cc",
    "đồ ngu",
    "ngu ngốc",
    "mất dạy",
    "vcl thật",
    "câm mồm đi",
    "nhảm vkl",
    "xấu vl",
];

const HATE: &[&str] = &[
    "bọn bắc kỳ",
    "lũ ba que",
    "đồ súc vật",
    "cút khỏi việt nam",
    "giết hết bọn chúng",
    "người da đen bẩn",
    "bọn nam kỳ mất dạy",
    "loại chó má đó đáng chết",
    "dân tộc hạ đẳng",
    "tôn giáo rác rưởi",
];

fn pool(label: Label) -> &'static [&'static str] {
    match label {
        Label::Clean => CLEAN,
        Label::Offensive => OFFENSIVE,
        Label::Hate => HATE,
    }
}

/// Label mix used when none is given: roughly the skew of real comment data.
pub const DEFAULT_MIX: [f64; 3] = [0.7, 0.15, 0.15];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub mix: [f64; 3],
    pub source: String,
    /// Probability of each roughening step.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            mix: DEFAULT_MIX,
            source: "synthetic".into(),
            noise: 0.2,
        }
    }
}

fn pick_label(rng: &mut ChaCha8Rng, mix: &[f64; 3]) -> Label {
    let total: f64 = mix.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for l in Label::ALL {
        u -= mix[l.index()];
        if u < 0.0 {
            return l;
        }
    }
    Label::Hate
}

fn roughen(text: &str, rng: &mut ChaCha8Rng, noise: f64) -> String {
    let mut words: Vec<String> = text.split(' ').map(str::to_string).collect();
    if rng.gen_bool(noise) {
        let i = rng.gen_range(0..words.len());
        if let Some(last) = words[i].chars().last() {
            let extra = rng.gen_range(2..6);
            words[i].extend(std::iter::repeat_n(last, extra));
        }
    }
    if rng.gen_bool(noise) {
        let i = rng.gen_range(0..words.len());
        words[i] = words[i].to_uppercase();
    }
    let mut out = words.join(if rng.gen_bool(noise / 2.0) { "   " } else { " " });
    if rng.gen_bool(noise / 2.0) {
        out.push_str(" https://youtu.be/x");
        out.push_str(&rng.gen_range(100..999).to_string());
    }
    if rng.gen_bool(noise) {
        out.push_str(["!", "!!!", ".", "?", " :))"].choose(rng).expect("non-empty"));
    }
    out
}

/// One comment text of the given label.
pub fn comment_text(label: Label, rng: &mut ChaCha8Rng, noise: f64) -> String {
    let mut parts = vec![*pool(label).choose(rng).expect("non-empty pool")];
    for _ in 0..rng.gen_range(0..3) {
        let p = if rng.gen_bool(0.5) {
            NEUTRAL.choose(rng)
        } else {
            pool(label).choose(rng)
        };
        parts.push(p.expect("non-empty pool"));
    }
    parts.shuffle(rng);
    roughen(&parts.join(" "), rng, noise)
}

/// `n` labeled comments with ids `<prefix><index>`; same config, same output.
pub fn labeled_comments(n: usize, prefix: &str, cfg: &SynthConfig) -> Vec<(RawComment, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..n)
        .map(|i| {
            let label = pick_label(&mut rng, &cfg.mix);
            let comment = RawComment {
                id: format!("{prefix}{i}"),
                text: comment_text(label, &mut rng, cfg.noise),
                source: cfg.source.clone(),
                fetched_at: 1_700_000_000_000 + i as i64,
            };
            (comment, label)
        })
        .collect()
}

pub fn comments(n: usize, cfg: &SynthConfig) -> Vec<RawComment> {
    labeled_comments(n, "c", cfg).into_iter().map(|(c, _)| c).collect()
}

/// Settings for the small shipped fixture model.
#[derive(Debug, Clone)]
pub struct FixtureRecipe {
    pub comments: usize,
    pub dim: usize,
    pub max_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FixtureRecipe {
    fn default() -> Self {
        Self {
            comments: 600,
            dim: 16,
            max_len: 20,
            epochs: 40,
            learning_rate: 2e-3,
            seed: 11,
        }
    }
}

/// Random embeddings over the corpus vocabulary plus a Text-CNN trained on
/// the synthetic comments. Fully determined by the recipe.
pub fn train_fixture(
    recipe: &FixtureRecipe,
    pre: &crate::pipeline::Preprocessor,
) -> Result<(EmbeddingTable, TrainOutcome), CnnError> {
    let cfg = SynthConfig {
        seed: recipe.seed,
        mix: [0.4, 0.3, 0.3],
        ..SynthConfig::default()
    };
    let data: Vec<(Vec<String>, Label)> = labeled_comments(recipe.comments, "fx", &cfg)
        .into_iter()
        .map(|(c, l)| (pre.tokens(&c.text), l))
        .collect();
    let vocab: BTreeSet<&str> = data.iter().flat_map(|(t, _)| t.iter().map(String::as_str)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed ^ 0x5eed);
    let rows = vocab.into_iter().map(|w| {
        let v: Vec<f32> = (0..recipe.dim).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
        (w.to_string(), v)
    });
    let table = EmbeddingTable::from_rows(recipe.dim, rows).expect("dimension is positive");
    let encoded: Vec<(SequenceMatrix, Label)> = data
        .iter()
        .map(|(t, l)| (embed_sequence(t, &table, recipe.max_len), *l))
        .collect();
    let split = encoded.len() * 4 / 5;
    let arch = Architecture::new(recipe.dim, recipe.max_len)?;
    let train_cfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: recipe.learning_rate,
            ..AdamConfig::default()
        },
        epochs: recipe.epochs,
        seed: recipe.seed,
        ..TrainConfig::default()
    };
    let outcome = train(&encoded[..split], &encoded[split..], arch, &train_cfg)?;
    Ok((table, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unique() {
        let cfg = SynthConfig::default();
        let a = labeled_comments(200, "x", &cfg);
        assert_eq!(a, labeled_comments(200, "x", &cfg));
        let ids: std::collections::HashSet<_> = a.iter().map(|(c, _)| &c.id).collect();
        assert_eq!(ids.len(), 200);
        assert!(a.iter().all(|(c, _)| !c.text.trim().is_empty()));
        for l in Label::ALL {
            assert!(a.iter().any(|(_, g)| *g == l));
        }
    }
}
