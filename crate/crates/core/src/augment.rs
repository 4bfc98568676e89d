//! Easy data augmentation (synonym replacement, random insertion, random
//! swap, random deletion) and label balancing.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::error::ResourceError;
use crate::label::{Label, LabelCounts};
use crate::normalize::strip_comment;
use crate::segment::Stopwords;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_AUG_CAP: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("alpha {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("target below current: {label} has {current}, target {target}")]
    TargetBelowCurrent {
        label: Label,
        current: usize,
        target: usize,
    },
    #[error("no {0} examples to augment from")]
    NoSource(Label),
    #[error("augmentation cap exceeded: {label} needs {needed} copies per original, cap is {cap}")]
    CapExceeded { label: Label, needed: usize, cap: usize },
}

/// Source of random choices for the augmentation operators.
pub trait Draw {
    /// Uniform index in `0..n`; `n > 0`.
    fn below(&mut self, n: usize) -> usize;
    /// Uniform value in `[0, 1)`.
    fn unit(&mut self) -> f64;
}

impl<R: RngCore> Draw for R {
    fn below(&mut self, n: usize) -> usize {
        self.gen_range(0..n)
    }

    fn unit(&mut self) -> f64 {
        self.gen::<f64>()
    }
}

/// Word to synonym list. Multi-word synonyms are stored underscore-joined.
#[derive(Debug, Clone, Default)]
pub struct SynonymMap(HashMap<String, Vec<String>>);

impl SynonymMap {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, Vec<V>)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (k, vs) in entries {
            let key = token_form(k.as_ref());
            let syns: Vec<String> = vs
                .iter()
                .map(|v| token_form(v.as_ref()))
                .filter(|v| !v.is_empty() && *v != key)
                .collect();
            if !key.is_empty() && !syns.is_empty() {
                map.insert(key, syns);
            }
        }
        SynonymMap(map)
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.0.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// TSV: `word<TAB>syn1,syn2,...`.
    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
        Self::read(std::io::BufReader::new(file), path)
    }

    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self, ResourceError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ResourceError::io(path, e))?;
            let entry = strip_comment(&line);
            if entry.is_empty() {
                continue;
            }
            let (word, syns) = entry
                .split_once('\t')
                .ok_or_else(|| ResourceError::parse(path, i + 1, "expected word<TAB>synonyms"))?;
            let word: String = word.nfc().collect::<String>().to_lowercase();
            let syns: Vec<String> = syns
                .split(',')
                .map(|s| s.nfc().collect::<String>().to_lowercase())
                .collect();
            entries.push((word, syns));
        }
        Ok(SynonymMap::new(entries))
    }
}

fn token_form(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_")
}

#[derive(Debug, Clone)]
pub struct EdaConfig {
    pub alpha: f64,
    /// Maximum augmented copies generated from a single original.
    pub num_aug_cap: usize,
    pub seed: u64,
    pub synonyms: SynonymMap,
    /// Tokens never chosen for synonym replacement.
    pub stopwords: Stopwords,
}

impl Default for EdaConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            num_aug_cap: DEFAULT_AUG_CAP,
            seed: 0,
            synonyms: SynonymMap::default(),
            stopwords: Stopwords::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Label,
}

/// One augmentation operator with its strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdaOp {
    Synonym(usize),
    Insert(usize),
    Swap(usize),
    /// Per-token deletion probability.
    Delete(f64),
}

impl EdaOp {
    pub fn name(&self) -> &'static str {
        match self {
            EdaOp::Synonym(_) => "synonym",
            EdaOp::Insert(_) => "insert",
            EdaOp::Swap(_) => "swap",
            EdaOp::Delete(_) => "delete",
        }
    }
}

/// Applies one operator. The output is never empty.
pub fn eda_op(
    tokens: &[String],
    op: EdaOp,
    cfg: &EdaConfig,
    rng: &mut impl Draw,
) -> Result<Vec<String>, AugmentError> {
    if tokens.is_empty() {
        return Err(AugmentError::EmptySequence);
    }
    let mut out = tokens.to_vec();
    match op {
        EdaOp::Synonym(n) => {
            let mut candidates: Vec<usize> = (0..out.len())
                .filter(|&i| !cfg.stopwords.contains(&out[i]) && cfg.synonyms.get(&out[i]).is_some())
                .collect();
            // partial Fisher-Yates: the first `n` slots become a random sample
            let take = n.min(candidates.len());
            for k in 0..take {
                let j = k + rng.below(candidates.len() - k);
                candidates.swap(k, j);
            }
            for &pos in &candidates[..take] {
                let syns = cfg.synonyms.get(&out[pos]).expect("candidate has synonyms");
                out[pos] = syns[rng.below(syns.len())].clone();
            }
        }
        EdaOp::Insert(n) => {
            for _ in 0..n {
                let with_syns: Vec<&[String]> =
                    out.iter().filter_map(|t| cfg.synonyms.get(t)).collect();
                let word = if with_syns.is_empty() {
                    // no synonym anywhere: duplicate a random token
                    out[rng.below(out.len())].clone()
                } else {
                    let syns = with_syns[rng.below(with_syns.len())];
                    syns[rng.below(syns.len())].clone()
                };
                let pos = rng.below(out.len() + 1);
                out.insert(pos, word);
            }
        }
        EdaOp::Swap(n) => {
            let len = out.len();
            for _ in 0..n {
                let i = rng.below(len);
                let mut j = rng.below(len);
                let mut retries = 0;
                while j == i && len > 1 && retries < 3 {
                    j = rng.below(len);
                    retries += 1;
                }
                out.swap(i, j);
            }
        }
        EdaOp::Delete(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::BadProbability(p));
            }
            let kept: Vec<String> = out.iter().filter(|_| rng.unit() >= p).cloned().collect();
            out = if kept.is_empty() {
                vec![tokens[rng.below(tokens.len())].clone()]
            } else {
                kept
            };
        }
    }
    Ok(out)
}

/// `max(1, round_half_up(alpha * len))`.
pub fn op_count(alpha: f64, len: usize) -> usize {
    // tolerance absorbs representation error such as 0.15 * 10 = 1.4999...
    let raw = alpha * len as f64;
    ((raw + 0.5 + 1e-9).floor() as usize).max(1)
}

/// Draws one operator uniformly and applies it with strength derived from alpha.
pub fn augment_sentence(
    example: &LabeledExample,
    cfg: &EdaConfig,
    rng: &mut impl Draw,
) -> Result<LabeledExample, AugmentError> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(AugmentError::BadAlpha(cfg.alpha));
    }
    let n = op_count(cfg.alpha, example.tokens.len());
    let op = match rng.below(4) {
        0 => EdaOp::Synonym(n),
        1 => EdaOp::Insert(n),
        2 => EdaOp::Swap(n),
        _ => EdaOp::Delete(cfg.alpha),
    };
    Ok(LabeledExample {
        id: example.id.clone(),
        tokens: eda_op(&example.tokens, op, cfg, rng)?,
        label: example.label,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for the `copy`-th augmented example of `label`, independent of
/// generation order.
pub fn derived_rng(seed: u64, label: Label, copy: usize) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(splitmix64(seed) ^ label.index() as u64) ^ copy as u64);
    ChaCha8Rng::seed_from_u64(s)
}

/// Augments each under-represented label until it reaches its target.
///
/// Originals are kept in input order; new examples are appended label by
/// label, cycling round-robin over that label's originals. Generated ids
/// are `<original id>#aug<k>`.
pub fn balance_dataset(
    dataset: &[LabeledExample],
    targets: LabelCounts,
    cfg: &EdaConfig,
) -> Result<Vec<LabeledExample>, AugmentError> {
    let current = LabelCounts::of(dataset.iter().map(|e| e.label));
    for label in Label::ALL {
        let (cur, tgt) = (current.get(label), targets.get(label));
        if tgt < cur {
            return Err(AugmentError::TargetBelowCurrent {
                label,
                current: cur,
                target: tgt,
            });
        }
        if tgt > cur {
            if cur == 0 {
                return Err(AugmentError::NoSource(label));
            }
            let needed = (tgt - cur).div_ceil(cur);
            if needed > cfg.num_aug_cap {
                return Err(AugmentError::CapExceeded {
                    label,
                    needed,
                    cap: cfg.num_aug_cap,
                });
            }
        }
    }

    let mut out = dataset.to_vec();
    out.reserve(targets.total() - dataset.len());
    for label in Label::ALL {
        let originals: Vec<&LabeledExample> =
            dataset.iter().filter(|e| e.label == label).collect();
        let deficit = targets.get(label) - current.get(label);
        for k in 0..deficit {
            let src = originals[k % originals.len()];
            let mut rng = derived_rng(cfg.seed, label, k);
            let mut aug = augment_sentence(src, cfg, &mut rng)?;
            aug.id = format!("{}#aug{}", src.id, k / originals.len() + 1);
            out.push(aug);
        }
    }
    Ok(out)
}

pub fn read_examples(path: &Path) -> Result<Vec<LabeledExample>, ResourceError> {
    let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ResourceError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(&line)
            .map_err(|e| ResourceError::parse(path, i + 1, e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_examples(mut w: impl Write, examples: &[LabeledExample]) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Distinct tokens across a set of examples.
pub fn vocabulary_size<'a>(examples: impl IntoIterator<Item = &'a LabeledExample>) -> usize {
    examples
        .into_iter()
        .flat_map(|e| e.tokens.iter())
        .collect::<HashSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays a fixed list of draws.
    struct Scripted {
        indices: Vec<usize>,
        units: Vec<f64>,
    }

    impl Draw for Scripted {
        fn below(&mut self, n: usize) -> usize {
            let v = self.indices.remove(0);
            assert!(v < n, "scripted draw {v} out of range {n}");
            v
        }
        fn unit(&mut self) -> f64 {
            self.units.remove(0)
        }
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identities() {
        let cfg = EdaConfig::default();
        let t = toks(&["a", "b", "c"]);
        assert_eq!(eda_op(&t, EdaOp::Swap(0), &cfg, &mut rng()).unwrap(), t);
        assert_eq!(eda_op(&t, EdaOp::Delete(0.0), &cfg, &mut rng()).unwrap(), t);
        assert_eq!(
            eda_op(&[], EdaOp::Swap(1), &cfg, &mut rng()),
            Err(AugmentError::EmptySequence)
        );
    }

    #[test]
    fn scripted_swap() {
        let cfg = EdaConfig::default();
        let mut draws = Scripted {
            indices: vec![0, 3, 1, 2],
            units: vec![],
        };
        let out = eda_op(&toks(&["a", "b", "c", "d"]), EdaOp::Swap(2), &cfg, &mut draws).unwrap();
        assert_eq!(out, toks(&["d", "c", "b", "a"]));
    }

    #[test]
    fn single_candidate_synonym() {
        let cfg = EdaConfig {
            synonyms: SynonymMap::new([("vui", vec!["hân hoan"])]),
            ..EdaConfig::default()
        };
        let out = eda_op(&toks(&["rất", "vui"]), EdaOp::Synonym(1), &cfg, &mut rng()).unwrap();
        assert_eq!(out, toks(&["rất", "hân_hoan"]));
    }

    #[test]
    fn synonym_skips_stopwords() {
        let cfg = EdaConfig {
            synonyms: SynonymMap::new([("là", vec!["thì"])]),
            stopwords: Stopwords::new(["là"]),
            ..EdaConfig::default()
        };
        let t = toks(&["là", "tốt"]);
        assert_eq!(eda_op(&t, EdaOp::Synonym(2), &cfg, &mut rng()).unwrap(), t);
    }

    #[test]
    fn delete_keeps_one() {
        let cfg = EdaConfig::default();
        let mut draws = Scripted {
            indices: vec![1],
            units: vec![0.0, 0.0, 0.0],
        };
        let out = eda_op(&toks(&["a", "b", "c"]), EdaOp::Delete(1.0), &cfg, &mut draws).unwrap();
        assert_eq!(out, toks(&["b"]));
        assert!(matches!(
            eda_op(&toks(&["a"]), EdaOp::Delete(1.5), &cfg, &mut rng()),
            Err(AugmentError::BadProbability(_))
        ));
    }

    #[test]
    fn insert_grows_by_n() {
        let cfg = EdaConfig {
            synonyms: SynonymMap::new([("vui", vec!["mừng"])]),
            ..EdaConfig::default()
        };
        let t = toks(&["rất", "vui", "luôn"]);
        let out = eda_op(&t, EdaOp::Insert(3), &cfg, &mut rng()).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.iter().filter(|w| *w == "mừng").count(), 3);
        // without synonyms the length contract still holds
        let out = eda_op(&t, EdaOp::Insert(2), &EdaConfig::default(), &mut rng()).unwrap();
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn op_count_rounding() {
        assert_eq!(op_count(0.15, 10), 2);
        assert_eq!(op_count(0.15, 3), 1);
        assert_eq!(op_count(0.15, 30), 5);
        assert_eq!(op_count(0.15, 0), 1);
        assert_eq!(op_count(0.15, 20), 3);
    }

    #[test]
    fn augment_preserves_label() {
        let cfg = EdaConfig::default();
        let ex = LabeledExample {
            id: "x".into(),
            tokens: toks(&["a", "b", "c", "d", "e"]),
            label: Label::Hate,
        };
        let mut r = rng();
        for _ in 0..50 {
            assert_eq!(augment_sentence(&ex, &cfg, &mut r).unwrap().label, Label::Hate);
        }
    }

    fn tiny(counts: [usize; 3]) -> Vec<LabeledExample> {
        let mut out = Vec::new();
        for label in Label::ALL {
            for i in 0..counts[label.index()] {
                out.push(LabeledExample {
                    id: format!("{label}-{i}"),
                    tokens: toks(&["một", "hai", "ba", "bốn"]),
                    label,
                });
            }
        }
        out
    }

    #[test]
    fn balance_errors_and_identity() {
        let cfg = EdaConfig::default();
        let data = tiny([3, 2, 1]);
        assert_eq!(
            balance_dataset(&data, LabelCounts::new(3, 2, 1), &cfg).unwrap(),
            data
        );
        assert!(matches!(
            balance_dataset(&data, LabelCounts::new(3, 1, 1), &cfg),
            Err(AugmentError::TargetBelowCurrent { label: Label::Offensive, .. })
        ));
        assert!(matches!(
            balance_dataset(&tiny([3, 0, 1]), LabelCounts::new(3, 2, 1), &cfg),
            Err(AugmentError::NoSource(Label::Offensive))
        ));
        assert!(matches!(
            balance_dataset(&data, LabelCounts::new(3, 2, 100), &cfg),
            Err(AugmentError::CapExceeded { .. })
        ));
    }

    #[test]
    fn balance_reaches_targets() {
        let cfg = EdaConfig::default();
        let data = tiny([5, 2, 3]);
        let out = balance_dataset(&data, LabelCounts::new(5, 9, 10), &cfg).unwrap();
        assert_eq!(LabelCounts::of(out.iter().map(|e| e.label)), LabelCounts::new(5, 9, 10));
        assert_eq!(&out[..data.len()], &data[..]);
        assert_eq!(out, balance_dataset(&data, LabelCounts::new(5, 9, 10), &cfg).unwrap());
    }
}
