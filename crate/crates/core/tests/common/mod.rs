#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use unicode_normalization::UnicodeNormalization;

use viso::label::{Label, NUM_CLASSES};
use viso::normalize::NormalizeConfig;
use viso::pipeline::Preprocessor;
use viso::segment::{de_teencode, phase2, remove_stopwords, word_segment, Phase2Resources};

pub const TONE_MARKS: [char; 5] = ['\u{0300}', '\u{0301}', '\u{0303}', '\u{0309}', '\u{0323}'];

const VIET: &str = "aăâeêioôơuưyđáàảãạắằẳẵặấầẩẫậéèẻẽẹếềểễệíìỉĩịóòỏõọốồổỗộớờởỡợúùủũụứừửữựýỳỷỹỵ";

/// Characters that stress Phase 1: Vietnamese letters in both cases,
/// combining marks, whitespace, URL pieces, punctuation and arbitrary scalars.
pub fn noisy_char() -> impl Strategy<Value = char> {
    let viet: Vec<char> = VIET.chars().chain(VIET.to_uppercase().chars()).collect();
    prop_oneof![
        4 => prop::sample::select(viet),
        3 => prop::char::range('a', 'z'),
        1 => prop::char::range('A', 'Z'),
        2 => prop::sample::select(vec![' ', ' ', '\t', '\n', '\u{00a0}', '\r']),
        1 => prop::sample::select(TONE_MARKS.to_vec()),
        1 => prop::sample::select(vec!['.', ',', '!', '?', '/', ':', '_', '*', '-', '1', '0']),
        1 => any::<char>(),
    ]
}

pub fn noisy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        6 => noisy_char().prop_map(String::from),
        // runs of one character
        2 => (noisy_char(), 2usize..6).prop_map(|(c, n)| std::iter::repeat_n(c, n).collect()),
        1 => prop::sample::select(vec!["http://", "https://", "www.", "HTTPS://x.y/", " kk ", " call ", " cc ", "ko"])
            .prop_map(String::from),
    ];
    prop::collection::vec(piece, 0..24).prop_map(|v| v.concat())
}

/// Syllables drawn from the bundled dictionaries plus filler words, so
/// lexicon, teencode and stopword matches are frequent.
pub fn syllable_pool(res: &Phase2Resources) -> Vec<String> {
    let mut pool: Vec<String> = ["học", "sinh", "việt", "nam", "xã", "hội", "mạng", "ko", "đc", "đấy", "cc", "vl", "là", "và", "thì", "bạn", "hay", "quá", "x", "abc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for key in res.teencode.keys() {
        pool.extend(key.iter().cloned());
    }
    pool.sort();
    pool.dedup();
    pool
}

/// Phase-1-shaped text: syllables separated by single spaces.
pub fn syllable_text(pool: Vec<String>) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(pool), 0..16).prop_map(|v| v.join(" "))
}

pub fn tokens_from(pool: Vec<String>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(pool), 0..16)
}

/// Removes every tone mark, giving the bare letters of a syllable.
pub fn strip_tones(s: &str) -> String {
    s.nfd().filter(|c| !TONE_MARKS.contains(c)).nfc().collect()
}

/// Tone marks in NFD order of appearance.
pub fn tones_of(s: &str) -> Vec<char> {
    let mut t: Vec<char> = s.nfd().filter(|c| TONE_MARKS.contains(c)).collect();
    t.sort();
    t
}

/// Every spelling of `word` with its single tone mark placed on a different vowel.
pub fn tone_variants(word: &str) -> Vec<String> {
    let tones = tones_of(word);
    assert_eq!(tones.len(), 1, "{word} should carry exactly one tone mark");
    let bare: Vec<char> = strip_tones(word).chars().collect();
    let vowels = "aăâeêioôơuưy";
    let mut out = Vec::new();
    for (i, c) in bare.iter().enumerate() {
        let base: String = c.to_string().nfd().take(1).collect();
        if !vowels.contains(base.as_str()) && !vowels.contains(*c) {
            continue;
        }
        let mut s = String::new();
        for (j, d) in bare.iter().enumerate() {
            s.push(*d);
            if i == j {
                s.push(tones[0]);
            }
        }
        out.push(s.nfc().collect());
    }
    out
}

fn is_subsequence(sub: &[String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|t| t == s))
}

pub fn check_phase1_idempotent(pre: &Preprocessor, text: &str) -> Result<(), TestCaseError> {
    let once = pre.phase1(text);
    let twice = pre.phase1(&once);
    prop_assert_eq!(&twice, &once, "input {:?}", text);
    prop_assert!(!once.contains(['\t', '\n']) && !once.contains("  "), "scrub output {:?}", once);
    prop_assert_eq!(pre.phase1(text), once, "not pure");
    Ok(())
}

pub fn check_phase2(res: &Phase2Resources, text: &str) -> Result<(), TestCaseError> {
    let seg = word_segment(text, &res.lexicon);
    let rebuilt = seg.iter().map(|t| t.replace('_', " ")).collect::<Vec<_>>().join(" ");
    prop_assert_eq!(&rebuilt, text);

    let expanded = de_teencode(&seg, &res.teencode);
    let kept = remove_stopwords(&expanded, &res.stopwords);
    prop_assert!(is_subsequence(&kept, &expanded));
    prop_assert_eq!(&phase2(text, res), &kept);

    // growth is bounded by what the matched keys expand to
    let mut growth = 0usize;
    let mut i = 0;
    while i < seg.len() {
        match (1..=3).rev().filter(|&n| i + n <= seg.len()).find_map(|n| res.teencode.get(&seg[i..i + n]).map(|e| (n, e.len()))) {
            Some((n, e)) => {
                growth += e.saturating_sub(n);
                i += n;
            }
            None => i += 1,
        }
    }
    prop_assert!(kept.len() <= seg.len() + growth);
    Ok(())
}

pub fn check_de_teencode_fixed_point(res: &Phase2Resources, tokens: &[String]) -> Result<(), TestCaseError> {
    let has_key = (0..tokens.len()).any(|i| (1..=3).any(|n| i + n <= tokens.len() && res.teencode.get(&tokens[i..i + n]).is_some()));
    if !has_key {
        prop_assert_eq!(de_teencode(tokens, &res.teencode), tokens.to_vec());
    }
    Ok(())
}

/// Runs `check` on `cases` generated inputs; returns the number of cases run.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, check).map_err(|e| e.to_string())?;
    Ok(cases)
}

pub fn default_normalize() -> NormalizeConfig {
    Preprocessor::bundled().normalize
}

/// Brute-force one-vs-rest accuracy and macro scores straight from the prediction pairs.
#[derive(Debug, Clone, Copy)]
pub struct OracleScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn oracle_scores(preds: &[Label], golds: &[Label]) -> OracleScores {
    let n = preds.len() as f64;
    let (mut acc, mut p, mut r) = (0.0, 0.0, 0.0);
    for class in Label::ALL {
        let mut tp = 0.0;
        let mut tn = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (&pr, &g) in preds.iter().zip(golds) {
            match (pr == class, g == class) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
        acc += (tp + tn) / n;
        p += if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        r += if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    }
    let k = NUM_CLASSES as f64;
    let (p, r) = (p / k, r / k);
    OracleScores {
        accuracy: acc / k,
        precision: p,
        recall: r,
        f1: if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 },
    }
}

pub fn label_of(i: u8) -> Label {
    Label::ALL[i as usize % NUM_CLASSES]
}

/// Count of each id; anything above 1 is a duplicate.
pub fn duplicates<'a>(ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for id in ids {
        *seen.entry(id).or_default() += 1;
    }
    let mut d: Vec<String> = seen.into_iter().filter(|(_, n)| *n > 1).map(|(k, _)| k.to_string()).collect();
    d.sort();
    d
}
