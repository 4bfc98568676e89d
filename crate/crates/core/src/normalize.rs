//! Phase-1 comment cleaning.
//!
//! The steps run in a fixed order: [`scrub`] (case folding, link removal,
//! whitespace collapsing), [`normalize_unicode`] (canonical composition),
//! [`collapse_repeats`] (redundant letters) and finally
//! [`normalize_diacritics`] on every token.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::ResourceError;

/// A comment as it arrives from a source, before any processing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub fetched_at: i64,
}

impl RawComment {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            source: String::new(),
            fetched_at: 0,
        }
    }

    /// Checks the record-level invariants (non-empty id, non-negative timestamp).
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.fetched_at < 0 {
            return Err(format!("negative fetched_at {}", self.fetched_at));
        }
        Ok(())
    }
}

/// The five Vietnamese tone marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToneMark {
    Acute,
    Grave,
    HookAbove,
    Tilde,
    DotBelow,
}

impl ToneMark {
    pub const ALL: [ToneMark; 5] = [
        ToneMark::Acute,
        ToneMark::Grave,
        ToneMark::HookAbove,
        ToneMark::Tilde,
        ToneMark::DotBelow,
    ];

    /// The combining code point for this mark.
    pub fn combining(self) -> char {
        match self {
            ToneMark::Acute => '\u{0301}',
            ToneMark::Grave => '\u{0300}',
            ToneMark::HookAbove => '\u{0309}',
            ToneMark::Tilde => '\u{0303}',
            ToneMark::DotBelow => '\u{0323}',
        }
    }

    fn column(self) -> usize {
        self as usize + 1
    }
}

// Each row: base vowel, then acute, grave, hook above, tilde, dot below.
const VOWEL_ROWS: [&str; 12] = [
    "aáàảãạ",
    "ăắằẳẵặ",
    "âấầẩẫậ",
    "eéèẻẽẹ",
    "êếềểễệ",
    "iíìỉĩị",
    "oóòỏõọ",
    "ôốồổỗộ",
    "ơớờởỡợ",
    "uúùủũụ",
    "ưứừửữự",
    "yýỳỷỹỵ",
];

/// Bijection between precomposed lowercase Vietnamese vowels and
/// `(base vowel, tone mark)` pairs.
#[derive(Debug, Clone)]
pub struct VowelTable {
    rows: Vec<[char; 6]>,
}

impl Default for VowelTable {
    fn default() -> Self {
        let rows = VOWEL_ROWS
            .iter()
            .map(|row| {
                let chars: Vec<char> = row.chars().collect();
                let mut out = ['\0'; 6];
                out.copy_from_slice(&chars);
                out
            })
            .collect();
        Self { rows }
    }
}

impl VowelTable {
    /// Splits a character into base vowel and tone. `None` for non-vowels.
    pub fn decompose(&self, c: char) -> Option<(char, Option<ToneMark>)> {
        for row in &self.rows {
            if let Some(col) = row.iter().position(|&v| v == c) {
                let tone = match col {
                    0 => None,
                    k => Some(ToneMark::ALL[k - 1]),
                };
                return Some((row[0], tone));
            }
        }
        None
    }

    pub fn compose(&self, base: char, tone: Option<ToneMark>) -> Option<char> {
        let row = self.rows.iter().find(|row| row[0] == base)?;
        Some(match tone {
            None => row[0],
            Some(t) => row[t.column()],
        })
    }

    pub fn is_vowel(&self, c: char) -> bool {
        self.decompose(c).is_some()
    }

    /// Every precomposed form in the table.
    pub fn all_forms(&self) -> impl Iterator<Item = char> + '_ {
        self.rows.iter().flat_map(|row| row.iter().copied())
    }
}

/// Settings for Phase-1 cleaning.
#[derive(Debug, Clone)]
pub struct NormalizeConfig {
    pub lowercase: bool,
    pub strip_urls: bool,
    /// Tokens exempt from repeat collapsing.
    pub protected_lexicon: HashSet<String>,
    pub vowels: VowelTable,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_urls: true,
            protected_lexicon: HashSet::new(),
            vowels: VowelTable::default(),
        }
    }
}

impl NormalizeConfig {
    pub fn with_protected<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            protected_lexicon: words.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    /// Adds teencode keys (each whitespace-separated part) to the protected set.
    pub fn protect_teencode(&mut self, teencode: &crate::segment::TeencodeMap) {
        for key in teencode.keys() {
            for part in key {
                self.protected_lexicon.insert(part.clone());
            }
        }
    }
}

/// Reads a protected-lexicon file: one token per line, `#` starts a comment.
pub fn load_protected_lexicon(path: &Path) -> Result<HashSet<String>, ResourceError> {
    let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
    read_word_list(std::io::BufReader::new(file)).map_err(|e| ResourceError::io(path, e))
}

pub fn read_word_list(reader: impl BufRead) -> std::io::Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let entry = strip_comment(&line);
        if !entry.is_empty() {
            out.insert(entry.nfc().collect::<String>().to_lowercase());
        }
    }
    Ok(out)
}

pub(crate) fn strip_comment(line: &str) -> &str {
    let line = line.trim();
    if line.starts_with('#') {
        ""
    } else {
        line
    }
}

fn is_url_start(token: &str) -> bool {
    token.starts_with("www.")
}

fn strip_url(token: &str) -> &str {
    let cut = [token.find("http://"), token.find("https://")]
        .into_iter()
        .flatten()
        .min();
    match cut {
        Some(i) => &token[..i],
        None => token,
    }
}

/// Lowercases, drops links and collapses whitespace runs to single spaces.
pub fn scrub(text: &str, cfg: &NormalizeConfig) -> String {
    let folded;
    let text = if cfg.lowercase {
        folded = text.to_lowercase();
        folded.as_str()
    } else {
        text
    };
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        let token = if cfg.strip_urls {
            if is_url_start(token) {
                continue;
            }
            strip_url(token)
        } else {
            token
        };
        if token.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Canonical composition (NFC).
pub fn normalize_unicode(text: &str) -> String {
    text.nfc().collect()
}

/// Collapses runs of a repeated letter in every unprotected token.
pub fn collapse_repeats(text: &str, protected_lexicon: &HashSet<String>) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, token) in text.split(' ').enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if protected_lexicon.contains(token) {
            out.push_str(token);
            continue;
        }
        let mut prev: Option<char> = None;
        for c in token.chars() {
            if c.is_alphabetic() && prev == Some(c) {
                continue;
            }
            out.push(c);
            prev = Some(c);
        }
    }
    out
}

/// Moves the tone mark of a single syllable to its canonical vowel.
///
/// Placement rules, applied to the vowel cluster holding the mark:
/// `ê`/`ơ` always take the mark; a lone vowel takes it; two vowels put it on
/// the first unless a consonant follows; three or more put it on the second.
/// Tokens with zero or several marks, or with a combining mark NFC could
/// not compose, are returned unchanged.
pub fn normalize_diacritics(token: &str, cfg: &NormalizeConfig) -> String {
    let table = &cfg.vowels;
    // leftover combining marks would compose with a stripped vowel on the next pass
    if token.chars().any(is_combining_mark) {
        return token.to_string();
    }
    let mut chars: Vec<char> = token.chars().collect();
    let decomposed: Vec<Option<(char, Option<ToneMark>)>> =
        chars.iter().map(|&c| table.decompose(c)).collect();

    let mut marked = decomposed
        .iter()
        .enumerate()
        .filter_map(|(i, d)| match d {
            Some((_, Some(t))) => Some((i, *t)),
            _ => None,
        });
    let (mark_pos, tone) = match (marked.next(), marked.next()) {
        (Some(m), None) => m,
        _ => return token.to_string(),
    };

    let mut start = mark_pos;
    while start > 0 && decomposed[start - 1].is_some() {
        start -= 1;
    }
    let mut end = mark_pos + 1;
    while end < chars.len() && decomposed[end].is_some() {
        end += 1;
    }
    let cluster_len = end - start;
    let trailing_consonant = chars.get(end).is_some_and(|c| c.is_alphabetic());

    let base = |i: usize| decomposed[i].map(|(b, _)| b).unwrap_or(chars[i]);
    let special = (start..end).rev().find(|&i| matches!(base(i), 'ê' | 'ơ'));
    let target = match special {
        Some(i) => i,
        None => match cluster_len {
            1 => start,
            2 if !trailing_consonant => start,
            _ => start + 1,
        },
    };
    if target == mark_pos {
        return token.to_string();
    }

    let stripped = table.compose(base(mark_pos), None).unwrap_or(chars[mark_pos]);
    let placed = table.compose(base(target), Some(tone)).unwrap_or(chars[target]);
    chars[mark_pos] = stripped;
    chars[target] = placed;
    chars.into_iter().collect()
}

/// Runs all Phase-1 steps on the comment text.
pub fn phase1_text(text: &str, cfg: &NormalizeConfig) -> String {
    let scrubbed = scrub(text, cfg);
    let composed = normalize_unicode(&scrubbed);
    let collapsed = collapse_repeats(&composed, &cfg.protected_lexicon);
    let mut out = String::with_capacity(collapsed.len());
    for (i, token) in collapsed.split(' ').enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&settle_token(token, cfg));
    }
    out
}

/// Tone placement can bring two equal letters together ("âăaá" places the
/// mark on "ă", leaving "aa"), so collapsing and placement alternate until
/// the token stops changing. Every extra round shortens the token.
fn settle_token(token: &str, cfg: &NormalizeConfig) -> String {
    let mut cur = normalize_diacritics(token, cfg);
    loop {
        let collapsed = collapse_repeats(&cur, &cfg.protected_lexicon);
        if collapsed == cur {
            return cur;
        }
        cur = normalize_diacritics(&collapsed, cfg);
    }
}

pub fn phase1(comment: &RawComment, cfg: &NormalizeConfig) -> RawComment {
    RawComment {
        text: phase1_text(&comment.text, cfg),
        ..comment.clone()
    }
}
