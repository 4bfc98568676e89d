//! Phase-2 processing: word segmentation, teencode expansion and stopword
//! removal, always in that order.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::error::ResourceError;
use crate::normalize::strip_comment;

/// Longest teencode key, in tokens.
pub const MAX_TEENCODE_KEY: usize = 3;

/// Normalized tokens of one comment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub origin_id: String,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(origin_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            origin_id: origin_id.into(),
            tokens,
        }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Self {
            origin_id: String::new(),
            tokens: words.iter().map(|w| w.as_ref().to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Multi-syllable word phrases used by the segmenter.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashSet<String>,
    max_len: usize,
}

impl Lexicon {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon {
            entries: HashSet::new(),
            max_len: 1,
        };
        for p in phrases {
            lex.insert(p.as_ref());
        }
        lex
    }

    pub fn insert(&mut self, phrase: &str) {
        let syllables: Vec<&str> = phrase.split_whitespace().collect();
        if syllables.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(syllables.len());
        self.entries.insert(syllables.join(" "));
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.contains(phrase)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One phrase per line, syllables separated by spaces.
    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
        Self::read(std::io::BufReader::new(file)).map_err(|e| ResourceError::io(path, e))
    }

    pub fn read(reader: impl BufRead) -> std::io::Result<Self> {
        let mut lex = Lexicon::new(std::iter::empty::<&str>());
        for line in reader.lines() {
            let line = line?;
            let entry = strip_comment(&line);
            if !entry.is_empty() {
                lex.insert(&entry.nfc().collect::<String>().to_lowercase());
            }
        }
        Ok(lex)
    }
}

/// Teencode phrase to expansion mapping.
#[derive(Debug, Clone, Default)]
pub struct TeencodeMap {
    entries: HashMap<Vec<String>, Vec<String>>,
    max_key: usize,
}

impl TeencodeMap {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = TeencodeMap::default();
        for (k, v) in pairs {
            map.insert(k.as_ref(), v.as_ref());
        }
        map
    }

    /// Ignores empty keys/expansions and keys longer than [`MAX_TEENCODE_KEY`].
    pub fn insert(&mut self, key: &str, expansion: &str) -> bool {
        let key: Vec<String> = key.split_whitespace().map(str::to_string).collect();
        let exp: Vec<String> = expansion.split_whitespace().map(str::to_string).collect();
        if key.is_empty() || exp.is_empty() || key.len() > MAX_TEENCODE_KEY {
            return false;
        }
        self.max_key = self.max_key.max(key.len());
        self.entries.insert(key, exp);
        true
    }

    pub fn get(&self, key: &[String]) -> Option<&[String]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<String>> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest key starting at `tokens[0]`, as `(key length, expansion)`.
    fn longest_match<'a>(&'a self, tokens: &[String]) -> Option<(usize, &'a [String])> {
        let upper = self.max_key.min(tokens.len());
        (1..=upper)
            .rev()
            .find_map(|n| self.get(&tokens[..n]).map(|exp| (n, exp)))
    }

    /// TSV file: `teencode<TAB>expansion`.
    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
        Self::read(std::io::BufReader::new(file), path)
    }

    /// Parses TSV from any reader; `path` is only used in error messages.
    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self, ResourceError> {
        let mut map = TeencodeMap::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ResourceError::io(path, e))?;
            let entry = strip_comment(&line);
            if entry.is_empty() {
                continue;
            }
            let (k, v) = entry
                .split_once('\t')
                .ok_or_else(|| ResourceError::parse(path, i + 1, "expected teencode<TAB>expansion"))?;
            let k: String = k.nfc().collect::<String>().to_lowercase();
            let v: String = v.nfc().collect();
            if !map.insert(&k, &v) {
                return Err(ResourceError::parse(path, i + 1, "empty or over-long entry"));
            }
        }
        Ok(map)
    }
}

/// Stopword set, stored in segmented (underscore-joined) form.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords(words.into_iter().map(|w| as_token(w.as_ref())).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
        Self::read(std::io::BufReader::new(file)).map_err(|e| ResourceError::io(path, e))
    }

    /// One word per line, syllables separated by spaces or underscores.
    pub fn read(reader: impl BufRead) -> std::io::Result<Self> {
        Ok(Stopwords::new(crate::normalize::read_word_list(reader)?))
    }
}

fn as_token(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Greedy leftmost-longest segmentation against `lexicon`.
pub fn word_segment(text: &str, lexicon: &Lexicon) -> Vec<String> {
    let syllables: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::with_capacity(syllables.len());
    let mut i = 0;
    let mut probe = String::new();
    while i < syllables.len() {
        let upper = lexicon.max_len().min(syllables.len() - i);
        let mut taken = 1;
        for n in (2..=upper).rev() {
            probe.clear();
            for (j, s) in syllables[i..i + n].iter().enumerate() {
                if j > 0 {
                    probe.push(' ');
                }
                probe.push_str(s);
            }
            if lexicon.contains(&probe) {
                taken = n;
                break;
            }
        }
        out.push(syllables[i..i + taken].join("_"));
        i += taken;
    }
    out
}

/// Replaces teencode n-grams (longest first) with their expansions.
pub fn de_teencode(tokens: &[String], map: &TeencodeMap) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        match map.longest_match(&tokens[i..]) {
            Some((n, exp)) => {
                out.extend(exp.iter().cloned());
                i += n;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

pub fn remove_stopwords(tokens: &[String], stopwords: &Stopwords) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t))
        .cloned()
        .collect()
}

/// Dictionaries used by Phase 2.
#[derive(Debug, Clone, Default)]
pub struct Phase2Resources {
    pub lexicon: Lexicon,
    pub teencode: TeencodeMap,
    pub stopwords: Stopwords,
}

impl Phase2Resources {
    pub fn load(lexicon: &Path, teencode: &Path, stopwords: &Path) -> Result<Self, ResourceError> {
        Ok(Self {
            lexicon: Lexicon::load(lexicon)?,
            teencode: TeencodeMap::load(teencode)?,
            stopwords: Stopwords::load(stopwords)?,
        })
    }
}

pub fn phase2(text: &str, res: &Phase2Resources) -> Vec<String> {
    let segmented = word_segment(text, &res.lexicon);
    let expanded = de_teencode(&segmented, &res.teencode);
    remove_stopwords(&expanded, &res.stopwords)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Teencode and stopword frequencies over a segmented corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub teencode_count: usize,
    pub teencode_pct: f64,
    pub stopword_count: usize,
    pub stopword_pct: f64,
    pub total_words: usize,
}

/// Counts over segmented (not yet de-teencoded) token sequences.
///
/// A token counts as teencode when it is covered by a dictionary key match,
/// using the same longest-match scan as [`de_teencode`]. Percentages are
/// fractions of `total_words` expressed in percent.
pub fn corpus_stats<S: AsRef<[String]>>(
    corpus: &[S],
    map: &TeencodeMap,
    stopwords: &Stopwords,
) -> Result<CorpusStats, StatsError> {
    let mut teencode_count = 0;
    let mut stopword_count = 0;
    let mut total_words = 0;
    for seq in corpus {
        let tokens = seq.as_ref();
        total_words += tokens.len();
        stopword_count += tokens.iter().filter(|t| stopwords.contains(t)).count();
        let mut i = 0;
        while i < tokens.len() {
            match map.longest_match(&tokens[i..]) {
                Some((n, _)) => {
                    teencode_count += n;
                    i += n;
                }
                None => i += 1,
            }
        }
    }
    if total_words == 0 {
        return Err(StatsError::EmptyCorpus);
    }
    let pct = |c: usize| 100.0 * c as f64 / total_words as f64;
    Ok(CorpusStats {
        teencode_count,
        teencode_pct: pct(teencode_count),
        stopword_count,
        stopword_pct: pct(stopword_count),
        total_words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn table2() -> TeencodeMap {
        TeencodeMap::new([("đc đấy", "được đấy"), ("ko", "không"), ("cc", "con c*c")])
    }

    #[test]
    fn segment_examples() {
        let lex = Lexicon::new(["học sinh"]);
        assert_eq!(word_segment("học sinh giỏi", &lex), s(&["học_sinh", "giỏi"]));
        assert!(word_segment("", &lex).is_empty());
        let lex = Lexicon::new(["a b", "b c"]);
        assert_eq!(word_segment("a b c", &lex), s(&["a_b", "c"]));
        let lex = Lexicon::new(["a b", "a b c"]);
        assert_eq!(word_segment("a b c d", &lex), s(&["a_b_c", "d"]));
    }

    #[test]
    fn teencode_examples() {
        let m = table2();
        assert_eq!(de_teencode(&s(&["ko"]), &m), s(&["không"]));
        assert_eq!(de_teencode(&s(&["đc", "đấy"]), &m), s(&["được", "đấy"]));
        assert_eq!(de_teencode(&s(&["cc"]), &m), s(&["con", "c*c"]));
        assert_eq!(de_teencode(&s(&["xin", "chào"]), &m), s(&["xin", "chào"]));
        // scan resumes after a replacement
        assert_eq!(
            de_teencode(&s(&["ko", "ko", "đc"]), &m),
            s(&["không", "không", "đc"])
        );
    }

    #[test]
    fn stopword_examples() {
        let sw = Stopwords::new(["thì", "là"]);
        assert_eq!(remove_stopwords(&s(&["thì", "là", "tốt"]), &sw), s(&["tốt"]));
        assert!(remove_stopwords(&[], &sw).is_empty());
        assert!(remove_stopwords(&s(&["là", "thì"]), &sw).is_empty());
        // multi-syllable entries compare against segmented tokens
        let sw = Stopwords::new(["bởi vì"]);
        assert!(sw.contains("bởi_vì"));
    }

    #[test]
    fn phase2_examples() {
        let res = Phase2Resources {
            lexicon: Lexicon::default(),
            teencode: table2(),
            stopwords: Stopwords::new(["thì", "thôi"]),
        };
        assert_eq!(phase2("ko tốt thì thôi", &res), s(&["không", "tốt"]));
        assert!(phase2("", &res).is_empty());
    }

    #[test]
    fn phase2_expands_before_removing_stopwords() {
        // "k" is a teencode for "không", and "không" is a stopword; the
        // expansion must happen first so the stopword filter sees it.
        let res = Phase2Resources {
            lexicon: Lexicon::default(),
            teencode: TeencodeMap::new([("k", "không"), ("j", "gì đó")]),
            stopwords: Stopwords::new(["không", "k", "đó"]),
        };
        assert_eq!(phase2("k biết j", &res), s(&["biết", "gì"]));
        // reversed order would have produced a different result
        let removed_first = remove_stopwords(&s(&["k", "biết", "j"]), &res.stopwords);
        let wrong = de_teencode(&removed_first, &res.teencode);
        assert_ne!(wrong, phase2("k biết j", &res));
    }

    #[test]
    fn corpus_stats_counts() {
        let m = table2();
        let sw = Stopwords::new(["thì", "là", "mà"]);
        let corpus = vec![
            s(&["ko", "thì", "là", "tốt"]),
            s(&["cc", "mà", "thì", "a", "b", "c"]),
        ];
        let st = corpus_stats(&corpus, &m, &sw).unwrap();
        assert_eq!(st.total_words, 10);
        assert_eq!(st.teencode_count, 2);
        assert_eq!(st.stopword_count, 4);
        assert!((st.teencode_pct - 20.0).abs() < 1e-12);
        assert!((st.stopword_pct - 40.0).abs() < 1e-12);

        let st = corpus_stats(&[s(&["xin", "chào"])], &m, &sw).unwrap();
        assert_eq!(st.teencode_pct, 0.0);

        let empty: Vec<Vec<String>> = vec![];
        assert_eq!(corpus_stats(&empty, &m, &sw), Err(StatsError::EmptyCorpus));
        assert_eq!(corpus_stats(&[Vec::<String>::new()], &m, &sw), Err(StatsError::EmptyCorpus));
    }

    #[test]
    fn teencode_tsv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "# comment\nko\tkhông\nđc đấy\tđược đấy\n").unwrap();
        let m = TeencodeMap::load(&p).unwrap();
        assert_eq!(m.len(), 2);
        std::fs::write(&p, "ko không\n").unwrap();
        assert!(matches!(TeencodeMap::load(&p), Err(ResourceError::Parse { line: 1, .. })));
    }
}
