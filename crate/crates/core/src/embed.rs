//! Static word-embedding tables, sequence encoding and precomputed
//! contextual embeddings read from sidecar files.

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";
pub const SIDECAR_MAGIC: &[u8; 5] = b"VSEM1";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: duplicate word {word:?}")]
    Duplicate { line: usize, word: String },
    #[error("line {line}: row dimension {found}, expected {expected}")]
    RowDimension {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("header declares {declared} rows, file has {found}")]
    VocabMismatch { declared: usize, found: usize },
    #[error("no sidecar embedding for {0:?}")]
    MissingSidecar(String),
    #[error("sidecar dimension {found} does not match model dimension {expected}")]
    SidecarDimension { found: usize, expected: usize },
    #[error("corrupt sidecar: {0}")]
    CorruptSidecar(String),
}

/// Vocabulary plus a `V x D` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    matrix: Vec<f32>,
    dim: usize,
}

impl EmbeddingTable {
    /// Builds a table from rows; appends `<unk>` (mean row) and `<pad>`
    /// (zeros) when missing.
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        if dim == 0 {
            return Err(EmbedError::Format {
                line: 1,
                message: "dimension must be at least 1".into(),
            });
        }
        let mut table = EmbeddingTable {
            vocab: HashMap::new(),
            words: Vec::new(),
            matrix: Vec::new(),
            dim,
        };
        for (i, (word, row)) in rows.into_iter().enumerate() {
            table.push(i + 2, word, &row)?;
        }
        table.add_specials()?;
        Ok(table)
    }

    fn push(&mut self, line: usize, word: String, row: &[f32]) -> Result<(), EmbedError> {
        if row.len() != self.dim {
            return Err(EmbedError::RowDimension {
                line,
                found: row.len(),
                expected: self.dim,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Format {
                line,
                message: format!("non-finite value in row for {word:?}"),
            });
        }
        if word == PAD && row.iter().any(|&v| v != 0.0) {
            return Err(EmbedError::Format {
                line,
                message: "<pad> row must be all zero".into(),
            });
        }
        if self.vocab.contains_key(&word) {
            return Err(EmbedError::Duplicate { line, word });
        }
        self.vocab.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.matrix.extend_from_slice(row);
        Ok(())
    }

    fn add_specials(&mut self) -> Result<(), EmbedError> {
        if !self.vocab.contains_key(UNK) {
            let n = self.words.iter().filter(|w| w.as_str() != PAD).count();
            let mut mean = vec![0f64; self.dim];
            for (i, w) in self.words.iter().enumerate() {
                if w == PAD {
                    continue;
                }
                for (m, v) in mean.iter_mut().zip(self.row(i)) {
                    *m += f64::from(*v);
                }
            }
            let mean: Vec<f32> = mean
                .into_iter()
                .map(|m| if n == 0 { 0.0 } else { (m / n as f64) as f32 })
                .collect();
            self.push(0, UNK.to_string(), &mean)?;
        }
        if !self.vocab.contains_key(PAD) {
            let zeros = vec![0f32; self.dim];
            self.push(0, PAD.to_string(), &zeros)?;
        }
        Ok(())
    }

    /// Text vector format: first line `V D`, then `word v1 ... vD`.
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, EmbedError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| EmbedError::Format {
            line: 1,
            message: "missing header".into(),
        })??;
        let mut parts = header.split_whitespace();
        let parse_header = |s: Option<&str>| -> Result<usize, EmbedError> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| EmbedError::Format {
                line: 1,
                message: format!("bad header {header:?}"),
            })
        };
        let declared = parse_header(parts.next())?;
        let dim = parse_header(parts.next())?;
        if dim == 0 {
            return Err(EmbedError::Format {
                line: 1,
                message: "dimension must be at least 1".into(),
            });
        }
        let mut table = EmbeddingTable {
            vocab: HashMap::with_capacity(declared + 2),
            words: Vec::with_capacity(declared + 2),
            matrix: Vec::with_capacity((declared + 2) * dim),
            dim,
        };
        let mut found = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().unwrap_or_default().to_string();
            let row = fields
                .map(|f| f.parse::<f32>())
                .collect::<Result<Vec<f32>, _>>()
                .map_err(|e| EmbedError::Format {
                    line: lineno,
                    message: e.to_string(),
                })?;
            table.push(lineno, word, &row)?;
            found += 1;
        }
        if found != declared {
            return Err(EmbedError::VocabMismatch { declared, found });
        }
        table.add_specials()?;
        Ok(table)
    }

    /// Writes every row, specials included, so a reload is an identity.
    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for v in self.row(i) {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rows, specials included.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.row(i))
    }

    fn unk_row(&self) -> &[f32] {
        self.lookup(UNK).expect("table always has <unk>")
    }

    /// Row for `token`: exact match, then the token with surrounding
    /// punctuation trimmed, then `<unk>`.
    pub fn resolve(&self, token: &str) -> &[f32] {
        if let Some(row) = self.lookup(token) {
            return row;
        }
        let trimmed = token.trim_matches(|c: char| c.is_ascii_punctuation() || c == '…');
        if !trimmed.is_empty() && trimmed != token {
            if let Some(row) = self.lookup(trimmed) {
                return row;
            }
        }
        self.unk_row()
    }
}

/// A `max_len x D` matrix for one comment; rows past `true_len` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMatrix {
    pub rows: Vec<f32>,
    pub max_len: usize,
    pub dim: usize,
    pub true_len: usize,
}

impl SequenceMatrix {
    pub fn zeros(max_len: usize, dim: usize) -> Self {
        Self {
            rows: vec![0.0; max_len * dim],
            max_len,
            dim,
            true_len: 0,
        }
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.rows[t * self.dim..(t + 1) * self.dim]
    }
}

/// Encodes the first `max_len` tokens; the tail is truncated and short
/// sequences are padded at the end.
pub fn embed_sequence<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, max_len: usize) -> SequenceMatrix {
    let mut m = SequenceMatrix::zeros(max_len, table.dim());
    let n = tokens.len().min(max_len);
    for (t, token) in tokens.iter().take(n).enumerate() {
        m.rows[t * table.dim()..(t + 1) * table.dim()].copy_from_slice(table.resolve(token.as_ref()));
    }
    m.true_len = n;
    m
}

/// Precomputed sequence embeddings keyed by comment id.
#[derive(Debug, Clone, Default)]
pub struct SidecarStore {
    dim: usize,
    entries: HashMap<String, SequenceMatrix>,
}

impl SidecarStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, m: SequenceMatrix) -> Result<(), EmbedError> {
        if m.dim != self.dim {
            return Err(EmbedError::SidecarDimension {
                found: m.dim,
                expected: self.dim,
            });
        }
        self.entries.insert(id.into(), m);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Result<&SequenceMatrix, EmbedError> {
        self.entries
            .get(id)
            .ok_or_else(|| EmbedError::MissingSidecar(id.to_string()))
    }

    /// Reads a sidecar file, rejecting records whose D differs from `expected_dim`.
    pub fn load(path: &Path, expected_dim: usize) -> Result<Self, EmbedError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, expected_dim)
    }

    pub fn from_bytes(mut bytes: &[u8], expected_dim: usize) -> Result<Self, EmbedError> {
        let corrupt = |m: &str| EmbedError::CorruptSidecar(m.to_string());
        let mut magic = [0u8; 5];
        bytes.read_exact(&mut magic).map_err(|_| corrupt("missing magic"))?;
        if &magic != SIDECAR_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut store = SidecarStore::new(expected_dim);
        fn u32_le(b: &mut &[u8]) -> Option<u32> {
            let mut buf = [0u8; 4];
            b.read_exact(&mut buf).ok()?;
            Some(u32::from_le_bytes(buf))
        }
        while !bytes.is_empty() {
            let id_len = u32_le(&mut bytes).ok_or_else(|| corrupt("truncated id length"))? as usize;
            if bytes.len() < id_len {
                return Err(corrupt("truncated id"));
            }
            let id = std::str::from_utf8(&bytes[..id_len])
                .map_err(|_| corrupt("id is not UTF-8"))?
                .to_string();
            bytes = &bytes[id_len..];
            let max_len = u32_le(&mut bytes).ok_or_else(|| corrupt("truncated max_len"))? as usize;
            let dim = u32_le(&mut bytes).ok_or_else(|| corrupt("truncated dim"))? as usize;
            if dim != expected_dim {
                return Err(EmbedError::SidecarDimension {
                    found: dim,
                    expected: expected_dim,
                });
            }
            let n = max_len
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| corrupt("record too large"))?;
            if bytes.len() < n {
                return Err(corrupt("truncated matrix"));
            }
            let rows: Vec<f32> = bytes[..n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            bytes = &bytes[n..];
            let true_len = (0..max_len)
                .rev()
                .find(|&t| rows[t * dim..(t + 1) * dim].iter().any(|&v| v != 0.0))
                .map_or(0, |t| t + 1);
            store.entries.insert(
                id,
                SequenceMatrix {
                    rows,
                    max_len,
                    dim,
                    true_len,
                },
            );
        }
        Ok(store)
    }

    /// Serializes records in ascending id order.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(SIDECAR_MAGIC)?;
        let mut ids: Vec<&String> = self.entries.keys().collect();
        ids.sort();
        for id in ids {
            let m = &self.entries[id];
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&(m.max_len as u32).to_le_bytes())?;
            w.write_all(&(m.dim as u32).to_le_bytes())?;
            for v in &m.rows {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Resolves the input matrix for a comment: sidecar first (when loaded),
/// otherwise the static table.
#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    pub table: EmbeddingTable,
    pub sidecar: Option<SidecarStore>,
    pub fallback_to_static: bool,
}

impl EmbeddingProvider {
    pub fn static_only(table: EmbeddingTable) -> Self {
        Self {
            table,
            sidecar: None,
            fallback_to_static: true,
        }
    }

    pub fn with_sidecar(table: EmbeddingTable, sidecar: SidecarStore) -> Result<Self, EmbedError> {
        if sidecar.dim() != table.dim() {
            return Err(EmbedError::SidecarDimension {
                found: sidecar.dim(),
                expected: table.dim(),
            });
        }
        Ok(Self {
            table,
            sidecar: Some(sidecar),
            fallback_to_static: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn encode<S: AsRef<str>>(
        &self,
        comment_id: &str,
        tokens: &[S],
        max_len: usize,
    ) -> Result<SequenceMatrix, EmbedError> {
        if let Some(store) = &self.sidecar {
            match store.lookup(comment_id) {
                Ok(m) => return Ok(m.clone()),
                Err(e) if self.fallback_to_static => {
                    tracing::debug!(comment_id, "sidecar miss, using static table: {e}");
                }
                Err(e) => return Err(e),
            }
        }
        Ok(embed_sequence(tokens, &self.table, max_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "3 4\na 1 2 3 4\nb 0 0 0 1\nc -1 0.5 0 0\n";

    #[test]
    fn load_appends_specials() {
        let t = EmbeddingTable::read(SMALL.as_bytes()).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.len(), 5);
        assert_eq!(t.lookup(PAD).unwrap(), &[0.0; 4]);
        assert_eq!(t.lookup(UNK).unwrap(), &[0.0, 2.5 / 3.0, 1.0, 5.0 / 3.0]);
        assert_eq!(t.lookup("c").unwrap(), &[-1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn load_errors() {
        let short = "1 4\na 1 2 3\n";
        assert!(matches!(
            EmbeddingTable::read(short.as_bytes()),
            Err(EmbedError::RowDimension { found: 3, expected: 4, .. })
        ));
        let dup = "2 1\na 1\na 2\n";
        assert!(matches!(EmbeddingTable::read(dup.as_bytes()), Err(EmbedError::Duplicate { .. })));
        let count = "3 1\na 1\nb 2\n";
        assert!(matches!(
            EmbeddingTable::read(count.as_bytes()),
            Err(EmbedError::VocabMismatch { declared: 3, found: 2 })
        ));
        assert!(EmbeddingTable::read("x\n".as_bytes()).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let t = EmbeddingTable::read("2 3\nxin 0.1 -0.25 1e-3\nchào 3.14159 2.71828 -1\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sequence_padding_and_truncation() {
        let t = EmbeddingTable::read(SMALL.as_bytes()).unwrap();
        let empty: [&str; 0] = [];
        let m = embed_sequence(&empty, &t, 4);
        assert_eq!(m.rows, vec![0.0; 16]);
        assert_eq!(m.true_len, 0);

        let m = embed_sequence(&["a", "zzz"], &t, 4);
        assert_eq!(m.row(0), t.lookup("a").unwrap());
        assert_eq!(m.row(1), t.lookup(UNK).unwrap());
        assert_eq!(m.row(2), &[0.0; 4]);
        assert_eq!(m.true_len, 2);

        let long: Vec<String> = (0..25).map(|i| if i % 2 == 0 { "a".into() } else { "b".into() }).collect();
        let m = embed_sequence(&long, &t, 20);
        assert_eq!(m.true_len, 20);
        assert_eq!(m.rows.len(), 20 * 4);
        assert_eq!(m.row(19), t.lookup("b").unwrap());
    }

    #[test]
    fn punctuation_trimmed_lookup() {
        let t = EmbeddingTable::read(SMALL.as_bytes()).unwrap();
        assert_eq!(t.resolve("a."), t.lookup("a").unwrap());
        assert_eq!(t.resolve("..."), t.lookup(UNK).unwrap());
    }

    #[test]
    fn sidecar_roundtrip_and_errors() {
        let mut store = SidecarStore::new(2);
        let m = SequenceMatrix {
            rows: vec![0.5, -1.25, f32::MIN_POSITIVE, 3.0, 0.0, 0.0],
            max_len: 3,
            dim: 2,
            true_len: 2,
        };
        store.insert("c1", m.clone()).unwrap();
        let mut buf = Vec::new();
        store.write(&mut buf).unwrap();
        let back = SidecarStore::from_bytes(&buf, 2).unwrap();
        assert_eq!(back.lookup("c1").unwrap(), &m);
        assert!(matches!(back.lookup("nope"), Err(EmbedError::MissingSidecar(_))));
        assert!(matches!(
            SidecarStore::from_bytes(&buf, 3),
            Err(EmbedError::SidecarDimension { found: 2, expected: 3 })
        ));
        assert!(matches!(
            SidecarStore::from_bytes(&buf[..buf.len() - 1], 2),
            Err(EmbedError::CorruptSidecar(_))
        ));
        assert!(SidecarStore::from_bytes(b"NOPE!", 2).is_err());
    }

    #[test]
    fn provider_fallback() {
        let t = EmbeddingTable::read(SMALL.as_bytes()).unwrap();
        let mut store = SidecarStore::new(4);
        let stored = SequenceMatrix {
            rows: vec![9.0; 8],
            max_len: 2,
            dim: 4,
            true_len: 2,
        };
        store.insert("known", stored.clone()).unwrap();
        let mut p = EmbeddingProvider::with_sidecar(t.clone(), store).unwrap();
        assert_eq!(p.encode("known", &["a"], 2).unwrap(), stored);
        assert_eq!(p.encode("other", &["a"], 2).unwrap(), embed_sequence(&["a"], &t, 2));
        p.fallback_to_static = false;
        assert!(p.encode("other", &["a"], 2).is_err());
        assert!(EmbeddingProvider::with_sidecar(t, SidecarStore::new(3)).is_err());
    }
}
