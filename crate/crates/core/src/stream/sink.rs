use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{DeadLetter, SinkRow};

/// Destination for classified rows. Only the processing thread writes.
pub trait RowSink: Send {
    fn contains(&self, id: &str) -> bool;
    /// Appends rows whose ids are not yet present. Either all rows land or,
    /// on error, none do.
    fn append(&mut self, rows: &[SinkRow]) -> io::Result<()>;
}

pub trait DeadLetterSink: Send {
    fn append(&mut self, letters: &[DeadLetter]) -> io::Result<()>;
}

#[derive(Deserialize)]
struct IdOnly {
    id: String,
}

/// Append-only JSON-lines sink, one row per line, keyed by id.
///
/// Opening an existing file loads its ids (so replays are no-ops) and
/// drops a trailing partial line left by a crash.
#[derive(Debug)]
pub struct JsonlSink {
    path: PathBuf,
    file: File,
    ids: HashSet<String>,
}

/// Truncates a trailing line that lacks its newline. Returns the bytes removed.
fn repair_tail(file: &mut File) -> io::Result<u64> {
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(0);
    }
    let mut contents = Vec::with_capacity(len as usize);
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut contents)?;
    let keep = contents.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1) as u64;
    if keep < len {
        file.set_len(keep)?;
    }
    file.seek(SeekFrom::End(0))?;
    Ok(len - keep)
}

impl JsonlSink {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let dropped = repair_tail(&mut file)?;
        if dropped > 0 {
            tracing::warn!(path = %path.display(), dropped, "dropped partial trailing line");
        }
        let mut ids = HashSet::new();
        file.seek(SeekFrom::Start(0))?;
        for (i, line) in BufReader::new(&file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: IdOnly = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            ids.insert(row.id);
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Self { path, file, ids })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl RowSink for JsonlSink {
    fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    fn append(&mut self, rows: &[SinkRow]) -> io::Result<()> {
        let mut buf = String::new();
        let mut new_ids = Vec::new();
        for row in rows {
            if self.ids.contains(&row.id) || new_ids.contains(&&row.id) {
                continue;
            }
            buf.push_str(&serde_json::to_string(row).map_err(io::Error::other)?);
            buf.push('\n');
            new_ids.push(&row.id);
        }
        let before = self.file.metadata()?.len();
        let written = self.file.write_all(buf.as_bytes()).and_then(|()| self.file.flush());
        if let Err(e) = written {
            // roll back so a retry never follows a torn line
            let _ = self.file.set_len(before);
            return Err(e);
        }
        self.ids.extend(new_ids.into_iter().cloned());
        Ok(())
    }
}

/// Append-only JSON-lines dead-letter file.
#[derive(Debug)]
pub struct JsonlDeadLetters {
    file: File,
}

impl JsonlDeadLetters {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
        repair_tail(&mut file)?;
        Ok(Self { file })
    }
}

impl DeadLetterSink for JsonlDeadLetters {
    fn append(&mut self, letters: &[DeadLetter]) -> io::Result<()> {
        let mut buf = String::new();
        for d in letters {
            buf.push_str(&serde_json::to_string(d).map_err(io::Error::other)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()
    }
}

/// In-memory sink; clones share the same storage.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub rows: Arc<Mutex<Vec<SinkRow>>>,
    pub dead_letters: Arc<Mutex<Vec<DeadLetter>>>,
}

impl MemorySink {
    pub fn rows(&self) -> Vec<SinkRow> {
        self.rows.lock().expect("sink lock").clone()
    }

    pub fn dead(&self) -> Vec<DeadLetter> {
        self.dead_letters.lock().expect("sink lock").clone()
    }
}

impl RowSink for MemorySink {
    fn contains(&self, id: &str) -> bool {
        self.rows.lock().expect("sink lock").iter().any(|r| r.id == id)
    }

    fn append(&mut self, rows: &[SinkRow]) -> io::Result<()> {
        self.rows.lock().expect("sink lock").extend_from_slice(rows);
        Ok(())
    }
}

impl DeadLetterSink for MemorySink {
    fn append(&mut self, letters: &[DeadLetter]) -> io::Result<()> {
        self.dead_letters.lock().expect("sink lock").extend_from_slice(letters);
        Ok(())
    }
}

/// Reads every line of a JSON-lines file into `T`.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> io::Result<Vec<T>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn row(id: &str) -> SinkRow {
        SinkRow {
            id: id.into(),
            text: "t".into(),
            source: "s".into(),
            fetched_at: 0,
            ingest_ts: 0,
            seq: 0,
            label: Label::Clean,
            label_code: 0.0,
            probs: [1.0, 0.0, 0.0],
            model_version: "m".into(),
            latency_ms: 0.0,
        }
    }

    #[test]
    fn idempotent_and_repairs_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let mut sink = JsonlSink::open(&path).unwrap();
        sink.append(&[row("a"), row("b"), row("a")]).unwrap();
        sink.append(&[row("b"), row("c")]).unwrap();
        drop(sink);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"id\":\"d\",\"te").unwrap();
        drop(f);

        let mut sink = JsonlSink::open(&path).unwrap();
        assert_eq!(sink.len(), 3);
        assert!(sink.contains("c") && !sink.contains("d"));
        sink.append(&[row("d")]).unwrap();
        let rows: Vec<SinkRow> = read_jsonl(&path).unwrap();
        let ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c", "d"]);
    }
}
