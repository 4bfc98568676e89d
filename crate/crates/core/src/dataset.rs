//! Loader for labeled comment corpora in CSV form (the ViHSD release layout:
//! a `free_text` column and a numeric `label_id` column).

use std::io::Read;
use std::path::Path;

use crate::error::ResourceError;
use crate::label::Label;
use crate::normalize::RawComment;

pub const TEXT_COLUMN: &str = "free_text";
pub const LABEL_COLUMN: &str = "label_id";

/// Split files looked up by [`read_split`].
pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

/// Reads comments and labels. Ids are `<prefix><row>`, counting data rows
/// from 1.
pub fn read_labeled_csv(reader: impl Read, path: &Path, prefix: &str) -> Result<Vec<(RawComment, Label)>, ResourceError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ResourceError::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ResourceError::parse(path, 1, format!("missing column {name:?}")))
    };
    let (text_col, label_col) = (col(TEXT_COLUMN)?, col(LABEL_COLUMN)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ResourceError::parse(path, line, e.to_string()))?;
        let text = rec.get(text_col).unwrap_or_default();
        let label: Label = rec
            .get(label_col)
            .unwrap_or_default()
            .parse()
            .map_err(|e: String| ResourceError::parse(path, line, e))?;
        out.push((RawComment::new(format!("{prefix}{}", i + 1), text), label));
    }
    Ok(out)
}

pub fn load_labeled_csv(path: &Path, prefix: &str) -> Result<Vec<(RawComment, Label)>, ResourceError> {
    let file = std::fs::File::open(path).map_err(|e| ResourceError::io(path, e))?;
    read_labeled_csv(file, path, prefix)
}

/// `<dir>/<split>.csv`, e.g. `train.csv`.
pub fn read_split(dir: &Path, split: &str) -> Result<Vec<(RawComment, Label)>, ResourceError> {
    load_labeled_csv(&dir.join(format!("{split}.csv")), &format!("{split}-"))
}
