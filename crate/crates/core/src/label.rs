use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three moderation classes. Wire codes are 0.0, 1.0 and 2.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Clean,
    Offensive,
    Hate,
}

pub const NUM_CLASSES: usize = 3;

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Clean, Label::Offensive, Label::Hate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn code(self) -> f64 {
        self.index() as f64
    }

    pub fn from_code(code: f64) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Clean => "CLEAN",
            Label::Offensive => "OFFENSIVE",
            Label::Hate => "HATE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CLEAN" | "0" => Ok(Label::Clean),
            "OFFENSIVE" | "OFF" | "1" => Ok(Label::Offensive),
            "HATE" | "2" => Ok(Label::Hate),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One count per label, indexed by [`Label::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts(pub [usize; NUM_CLASSES]);

impl LabelCounts {
    pub fn new(clean: usize, offensive: usize, hate: usize) -> Self {
        LabelCounts([clean, offensive, hate])
    }

    pub fn of<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let mut c = LabelCounts::default();
        for l in labels {
            c.0[l.index()] += 1;
        }
        c
    }

    pub fn get(&self, label: Label) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl FromStr for LabelCounts {
    type Err = String;

    /// Parses `clean=C,off=O,hate=H`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [None; NUM_CLASSES];
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected label=count, got {part:?}"))?;
            let label: Label = k.parse()?;
            let v: usize = v.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
            out[label.index()] = Some(v);
        }
        let mut counts = [0; NUM_CLASSES];
        for (i, v) in out.into_iter().enumerate() {
            counts[i] = v.ok_or_else(|| format!("missing count for {}", Label::ALL[i]))?;
        }
        Ok(LabelCounts(counts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(Label::Clean.code(), 0.0);
        assert_eq!(Label::Offensive.code(), 1.0);
        assert_eq!(Label::Hate.code(), 2.0);
        assert_eq!(Label::from_code(2.0), Some(Label::Hate));
        assert_eq!(Label::from_code(2.5), None);
        assert_eq!(serde_json::to_string(&Label::Hate).unwrap(), "\"HATE\"");
    }

    #[test]
    fn target_parsing() {
        let t: LabelCounts = "clean=19886,off=10147,hate=16849".parse().unwrap();
        assert_eq!(t, LabelCounts::new(19886, 10147, 16849));
        assert!("clean=1,off=2".parse::<LabelCounts>().is_err());
    }
}
