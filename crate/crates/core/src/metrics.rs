//! Evaluation: confusion matrices, averaged per-class accuracy, macro
//! precision/recall/F1, and k-fold splitting.
//!
//! The headline `accuracy` is the mean over classes of the one-vs-rest
//! accuracy `(tp + tn) / total`, and `f1` is the harmonic mean of macro
//! precision and macro recall. Conventional trace/total accuracy and the
//! mean of per-class F1 scores are reported alongside under their own names.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, NUM_CLASSES};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: {preds} predictions, {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("empty input")]
    Empty,
    #[error("cannot split {n} items into {k} folds")]
    TooFewItems { n: usize, k: usize },
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Per-class one-vs-rest counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, gold: Label, pred: Label) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, gold: Label) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let tp = self.counts[class][class];
        let fn_ = self.counts[class].iter().sum::<u64>() - tp;
        let fp = (0..NUM_CLASSES).map(|r| self.counts[r][class]).sum::<u64>() - tp;
        let tn = self.total() - tp - fn_ - fp;
        ClassCounts { tp, fp, fn_, tn }
    }

    fn ensure_nonempty(&self) -> Result<(), MetricsError> {
        if self.total() == 0 {
            Err(MetricsError::Empty)
        } else {
            Ok(())
        }
    }

    /// Mean over classes of `(tp + tn) / (tp + fp + tn + fn)`.
    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        self.ensure_nonempty()?;
        let sum: f64 = (0..NUM_CLASSES)
            .map(|c| {
                let k = self.class_counts(c);
                ratio(k.tp + k.tn, k.tp + k.fp + k.tn + k.fn_)
            })
            .sum();
        Ok(sum / NUM_CLASSES as f64)
    }

    /// Macro precision, macro recall, and their harmonic mean. A 0/0
    /// component counts as 0.
    pub fn macro_prf1(&self) -> Result<(f64, f64, f64), MetricsError> {
        self.ensure_nonempty()?;
        let (mut p, mut r) = (0.0, 0.0);
        for c in 0..NUM_CLASSES {
            let k = self.class_counts(c);
            p += ratio(k.tp, k.tp + k.fp);
            r += ratio(k.tp, k.tp + k.fn_);
        }
        let (p, r) = (p / NUM_CLASSES as f64, r / NUM_CLASSES as f64);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Ok((p, r, f1))
    }

    /// `trace / total`.
    pub fn standard_accuracy(&self) -> f64 {
        let trace: u64 = (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum();
        ratio(trace, self.total())
    }

    /// Mean of per-class F1 scores.
    pub fn per_class_f1_mean(&self) -> f64 {
        let sum: f64 = (0..NUM_CLASSES)
            .map(|c| {
                let k = self.class_counts(c);
                let p = ratio(k.tp, k.tp + k.fp);
                let r = ratio(k.tp, k.tp + k.fn_);
                if p + r == 0.0 {
                    0.0
                } else {
                    2.0 * p * r / (p + r)
                }
            })
            .sum();
        sum / NUM_CLASSES as f64
    }

    pub fn report(&self) -> Result<MetricReport, MetricsError> {
        let accuracy = self.accuracy()?;
        let (precision_macro, recall_macro, f1) = self.macro_prf1()?;
        Ok(MetricReport {
            accuracy,
            precision_macro,
            recall_macro,
            f1,
            standard_accuracy: self.standard_accuracy(),
            per_class_f1_mean: self.per_class_f1_mean(),
            confusion: *self,
        })
    }
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in preds.iter().zip(golds) {
        cm.add(g, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean per-class one-vs-rest accuracy.
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    /// Harmonic mean of `precision_macro` and `recall_macro`.
    pub f1: f64,
    /// Supplementary: `trace / total`.
    pub standard_accuracy: f64,
    /// Supplementary: mean of per-class F1.
    pub per_class_f1_mean: f64,
    pub confusion: ConfusionMatrix,
}

/// Seeded shuffle of `0..n` cut into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MetricsError> {
    if k < 2 || n < k {
        return Err(MetricsError::TooFewItems { n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Train and test indices of one fold.
pub type FoldPair = (Vec<usize>, Vec<usize>);

/// Train/test index pairs for each fold.
pub fn kfold_pairs(n: usize, k: usize, seed: u64) -> Result<Vec<FoldPair>, MetricsError> {
    let folds = kfold_split(n, k, seed)?;
    Ok((0..k)
        .map(|i| {
            let train = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (train, folds[i].clone())
        })
        .collect())
}
