//! TF-IDF features over unigrams and bigrams with a multinomial Naive Bayes
//! classifier.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, NUM_CLASSES};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("vector width {found} does not match vocabulary size {expected}")]
    Width { found: usize, expected: usize },
    #[error("alpha must be positive, got {0}")]
    Alpha(f64),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A sparse row: sorted `(column, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, k: f64) -> SparseVector {
        SparseVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * k)).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Unigrams and bigrams of a token sequence. Bigrams are the two tokens
/// joined by a single space, which never occurs inside a token.
pub fn ngrams(tokens: &[String]) -> impl Iterator<Item = String> + '_ {
    let unigrams = tokens.iter().cloned();
    let bigrams = tokens.windows(2).map(|w| format!("{} {}", w[0], w[1]));
    unigrams.chain(bigrams)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// Terms in column order (sorted).
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfModel {
    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<[String]>>(corpus: &[S]) -> Result<Self, BaselineError> {
        if corpus.is_empty() {
            return Err(BaselineError::EmptyCorpus);
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let uniq: BTreeSet<String> = ngrams(doc.as_ref()).collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut terms: Vec<String> = df.keys().cloned().collect();
        terms.sort();
        let n = corpus.len() as f64;
        let idf = terms
            .iter()
            .map(|t| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0)
            .collect();
        Ok(Self::from_parts(terms, idf))
    }

    fn from_parts(terms: Vec<String>, idf: Vec<f64>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, idf, index }
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Raw count times idf, L2-normalized. Unseen terms are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in ngrams(tokens) {
            if let Some(&i) = self.index.get(&t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector {
            dim: self.terms.len(),
            entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub alpha: f64,
    pub class_log_prior: [f64; NUM_CLASSES],
    /// `NUM_CLASSES x vocab` log-likelihoods.
    pub feature_log_prob: Vec<Vec<f64>>,
}

impl MnbModel {
    /// Multinomial Naive Bayes with additive (Lidstone) smoothing.
    pub fn train(vectors: &[SparseVector], labels: &[Label], alpha: f64) -> Result<Self, BaselineError> {
        if vectors.is_empty() {
            return Err(BaselineError::EmptyCorpus);
        }
        if vectors.len() != labels.len() {
            return Err(BaselineError::LengthMismatch {
                vectors: vectors.len(),
                labels: labels.len(),
            });
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(BaselineError::Alpha(alpha));
        }
        let dim = vectors[0].dim;
        let mut class_count = [0usize; NUM_CLASSES];
        let mut feature_count = vec![vec![0.0f64; dim]; NUM_CLASSES];
        for (v, l) in vectors.iter().zip(labels) {
            if v.dim != dim {
                return Err(BaselineError::Width {
                    found: v.dim,
                    expected: dim,
                });
            }
            class_count[l.index()] += 1;
            for &(i, x) in &v.entries {
                feature_count[l.index()][i] += x;
            }
        }
        let total = vectors.len() as f64;
        let class_log_prior = class_count.map(|c| (c as f64 / total).ln());
        let feature_log_prob = feature_count
            .into_iter()
            .map(|row| {
                let denom: f64 = row.iter().map(|c| c + alpha).sum();
                row.into_iter().map(|c| ((c + alpha) / denom).ln()).collect()
            })
            .collect();
        Ok(Self {
            alpha,
            class_log_prior,
            feature_log_prob,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.feature_log_prob.first().map_or(0, Vec::len)
    }

    /// Joint log-likelihood per class.
    pub fn joint_log_likelihood(&self, v: &SparseVector) -> Result<[f64; NUM_CLASSES], BaselineError> {
        if v.dim != self.vocab_size() {
            return Err(BaselineError::Width {
                found: v.dim,
                expected: self.vocab_size(),
            });
        }
        let mut jll = self.class_log_prior;
        for (c, out) in jll.iter_mut().enumerate() {
            for &(i, x) in &v.entries {
                *out += x * self.feature_log_prob[c][i];
            }
        }
        Ok(jll)
    }

    /// Posterior probabilities and the argmax label (ties to the lowest class).
    pub fn predict(&self, v: &SparseVector) -> Result<(Label, [f64; NUM_CLASSES]), BaselineError> {
        let jll = self.joint_log_likelihood(v)?;
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if jll[c] > jll[best] {
                best = c;
            }
        }
        let max = jll[best];
        let exps = jll.map(|l| (l - max).exp());
        let sum: f64 = exps.iter().sum();
        Ok((Label::ALL[best], exps.map(|e| e / sum)))
    }
}

/// Fitted vectorizer plus classifier, as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub tfidf: TfidfModel,
    pub mnb: MnbModel,
}

#[derive(Serialize, Deserialize)]
struct PersistedBaseline {
    version: u32,
    ngram_range: (usize, usize),
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    alpha: f64,
    /// Class priors as probabilities (not logs) so absent classes stay finite.
    priors: [f64; NUM_CLASSES],
    likelihoods: Vec<Vec<f64>>,
}

impl BaselineModel {
    pub fn fit<S: AsRef<[String]>>(corpus: &[S], labels: &[Label], alpha: f64) -> Result<Self, BaselineError> {
        let tfidf = TfidfModel::fit(corpus)?;
        let vectors: Vec<SparseVector> = corpus.iter().map(|d| tfidf.transform(d.as_ref())).collect();
        let mnb = MnbModel::train(&vectors, labels, alpha)?;
        Ok(Self { tfidf, mnb })
    }

    pub fn predict(&self, tokens: &[String]) -> Result<(Label, [f64; NUM_CLASSES]), BaselineError> {
        self.mnb.predict(&self.tfidf.transform(tokens))
    }

    pub fn to_json(&self) -> Result<String, BaselineError> {
        let p = PersistedBaseline {
            version: MODEL_FORMAT_VERSION,
            ngram_range: (1, 2),
            vocabulary: self.tfidf.terms.clone(),
            idf: self.tfidf.idf.clone(),
            alpha: self.mnb.alpha,
            priors: self.mnb.class_log_prior.map(f64::exp),
            likelihoods: self.mnb.feature_log_prob.clone(),
        };
        Ok(serde_json::to_string(&p)?)
    }

    pub fn from_json(s: &str) -> Result<Self, BaselineError> {
        let p: PersistedBaseline = serde_json::from_str(s)?;
        if p.version != MODEL_FORMAT_VERSION {
            return Err(BaselineError::Version(p.version));
        }
        Ok(Self {
            tfidf: TfidfModel::from_parts(p.vocabulary, p.idf),
            mnb: MnbModel {
                alpha: p.alpha,
                class_log_prior: p.priors.map(f64::ln),
                feature_log_prob: p.likelihoods,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn tfidf_vocabulary_and_idf() {
        let m = TfidfModel::fit(&[doc("a b"), doc("b c")]).unwrap();
        assert_eq!(m.terms, vec!["a", "a b", "b", "b c", "c"]);
        let idf = |t: &str| m.idf[m.column(t).unwrap()];
        assert!((idf("b") - 1.0).abs() < 1e-15);
        assert!((idf("a") - (1.5f64.ln() + 1.0)).abs() < 1e-15);
        assert!((idf("a") - 1.4055).abs() < 1e-4);
    }

    #[test]
    fn tfidf_transform() {
        let m = TfidfModel::fit(&[doc("a b"), doc("b c")]).unwrap();
        let v = m.transform(&doc("x y"));
        assert!(v.entries.is_empty());
        assert_eq!(v.norm(), 0.0);
        let v = m.transform(&doc("a b b"));
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert_eq!(v, m.transform(&doc("a b b")));
        assert!(TfidfModel::fit::<Vec<String>>(&[]).is_err());
    }

    /// Two features, four documents, computed by hand.
    #[test]
    fn mnb_matches_hand_computation() {
        let v = |a: f64, b: f64| SparseVector {
            dim: 2,
            entries: vec![(0, a), (1, b)],
        };
        let vectors = [v(2.0, 0.0), v(1.0, 1.0), v(0.0, 3.0), v(1.0, 2.0)];
        let labels = [Label::Clean, Label::Clean, Label::Hate, Label::Hate];
        let m = MnbModel::train(&vectors, &labels, 1.0).unwrap();
        // CLEAN: counts (3, 1) + 1 -> (4, 2) / 6 ; HATE: (1, 5) + 1 -> (2, 6) / 8
        assert!((m.feature_log_prob[0][0] - (4.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((m.feature_log_prob[2][1] - (6.0f64 / 8.0).ln()).abs() < 1e-12);
        assert_eq!(m.class_log_prior[1], f64::NEG_INFINITY);
        let x = v(1.0, 1.0);
        let (label, probs) = m.predict(&x).unwrap();
        let clean = 0.5 * (4.0 / 6.0) * (2.0 / 6.0);
        let hate = 0.5 * (2.0 / 8.0) * (6.0 / 8.0);
        let expected_clean: f64 = clean / (clean + hate);
        assert!((probs[0] - expected_clean).abs() < 1e-12);
        assert!((probs[2] - (1.0 - expected_clean)).abs() < 1e-12);
        assert_eq!(probs[1], 0.0);
        assert_eq!(label, Label::Clean);
    }

    #[test]
    fn mnb_tie_and_priors() {
        let v = |a: f64| SparseVector {
            dim: 1,
            entries: vec![(0, a)],
        };
        let m = MnbModel::train(&[v(1.0), v(1.0)], &[Label::Offensive, Label::Hate], 1.0).unwrap();
        assert_eq!(m.predict(&v(1.0)).unwrap().0, Label::Offensive);
        let m = MnbModel::train(
            &[v(1.0), v(1.0), v(1.0)],
            &[Label::Hate, Label::Hate, Label::Clean],
            DEFAULT_ALPHA,
        )
        .unwrap();
        let zero = SparseVector { dim: 1, entries: vec![] };
        assert_eq!(m.predict(&zero).unwrap().0, Label::Hate);
        let s: f64 = m.class_log_prior.iter().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(matches!(
            m.predict(&SparseVector { dim: 2, entries: vec![] }),
            Err(BaselineError::Width { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let corpus = [doc("a b"), doc("b c"), doc("c d")];
        let labels = [Label::Clean, Label::Offensive, Label::Clean];
        let m = BaselineModel::fit(&corpus, &labels, 1.0).unwrap();
        let back = BaselineModel::from_json(&m.to_json().unwrap()).unwrap();
        for d in &corpus {
            assert_eq!(back.predict(d).unwrap(), m.predict(d).unwrap());
        }
        assert_eq!(back.tfidf.column("b c"), m.tfidf.column("b c"));
    }
}
