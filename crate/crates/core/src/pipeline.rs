//! The full predict path: Phase 1, Phase 2, encoding and classification.
//!
//! Both the offline `predict` entry points and the streaming engine go
//! through [`Predictor::predict`], so their outputs are identical for the
//! same text.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::SynonymMap;
use crate::baseline::{BaselineError, BaselineModel};
use crate::embed::{EmbedError, EmbeddingProvider, EmbeddingTable};
use crate::error::ResourceError;
use crate::label::{Label, NUM_CLASSES};
use crate::normalize::{phase1_text, read_word_list, NormalizeConfig, RawComment};
use crate::segment::{phase2, Lexicon, Phase2Resources, Stopwords, TeencodeMap};
use crate::textcnn::{self, CheckpointError, CnnError, TextCnnParams};

pub const BUNDLED_LEXICON: &str = include_str!("../resources/lexicon.txt");
pub const BUNDLED_TEENCODE: &str = include_str!("../resources/teencode.tsv");
pub const BUNDLED_STOPWORDS: &str = include_str!("../resources/stopwords.txt");
pub const BUNDLED_PROTECTED: &str = include_str!("../resources/protected.txt");
pub const BUNDLED_SYNONYMS: &str = include_str!("../resources/synonyms.tsv");

const FIXTURE_CHECKPOINT: &[u8] = include_bytes!("../fixtures/textcnn.ckpt");
const FIXTURE_EMBEDDINGS: &str = include_str!("../fixtures/embeddings.txt");

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Phase-1 settings plus Phase-2 dictionaries.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub normalize: NormalizeConfig,
    pub phase2: Phase2Resources,
}

/// Paths to dictionary files; any missing entry falls back to the bundled copy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePaths {
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub teencode: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub protected: Option<PathBuf>,
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(format!("<bundled>/{name}"))
}

impl Preprocessor {
    /// The dictionaries shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_paths(&ResourcePaths::default()).expect("bundled resources parse")
    }

    pub fn new(mut normalize: NormalizeConfig, phase2: Phase2Resources) -> Self {
        // teencode keys such as "cc" must survive repeat collapsing
        normalize.protect_teencode(&phase2.teencode);
        Self { normalize, phase2 }
    }

    pub fn from_paths(paths: &ResourcePaths) -> Result<Self, ResourceError> {
        let lexicon = match &paths.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::read(BUNDLED_LEXICON.as_bytes()).map_err(|e| ResourceError::io(&bundled("lexicon"), e))?,
        };
        let teencode = match &paths.teencode {
            Some(p) => TeencodeMap::load(p)?,
            None => TeencodeMap::read(BUNDLED_TEENCODE.as_bytes(), &bundled("teencode"))?,
        };
        let stopwords = match &paths.stopwords {
            Some(p) => Stopwords::load(p)?,
            None => Stopwords::read(BUNDLED_STOPWORDS.as_bytes()).map_err(|e| ResourceError::io(&bundled("stopwords"), e))?,
        };
        let protected = match &paths.protected {
            Some(p) => crate::normalize::load_protected_lexicon(p)?,
            None => read_word_list(BUNDLED_PROTECTED.as_bytes()).map_err(|e| ResourceError::io(&bundled("protected"), e))?,
        };
        Ok(Self::new(
            NormalizeConfig::with_protected(protected),
            Phase2Resources {
                lexicon,
                teencode,
                stopwords,
            },
        ))
    }

    pub fn phase1(&self, text: &str) -> String {
        phase1_text(text, &self.normalize)
    }

    /// Phase 1 followed by Phase 2.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        phase2(&self.phase1(text), &self.phase2)
    }
}

pub fn bundled_synonyms() -> SynonymMap {
    SynonymMap::read(BUNDLED_SYNONYMS.as_bytes(), &bundled("synonyms")).expect("bundled synonyms parse")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub label_code: f64,
    pub probs: [f64; NUM_CLASSES],
    pub model_version: String,
}

impl Prediction {
    pub fn new(probs: [f64; NUM_CLASSES], model_version: &str) -> Self {
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        let label = Label::ALL[best];
        Self {
            label,
            label_code: label.code(),
            probs,
            model_version: model_version.to_string(),
        }
    }
}

/// A model that labels preprocessed tokens. Shared read-only across threads.
pub trait Classifier: Send + Sync {
    fn model_version(&self) -> &str;
    fn classify(&self, comment_id: &str, tokens: &[String]) -> Result<Prediction, ClassifyError>;
}

pub struct CnnClassifier {
    params: TextCnnParams<f32>,
    provider: EmbeddingProvider,
    version: String,
}

impl CnnClassifier {
    pub fn new(params: TextCnnParams<f32>, provider: EmbeddingProvider) -> Result<Self, CheckpointError> {
        textcnn::check_embedding_dim(&params, provider.dim())?;
        let version = textcnn::model_version(&params);
        Ok(Self {
            params,
            provider,
            version,
        })
    }

    pub fn load(checkpoint: &Path, embeddings: &Path) -> Result<Self, LoadError> {
        let params = textcnn::load_checkpoint(checkpoint)?;
        let table = EmbeddingTable::load(embeddings)?;
        Ok(Self::new(params, EmbeddingProvider::static_only(table))?)
    }

    /// The small model shipped in `fixtures/`, trained on synthetic comments.
    pub fn fixture() -> Self {
        let params = textcnn::read_checkpoint(FIXTURE_CHECKPOINT).expect("fixture checkpoint parses");
        let table = EmbeddingTable::read(FIXTURE_EMBEDDINGS.as_bytes()).expect("fixture embeddings parse");
        Self::new(params, EmbeddingProvider::static_only(table)).expect("fixture dimensions agree")
    }

    pub fn params(&self) -> &TextCnnParams<f32> {
        &self.params
    }

    pub fn provider(&self) -> &EmbeddingProvider {
        &self.provider
    }
}

impl Classifier for CnnClassifier {
    fn model_version(&self) -> &str {
        &self.version
    }

    fn classify(&self, comment_id: &str, tokens: &[String]) -> Result<Prediction, ClassifyError> {
        let x = self.provider.encode(comment_id, tokens, self.params.arch.max_len)?;
        let probs = textcnn::predict_probs(&self.params, &x)?;
        Ok(Prediction::new(probs.map(f64::from), &self.version))
    }
}

pub struct MnbClassifier {
    model: BaselineModel,
    version: String,
}

impl MnbClassifier {
    pub fn new(model: BaselineModel) -> Self {
        let version = format!("mnb-v{}-{}", crate::baseline::MODEL_FORMAT_VERSION, model.tfidf.vocab_size());
        Self { model, version }
    }
}

impl Classifier for MnbClassifier {
    fn model_version(&self) -> &str {
        &self.version
    }

    fn classify(&self, _comment_id: &str, tokens: &[String]) -> Result<Prediction, ClassifyError> {
        let (_, probs) = self.model.predict(tokens)?;
        Ok(Prediction::new(probs, &self.version))
    }
}

/// Preprocessing plus a classifier: text in, prediction out.
#[derive(Clone)]
pub struct Predictor {
    pub preprocessor: Arc<Preprocessor>,
    pub classifier: Arc<dyn Classifier>,
}

impl Predictor {
    pub fn new(preprocessor: Preprocessor, classifier: impl Classifier + 'static) -> Self {
        Self {
            preprocessor: Arc::new(preprocessor),
            classifier: Arc::new(classifier),
        }
    }

    /// Bundled dictionaries with the fixture model.
    pub fn fixture() -> Self {
        Self::new(Preprocessor::bundled(), CnnClassifier::fixture())
    }

    pub fn model_version(&self) -> &str {
        self.classifier.model_version()
    }

    pub fn predict(&self, comment: &RawComment) -> Result<Prediction, ClassifyError> {
        let tokens = self.preprocessor.tokens(&comment.text);
        self.classifier.classify(&comment.id, &tokens)
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction, ClassifyError> {
        self.predict(&RawComment::new("", text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn bundled_preprocessing() {
        let p = Preprocessor::bundled();
        assert_eq!(p.phase1("cc"), "cc");
        assert_eq!(p.phase1("vuiiii"), "vui");
        assert_eq!(p.tokens("Xem video hay https://x.y/z"), words("xem video hay"));
        assert_eq!(p.tokens("học sinh ko ngoan"), words("học_sinh không ngoan"));
    }

    #[test]
    fn prediction_argmax_and_code() {
        let p = Prediction::new([0.2, 0.5, 0.3], "m");
        assert_eq!(p.label, Label::Offensive);
        assert_eq!(p.label_code, 1.0);
        assert_eq!(Prediction::new([0.4, 0.4, 0.2], "m").label, Label::Clean);
    }

    #[test]
    fn fixture_model_labels() {
        let pred = Predictor::fixture();
        assert_eq!(pred.predict_text("vkl.").unwrap().label, Label::Offensive);
        assert_eq!(pred.predict_text("Bài hát hayyy, cảm ơn bạn").unwrap().label, Label::Clean);
        assert_eq!(pred.predict_text("lũ ba que cút khỏi việt nam").unwrap().label, Label::Hate);
        let p = pred.predict_text("").unwrap();
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mnb_classifier_path() {
        let corpus = [words("hay quá"), words("ngu vl"), words("bọn súc_vật")];
        let labels = [Label::Clean, Label::Offensive, Label::Hate];
        let model = BaselineModel::fit(&corpus, &labels, 1.0).unwrap();
        let pred = Predictor::new(Preprocessor::bundled(), MnbClassifier::new(model));
        assert_eq!(pred.predict_text("HAY QUÁÁÁ").unwrap().label, Label::Clean);
        assert!(pred.model_version().starts_with("mnb-"));
    }
}
