//! TF-IDF featurizer and multinomial logistic regression detector.
//!
//! Features are word n-grams over lowercased whitespace tokens with leading
//! and trailing punctuation stripped. Term weights use
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1` and every vector is L2-normalized.
//! The classifier minimizes
//! `(1/N) Σ CE(softmax(W x + b), y) + (λ/2) ‖W‖²` by mini-batch gradient
//! descent; the bias is not penalized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{strip_punctuation, tokenize_whitespace};
use crate::rng::derive_rng;
use crate::taxonomy::TechnologyType;

pub const MODEL_FORMAT: &str = "synthdetect-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot fit a featurizer on an empty corpus")]
    EmptyCorpus,
    #[error("training needs at least 2 distinct classes, found {0}")]
    SingleClass(usize),
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {0:?} is not one of the classifier classes")]
    UnknownClass(String),
    #[error("feature dimension {found} does not match classifier dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch} (loss {loss}); try a learning rate below {learning_rate}")]
    Diverged {
        epoch: usize,
        loss: f64,
        learning_rate: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt model file: {message}")]
    Corrupt { path: String, message: String },
    #[error("{path}: unsupported model format {format:?} version {version}; this build reads {MODEL_FORMAT:?} version {MODEL_VERSION}")]
    Version {
        path: String,
        format: String,
        version: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    #[serde(default = "one")]
    pub ngram_min: usize,
    #[serde(default = "two")]
    pub ngram_max: usize,
    #[serde(default = "two")]
    pub min_document_frequency: usize,
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default)]
    pub max_features: Option<usize>,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            ngram_min: 1,
            ngram_max: 2,
            min_document_frequency: 2,
            lowercase: true,
            max_features: None,
        }
    }
}

impl FeaturizerConfig {
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            out.push((
                "ngram_min".to_string(),
                format!(
                    "must satisfy 1 <= ngram_min <= ngram_max, got {}..{}",
                    self.ngram_min, self.ngram_max
                ),
            ));
        }
        if self.min_document_frequency < 1 {
            out.push(("min_document_frequency".to_string(), "must be at least 1".to_string()));
        }
        if self.max_features == Some(0) {
            out.push(("max_features".to_string(), "must be positive when set".to_string()));
        }
        out
    }

    fn check(&self) -> Result<(), DetectorError> {
        match self.problems().into_iter().next() {
            Some((field, msg)) => Err(DetectorError::Config(format!("{field}: {msg}"))),
            None => Ok(()),
        }
    }
}

/// Tokens used by the featurizer.
pub fn feature_tokens(text: &str, lowercase: bool) -> Vec<String> {
    tokenize_whitespace(text)
        .into_iter()
        .map(strip_punctuation)
        .filter(|t| !t.is_empty())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

fn ngrams(tokens: &[String], min: usize, max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in min..=max {
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Sparse vector with entries sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    fn dot(&self, row: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| row[i] * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    pub vocabulary: HashMap<String, usize>,
    pub idf: Vec<f64>,
    pub config: FeaturizerConfig,
    pub corpus_size: usize,
}

/// Fit vocabulary and idf weights. Vocabulary indices follow lexicographic
/// term order, so the model does not depend on the order of `texts`.
pub fn fit_tfidf<S: AsRef<str> + Sync>(
    texts: &[S],
    config: &FeaturizerConfig,
) -> Result<TfidfModel, DetectorError> {
    config.check()?;
    if texts.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    let df: HashMap<String, usize> = texts
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, usize>, text| {
            let tokens = feature_tokens(text.as_ref(), config.lowercase);
            let unique: HashSet<String> = ngrams(&tokens, config.ngram_min, config.ngram_max)
                .into_iter()
                .collect();
            for term in unique {
                *acc.entry(term).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut kept: Vec<(String, usize)> = df
        .into_iter()
        .filter(|(_, d)| *d >= config.min_document_frequency)
        .collect();
    if let Some(cap) = config.max_features {
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(cap);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    let n = texts.len() as f64;
    let idf = kept
        .iter()
        .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    let vocabulary = kept
        .into_iter()
        .enumerate()
        .map(|(i, (term, _))| (term, i))
        .collect();
    Ok(TfidfModel {
        vocabulary,
        idf,
        config: config.clone(),
        corpus_size: texts.len(),
    })
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Term frequency times idf over in-vocabulary n-grams, L2-normalized.
    pub fn transform(&self, text: &str) -> SparseVector {
        let tokens = feature_tokens(text, self.config.lowercase);
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for term in ngrams(&tokens, self.config.ngram_min, self.config.ngram_max) {
            if let Some(&i) = self.vocabulary.get(&term) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector {
            dim: self.dim(),
            entries,
        }
    }

    pub fn transform_all<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<SparseVector> {
        texts.par_iter().map(|t| self.transform(t.as_ref())).collect()
    }

    /// Terms in index order.
    pub fn terms(&self) -> Vec<String> {
        let mut terms = vec![String::new(); self.dim()];
        for (t, &i) in &self.vocabulary {
            terms[i] = t.clone();
        }
        terms
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    MultinomialCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2_penalty: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
}

fn default_epochs() -> usize {
    20
}

fn default_lr() -> f64 {
    0.5
}

fn default_l2() -> f64 {
    1e-4
}

fn default_batch() -> usize {
    64
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            l2_penalty: default_l2(),
            batch_size: default_batch(),
            seed: 0,
            loss: Loss::MultinomialCrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.epochs < 1 {
            out.push(("epochs".to_string(), "must be at least 1".to_string()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            out.push(("learning_rate".to_string(), format!("must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2_penalty >= 0.0) || !self.l2_penalty.is_finite() {
            out.push(("l2_penalty".to_string(), format!("must be non-negative, got {}", self.l2_penalty)));
        }
        if self.batch_size < 1 {
            out.push(("batch_size".to_string(), "must be at least 1".to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub classes: Vec<String>,
    pub dim: usize,
    /// One row per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full regularized objective after each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub confidence: f64,
    pub probabilities: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn logits(weights: &[Vec<f64>], bias: &[f64], x: &SparseVector) -> Vec<f64> {
    weights
        .iter()
        .zip(bias)
        .map(|(row, b)| x.dot(row) + b)
        .collect()
}

/// Regularized objective and its gradient over the given samples.
///
/// Returns `(loss, grad_weights, grad_bias)` with
/// `loss = (1/N) Σ CE + (λ/2) ‖W‖²`, `∂W = (1/N) Σ (p − y) xᵀ + λ W` and
/// `∂b = (1/N) Σ (p − y)`.
pub fn loss_and_gradient(
    weights: &[Vec<f64>],
    bias: &[f64],
    features: &[&SparseVector],
    labels: &[usize],
    l2_penalty: f64,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let k = weights.len();
    let dim = weights.first().map_or(0, Vec::len);
    let n = features.len().max(1) as f64;
    let mut grad_w = vec![vec![0.0; dim]; k];
    let mut grad_b = vec![0.0; k];
    let mut ce = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let p = softmax(&logits(weights, bias, x));
        ce -= p[y].max(f64::MIN_POSITIVE).ln();
        for c in 0..k {
            let delta = (p[c] - if c == y { 1.0 } else { 0.0 }) / n;
            grad_b[c] += delta;
            for &(i, v) in &x.entries {
                grad_w[c][i] += delta * v;
            }
        }
    }
    let mut sq = 0.0;
    for (gw, w) in grad_w.iter_mut().zip(weights) {
        for (g, wi) in gw.iter_mut().zip(w) {
            *g += l2_penalty * wi;
            sq += wi * wi;
        }
    }
    (ce / n + 0.5 * l2_penalty * sq, grad_w, grad_b)
}

fn objective(clf: &LinearClassifier, features: &[SparseVector], labels: &[usize]) -> f64 {
    let ce: f64 = features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| {
            let p = softmax(&logits(&clf.weights, &clf.bias, x));
            -p[y].max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    let sq: f64 = clf.weights.iter().flatten().map(|w| w * w).sum();
    ce / features.len() as f64 + 0.5 * clf.train_config.l2_penalty * sq
}

/// Mini-batch gradient descent from zero weights. The sample order of each
/// epoch is shuffled with a stream keyed on (seed, epoch), so identical
/// inputs give identical weights.
pub fn train_classifier(
    features: &[SparseVector],
    labels: &[String],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<(LinearClassifier, TrainReport), DetectorError> {
    if let Some((field, msg)) = cfg.problems().into_iter().next() {
        return Err(DetectorError::Config(format!("{field}: {msg}")));
    }
    if features.len() != labels.len() {
        return Err(DetectorError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| {
            class_index
                .get(l.as_str())
                .copied()
                .ok_or_else(|| DetectorError::UnknownClass(l.clone()))
        })
        .collect::<Result<_, _>>()?;
    let distinct: HashSet<usize> = targets.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(DetectorError::SingleClass(distinct.len()));
    }
    let dim = features[0].dim;
    if let Some(bad) = features.iter().find(|x| x.dim != dim) {
        return Err(DetectorError::Dimension {
            expected: dim,
            found: bad.dim,
        });
    }

    let k = classes.len();
    let mut clf = LinearClassifier {
        classes: classes.to_vec(),
        dim,
        weights: vec![vec![0.0; dim]; k],
        bias: vec![0.0; k],
        train_config: cfg.clone(),
    };
    let lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = derive_rng(cfg.seed, &["epoch", &epoch.to_string()]);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&SparseVector> = batch.iter().map(|&i| &features[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (_, gw, gb) = loss_and_gradient(&clf.weights, &clf.bias, &xs, &ys, cfg.l2_penalty);
            for (w, g) in clf.weights.iter_mut().zip(&gw) {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= lr * gi;
                }
            }
            for (b, g) in clf.bias.iter_mut().zip(&gb) {
                *b -= lr * g;
            }
        }
        let loss = objective(&clf, features, &targets);
        if !loss.is_finite() {
            return Err(DetectorError::Diverged {
                epoch: epoch + 1,
                loss,
                learning_rate: lr,
            });
        }
        log::debug!("epoch {} loss {loss:.6}", epoch + 1);
        epoch_losses.push(loss);
    }
    let final_loss = *epoch_losses.last().expect("epochs >= 1");
    Ok((
        clf,
        TrainReport {
            epoch_losses,
            final_loss,
        },
    ))
}

pub fn predict(clf: &LinearClassifier, x: &SparseVector) -> Result<Prediction, DetectorError> {
    if x.dim != clf.dim {
        return Err(DetectorError::Dimension {
            expected: clf.dim,
            found: x.dim,
        });
    }
    let probabilities = softmax(&logits(&clf.weights, &clf.bias, x));
    let best = argmax(&probabilities);
    Ok(Prediction {
        label: clf.classes[best].clone(),
        confidence: probabilities[best],
        probabilities,
    })
}

/// The four technology-type class names in declaration order.
pub fn technology_classes() -> Vec<String> {
    TechnologyType::ALL.iter().map(|t| t.to_string()).collect()
}

/// Featurizer plus classifier; the unit saved to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub featurizer: TfidfModel,
    pub classifier: LinearClassifier,
}

impl Detector {
    pub fn train<S: AsRef<str> + Sync>(
        texts: &[S],
        labels: &[String],
        classes: &[String],
        featurizer: &FeaturizerConfig,
        train: &TrainConfig,
    ) -> Result<(Self, TrainReport), DetectorError> {
        let tfidf = fit_tfidf(texts, featurizer)?;
        let features = tfidf.transform_all(texts);
        let (classifier, report) = train_classifier(&features, labels, classes, train)?;
        Ok((
            Self {
                featurizer: tfidf,
                classifier,
            },
            report,
        ))
    }

    pub fn predict_text(&self, text: &str) -> Prediction {
        predict(&self.classifier, &self.featurizer.transform(text))
            .expect("featurizer and classifier share a dimension")
    }

    pub fn predict_all<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<Prediction> {
        texts.par_iter().map(|t| self.predict_text(t.as_ref())).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        let io = |source| DetectorError::Io {
            path: path.display().to_string(),
            source,
        };
        let bundle = ModelBundle {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            featurizer: FeaturizerFile {
                config: self.featurizer.config.clone(),
                corpus_size: self.featurizer.corpus_size,
                vocabulary: self.featurizer.terms(),
                idf: self.featurizer.idf.clone(),
            },
            classifier: self.classifier.clone(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let json = serde_json::to_string(&bundle).expect("model bundle serializes");
        std::fs::write(path, json).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let display = path.display().to_string();
        let raw = std::fs::read_to_string(path).map_err(|source| DetectorError::Io {
            path: display.clone(),
            source,
        })?;
        let corrupt = |message: String| DetectorError::Corrupt {
            path: display.clone(),
            message,
        };
        let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| corrupt(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != MODEL_FORMAT || version != MODEL_VERSION as u64 {
            return Err(DetectorError::Version {
                path: display,
                format: format.to_string(),
                version,
            });
        }
        let bundle: ModelBundle = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        let f = bundle.featurizer;
        let c = bundle.classifier;
        let dim = f.vocabulary.len();
        if f.idf.len() != dim
            || c.dim != dim
            || c.weights.len() != c.classes.len()
            || c.bias.len() != c.classes.len()
            || c.weights.iter().any(|row| row.len() != dim)
        {
            return Err(corrupt("inconsistent dimensions".to_string()));
        }
        if f.idf.iter().any(|v| !(*v > 0.0)) {
            return Err(corrupt("idf values must be positive".to_string()));
        }
        let vocabulary: HashMap<String, usize> = f
            .vocabulary
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        if vocabulary.len() != dim {
            return Err(corrupt("duplicate vocabulary terms".to_string()));
        }
        Ok(Self {
            featurizer: TfidfModel {
                vocabulary,
                idf: f.idf,
                config: f.config,
                corpus_size: f.corpus_size,
            },
            classifier: c,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FeaturizerFile {
    config: FeaturizerConfig,
    corpus_size: usize,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelBundle {
    format: String,
    version: u32,
    featurizer: FeaturizerFile,
    classifier: LinearClassifier,
}
