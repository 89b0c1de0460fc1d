//! Experiment protocols: cross-dataset evaluation, ablation by source, the
//! out-of-domain back-translation set and selective-prediction scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{split_records, DatasetRecord, Split};
use crate::detector::{technology_classes, Detector, DetectorError, FeaturizerConfig, TrainConfig};
use crate::metrics::{evaluate, EvalReport, MetricsError, PredictionRecord};
use crate::rng::{derive_seed, sha256_hex};
use crate::synth::{translate_text, AdapterHandle, SynthError};
use crate::taxonomy::{BinaryLabel, LabelPath, TechnologyType};

pub use crate::mockdata::BilingualPair;

/// Binary positive class in every Table-3-style report.
pub const POSITIVE_CLASS: &str = "machine";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset {dataset:?} has no {split} split")]
    MissingSplit { dataset: String, split: Split },
    #[error("pair {pair}: {error}")]
    Translation { pair: String, error: SynthError },
    #[error("record {id}: {message}")]
    Scoring { id: String, message: String },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn binary_classes() -> Vec<String> {
    BinaryLabel::ALL.iter().map(|b| b.to_string()).collect()
}

fn train_detector(
    train: &[DatasetRecord],
    fcfg: &FeaturizerConfig,
    tcfg: &TrainConfig,
    seed: u64,
    row: &str,
) -> Result<Detector, DetectorError> {
    let texts: Vec<&str> = train.iter().map(|r| r.text.as_str()).collect();
    let labels: Vec<String> = train.iter().map(|r| r.label.tech.to_string()).collect();
    let cfg = TrainConfig {
        seed: derive_seed(seed, &["row", row]),
        ..tcfg.clone()
    };
    Ok(Detector::train(&texts, &labels, &technology_classes(), fcfg, &cfg)?.0)
}

/// Human/machine prediction and confidence from a four-class detector:
/// `P(human) = P(real)`, `P(machine) = 1 − P(real)`.
pub fn binary_prediction(detector: &Detector, text: &str) -> (BinaryLabel, f64) {
    let pred = detector.predict_text(text);
    let real = detector
        .classifier
        .classes
        .iter()
        .position(|c| c == TechnologyType::Real.as_str())
        .map_or(0.0, |i| pred.probabilities[i]);
    if real >= 0.5 {
        (BinaryLabel::Human, real)
    } else {
        (BinaryLabel::Machine, 1.0 - real)
    }
}

fn binary_f1(detector: &Detector, records: &[DatasetRecord]) -> Result<f64, ExperimentError> {
    let golds: Vec<&str> = records.iter().map(|r| r.label.binary().as_str()).collect();
    let preds: Vec<&str> = records
        .par_iter()
        .map(|r| binary_prediction(detector, &r.text).0.as_str())
        .collect();
    let report = evaluate(&golds, &preds, &binary_classes(), None, Some(POSITIVE_CLASS))?;
    Ok(report.positive.expect("positive class requested").f1)
}

fn subset_hash(records: &[DatasetRecord]) -> String {
    let mut bytes = Vec::new();
    for r in records {
        bytes.extend(serde_json::to_vec(r).expect("record serializes"));
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// Model names; each yields one row trained without that model's records.
    pub held_out_sources: Vec<String>,
    /// Model names whose test records are scored; empty means every
    /// synthetic model in the test split.
    #[serde(default)]
    pub evaluation_subsets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub held_out: Vec<String>,
    pub train_size: usize,
    /// Binary machine-vs-rest F1 per evaluation subset.
    pub f1: BTreeMap<String, f64>,
    pub average: f64,
    /// SHA-256 of each evaluation subset as scored by this row.
    pub subset_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub metric: String,
    pub evaluation_subsets: Vec<String>,
    pub rows: Vec<AblationRow>,
}

fn row_name(held_out: &[String]) -> String {
    if held_out.is_empty() {
        "all".to_string()
    } else {
        let set: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
        set.into_iter().map(|m| format!("-{m}")).collect::<Vec<_>>().join(",")
    }
}

/// Train without the records of `held_out` models and score the
/// evaluation subsets of the untouched test split.
pub fn ablation_row(
    dataset: &[DatasetRecord],
    held_out: &[String],
    subsets: &[String],
    fcfg: &FeaturizerConfig,
    tcfg: &TrainConfig,
) -> Result<AblationRow, ExperimentError> {
    let name = row_name(held_out);
    let dropped: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
    let train: Vec<DatasetRecord> = split_records(dataset, Split::Train)
        .into_iter()
        .filter(|r| !dropped.contains(r.source_model()))
        .collect();
    let test = split_records(dataset, Split::Test);
    let detector = train_detector(&train, fcfg, tcfg, tcfg.seed, &name)?;
    let mut f1 = BTreeMap::new();
    let mut subset_hashes = BTreeMap::new();
    for model in subsets {
        let subset: Vec<DatasetRecord> = test.iter().filter(|r| &r.label.model == model).cloned().collect();
        subset_hashes.insert(model.clone(), subset_hash(&subset));
        f1.insert(model.clone(), binary_f1(&detector, &subset)?);
    }
    let average = if f1.is_empty() {
        0.0
    } else {
        f1.values().sum::<f64>() / f1.len() as f64
    };
    let mut held: Vec<String> = dropped.into_iter().map(str::to_string).collect();
    held.sort();
    Ok(AblationRow {
        name,
        held_out: held,
        train_size: train.len(),
        f1,
        average,
        subset_hashes,
    })
}

/// The full-training row followed by one row per held-out source. Rows are
/// trained independently and may run in parallel.
pub fn run_ablation(
    dataset: &[DatasetRecord],
    spec: &AblationSpec,
    fcfg: &FeaturizerConfig,
    tcfg: &TrainConfig,
) -> Result<AblationReport, ExperimentError> {
    let models: BTreeSet<&str> = dataset.iter().map(|r| r.source_model()).collect();
    for name in spec.held_out_sources.iter().chain(&spec.evaluation_subsets) {
        if !models.contains(name.as_str()) {
            return Err(ExperimentError::Config(format!(
                "source model {name:?} does not occur in the dataset"
            )));
        }
    }
    let subsets: Vec<String> = if spec.evaluation_subsets.is_empty() {
        split_records(dataset, Split::Test)
            .iter()
            .filter(|r| !r.label.is_real())
            .map(|r| r.label.model.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        spec.evaluation_subsets.clone()
    };
    let configs: Vec<Vec<String>> = std::iter::once(Vec::new())
        .chain(spec.held_out_sources.iter().map(|m| vec![m.clone()]))
        .collect();
    let rows = configs
        .par_iter()
        .map(|held| ablation_row(dataset, held, &subsets, fcfg, tcfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AblationReport {
        metric: "binary machine-vs-rest F1 on each source's test records".to_string(),
        evaluation_subsets: subsets,
        rows,
    })
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<usize> = self.evaluation_subsets.iter().map(|s| s.len().max(5)).collect();
        let first = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
        write!(f, "{:<first$}", "training")?;
        for (s, w) in self.evaluation_subsets.iter().zip(&widths) {
            write!(f, " {s:>w$}")?;
        }
        writeln!(f, " {:>5}", "avg")?;
        for row in &self.rows {
            write!(f, "{:<first$}", row.name)?;
            for (s, w) in self.evaluation_subsets.iter().zip(&widths) {
                write!(f, " {:>w$.1}", 100.0 * row.f1[s])?;
            }
            writeln!(f, " {:>5.1}", 100.0 * row.average)?;
        }
        write!(f, "metric: {}", self.metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalCell {
    pub train_dataset: String,
    pub eval_dataset: String,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalReport {
    pub datasets: Vec<String>,
    pub cells: Vec<CrossEvalCell>,
}

impl CrossEvalReport {
    pub fn cell(&self, train: &str, eval: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.train_dataset == train && c.eval_dataset == eval)
            .map(|c| c.f1)
    }
}

/// Train on each dataset's train split and score binary F1 on every
/// dataset's test split.
pub fn run_cross_eval(
    datasets: &[(String, Vec<DatasetRecord>)],
    fcfg: &FeaturizerConfig,
    tcfg: &TrainConfig,
) -> Result<CrossEvalReport, ExperimentError> {
    let mut splits = Vec::with_capacity(datasets.len());
    for (name, records) in datasets {
        let train = split_records(records, Split::Train);
        let test = split_records(records, Split::Test);
        for (split, part) in [(Split::Train, &train), (Split::Test, &test)] {
            if part.is_empty() {
                return Err(ExperimentError::MissingSplit {
                    dataset: name.clone(),
                    split,
                });
            }
        }
        splits.push((name.clone(), train, test));
    }
    let detectors = splits
        .par_iter()
        .map(|(name, train, _)| train_detector(train, fcfg, tcfg, tcfg.seed, &format!("train:{name}")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for ((train_name, _, _), detector) in splits.iter().zip(&detectors) {
        for (eval_name, _, test) in &splits {
            cells.push(CrossEvalCell {
                train_dataset: train_name.clone(),
                eval_dataset: eval_name.clone(),
                f1: binary_f1(detector, test)?,
            });
        }
    }
    Ok(CrossEvalReport {
        datasets: splits.into_iter().map(|s| s.0).collect(),
        cells,
    })
}

impl fmt::Display for CrossEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.datasets.iter().map(String::len).max().unwrap_or(0).max(8);
        write!(f, "{:<width$}", "train\\eval")?;
        for d in &self.datasets {
            write!(f, " {d:>width$}")?;
        }
        let trained = self
            .datasets
            .iter()
            .filter(|d| self.cells.iter().any(|c| &c.train_dataset == *d));
        for train in trained {
            write!(f, "\n{train:<width$}")?;
            for eval in &self.datasets {
                match self.cell(train, eval) {
                    Some(v) => write!(f, " {:>width$.1}", 100.0 * v)?,
                    None => write!(f, " {:>width$}", "-")?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodSet {
    pub records: Vec<DatasetRecord>,
    /// Corpus BLEU of the translations against their aligned references.
    pub bleu: f64,
    pub translator: String,
}

/// Human side `text_a` labeled real; `text_b` translated into language A
/// labeled with the translator's family and model. All records land in the
/// test split.
pub fn build_ood_set(pairs: &[BilingualPair], translator: &AdapterHandle) -> Result<OodSet, ExperimentError> {
    let ep = &translator.endpoint;
    if ep.kind != TechnologyType::Translate {
        return Err(ExperimentError::Config(format!("endpoint {} is not a translate endpoint", ep.id)));
    }
    for p in pairs {
        let pivot_ok = ep.pivot_language.as_deref().is_none_or(|l| l == p.lang_b);
        if ep.source_language != p.lang_a || !pivot_ok {
            return Err(ExperimentError::Config(format!(
                "pair {} is {}/{} but endpoint {} translates {}/{}",
                p.id,
                p.lang_a,
                p.lang_b,
                ep.id,
                ep.source_language,
                ep.pivot_language.as_deref().unwrap_or("?")
            )));
        }
        if p.text_a.trim().is_empty() || p.text_b.trim().is_empty() {
            return Err(ExperimentError::Config(format!("pair {} has an empty side", p.id)));
        }
    }
    let machine = LabelPath::new(TechnologyType::Translate, &ep.family, &ep.model_name)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let translations = pairs
        .par_iter()
        .map(|p| {
            translate_text(translator, &p.text_b, &p.lang_b, &p.lang_a).map_err(|error| {
                ExperimentError::Translation {
                    pair: p.id.clone(),
                    error,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let references: Vec<&str> = pairs.iter().map(|p| p.text_a.as_str()).collect();
    let bleu = if pairs.is_empty() {
        0.0
    } else {
        crate::metrics::bleu(&translations, &references)?
    };
    let mut records = Vec::with_capacity(2 * pairs.len());
    for (p, translated) in pairs.iter().zip(translations) {
        records.push(DatasetRecord {
            id: format!("{}:a", p.id),
            text: p.text_a.clone(),
            label: LabelPath::real(),
            split: Some(Split::Test),
            provenance: BTreeMap::from([
                ("pair_id".to_string(), p.id.clone()),
                ("language".to_string(), p.lang_a.clone()),
            ]),
        });
        records.push(DatasetRecord {
            id: format!("{}:b", p.id),
            text: translated,
            label: machine.clone(),
            split: Some(Split::Test),
            provenance: BTreeMap::from([
                ("pair_id".to_string(), p.id.clone()),
                ("source_language".to_string(), p.lang_b.clone()),
                ("source_text".to_string(), p.text_b.clone()),
                ("adapter".to_string(), ep.id.clone()),
            ]),
        });
    }
    Ok(OodSet {
        records,
        bleu,
        translator: ep.id.clone(),
    })
}

/// What produces the scores in [`evaluate_selective`].
pub enum Scorer<'a> {
    Detector(&'a Detector),
    /// Externally produced predictions, joined to records by id.
    Predictions(&'a [PredictionRecord]),
}

/// Binary (machine = positive) report with AURC and the risk-coverage curve.
pub fn evaluate_selective(scorer: Scorer<'_>, records: &[DatasetRecord]) -> Result<EvalReport, ExperimentError> {
    let golds: Vec<&str> = records.iter().map(|r| r.label.binary().as_str()).collect();
    let scored: Vec<(BinaryLabel, f64)> = match scorer {
        Scorer::Detector(d) => records.par_iter().map(|r| binary_prediction(d, &r.text)).collect(),
        Scorer::Predictions(preds) => {
            let by_id: HashMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
            records
                .iter()
                .map(|r| {
                    let err = |message: String| ExperimentError::Scoring {
                        id: r.id.clone(),
                        message,
                    };
                    let p = by_id.get(r.id.as_str()).ok_or_else(|| err("no prediction".into()))?;
                    let confidence = p.confidence.ok_or_else(|| err("missing confidence".into()))?;
                    if !confidence.is_finite() {
                        return Err(err(format!("confidence {confidence} is not finite")));
                    }
                    let label: BinaryLabel = p.predicted.parse().map_err(|e| err(format!("{e}")))?;
                    Ok((label, confidence))
                })
                .collect::<Result<_, _>>()?
        }
    };
    let preds: Vec<&str> = scored.iter().map(|(l, _)| l.as_str()).collect();
    let confidences: Vec<f64> = scored.iter().map(|(_, c)| *c).collect();
    Ok(evaluate(&golds, &preds, &binary_classes(), Some(&confidences), Some(POSITIVE_CLASS))?)
}

/// Detector predictions in the prediction-file format.
pub fn detector_predictions(detector: &Detector, records: &[DatasetRecord]) -> Vec<PredictionRecord> {
    records
        .par_iter()
        .map(|r| {
            let p = detector.predict_text(&r.text);
            PredictionRecord {
                id: r.id.clone(),
                gold: r.label.tech.to_string(),
                predicted: p.label,
                confidence: Some(p.confidence),
            }
        })
        .collect()
}
