//! Evaluation mathematics: confusion matrices, precision/recall/F1,
//! risk-coverage curves with AURC, and corpus BLEU.
//!
//! Any 0/0 in precision, recall or F1 is defined as 0. AURC is the discrete
//! mean risk over all `n` coverage points, reported on a 0-100 scale. BLEU is
//! corpus-level BLEU-4 with uniform weights and no smoothing, on lowercased
//! whitespace tokens, also on a 0-100 scale.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize_whitespace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{0} golds but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("label {0:?} is not one of the classes")]
    UnknownLabel(String),
    #[error("no instances to evaluate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// Rows are gold classes, columns predicted classes.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.classes.iter().map(String::len).max().unwrap_or(4).max(9);
        write!(f, "{:<width$}", "gold\\pred")?;
        for c in &self.classes {
            write!(f, " {c:>width$}")?;
        }
        for (c, row) in self.classes.iter().zip(&self.counts) {
            write!(f, "\n{c:<width$}")?;
            for n in row {
                write!(f, " {n:>width$}")?;
            }
        }
        Ok(())
    }
}

pub fn confusion<G: AsRef<str>, P: AsRef<str>>(
    golds: &[G],
    preds: &[P],
    classes: &[String],
) -> Result<ConfusionMatrix, MetricsError> {
    if golds.len() != preds.len() {
        return Err(MetricsError::LengthMismatch(golds.len(), preds.len()));
    }
    let index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let lookup = |label: &str| {
        index
            .get(label)
            .copied()
            .ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
    };
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (g, p) in golds.iter().zip(preds) {
        counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of class index `c`.
pub fn prf1(matrix: &ConfusionMatrix, c: usize) -> Prf1 {
    let tp = matrix.counts[c][c];
    let predicted: u64 = matrix.counts.iter().map(|row| row[c]).sum();
    let gold: u64 = matrix.counts[c].iter().sum();
    let precision = ratio(tp, predicted);
    let recall = ratio(tp, gold);
    Prf1 {
        precision,
        recall,
        f1: f1_of(precision, recall),
    }
}

pub fn prf1_of(matrix: &ConfusionMatrix, class: &str) -> Option<Prf1> {
    matrix.index_of(class).map(|c| prf1(matrix, c))
}

/// F1 from true/false positives and false negatives pooled over classes.
pub fn micro_f1(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let tp = matrix.correct();
    // single-label: every error is one false positive and one false negative
    let fp = total - tp;
    let fn_ = total - tp;
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    Ok(f1_of(p, r))
}

/// Unweighted mean of per-class F1 over every class in the matrix.
pub fn macro_f1(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if matrix.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let k = matrix.classes.len();
    Ok((0..k).map(|c| prf1(matrix, c).f1).sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCoveragePoint {
    pub coverage: f64,
    pub risk: f64,
}

/// Rank by confidence (descending, stable on ties) and report the error rate
/// among the top `k` for every `k` in `1..=n`.
pub fn risk_coverage(confidences: &[f64], correct: &[bool]) -> Result<Vec<RiskCoveragePoint>, MetricsError> {
    if confidences.len() != correct.len() {
        return Err(MetricsError::LengthMismatch(confidences.len(), correct.len()));
    }
    if confidences.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));
    let n = order.len() as f64;
    let mut wrong = 0usize;
    Ok(order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            if !correct[i] {
                wrong += 1;
            }
            let k = (rank + 1) as f64;
            RiskCoveragePoint {
                coverage: k / n,
                risk: wrong as f64 / k,
            }
        })
        .collect())
}

/// `100 × mean(risk)` over the curve points.
pub fn aurc(curve: &[RiskCoveragePoint]) -> Result<f64, MetricsError> {
    if curve.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * curve.iter().map(|p| p.risk).sum::<f64>() / curve.len() as f64)
}

fn bleu_tokens(text: &str) -> Vec<String> {
    tokenize_whitespace(text)
        .into_iter()
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
    counts
}

/// Corpus BLEU-4 on a 0-100 scale.
pub fn bleu<C: AsRef<str>, R: AsRef<str>>(candidates: &[C], references: &[R]) -> Result<f64, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch(candidates.len(), references.len()));
    }
    if candidates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut matched = [0u64; 4];
    let mut possible = [0u64; 4];
    let (mut cand_len, mut ref_len) = (0u64, 0u64);
    for (c, r) in candidates.iter().zip(references) {
        let ct = bleu_tokens(c.as_ref());
        let rt = bleu_tokens(r.as_ref());
        cand_len += ct.len() as u64;
        ref_len += rt.len() as u64;
        for n in 1..=4 {
            let rc = ngram_counts(&rt, n);
            for (gram, count) in ngram_counts(&ct, n) {
                matched[n - 1] += count.min(rc.get(gram).copied().unwrap_or(0)) as u64;
            }
            possible[n - 1] += ct.len().saturating_sub(n - 1) as u64;
        }
    }
    if matched.iter().any(|m| *m == 0) {
        return Ok(0.0);
    }
    let log_mean = (0..4)
        .map(|i| (matched[i] as f64 / possible[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * bp * log_mean.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: u64,
    pub per_class: BTreeMap<String, Prf1>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    /// Precision/recall/F1 of the positive class when one is designated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<PositiveClassScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aurc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<RiskCoveragePoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveClassScores {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Build a report from gold/predicted labels and optional confidences.
pub fn evaluate<G: AsRef<str>, P: AsRef<str>>(
    golds: &[G],
    preds: &[P],
    classes: &[String],
    confidences: Option<&[f64]>,
    positive_class: Option<&str>,
) -> Result<EvalReport, MetricsError> {
    let matrix = confusion(golds, preds, classes)?;
    let micro = micro_f1(&matrix)?;
    let macro_ = macro_f1(&matrix)?;
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), prf1(&matrix, i)))
        .collect();
    let positive = match positive_class {
        Some(c) => {
            let s = prf1_of(&matrix, c).ok_or_else(|| MetricsError::UnknownLabel(c.to_string()))?;
            Some(PositiveClassScores {
                class: c.to_string(),
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
            })
        }
        None => None,
    };
    let (aurc_value, curve) = match confidences {
        Some(conf) => {
            let correct: Vec<bool> = golds
                .iter()
                .zip(preds)
                .map(|(g, p)| g.as_ref() == p.as_ref())
                .collect();
            let curve = risk_coverage(conf, &correct)?;
            (Some(aurc(&curve)?), Some(curve))
        }
        None => (None, None),
    };
    Ok(EvalReport {
        instances: matrix.total(),
        per_class,
        micro_f1: micro,
        macro_f1: macro_,
        confusion: matrix,
        positive,
        aurc: aurc_value,
        curve,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances {}", self.instances)?;
        writeln!(f, "{:<14} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1")?;
        for (c, s) in &self.per_class {
            writeln!(
                f,
                "{c:<14} {:>9.1} {:>9.1} {:>9.1}",
                100.0 * s.precision,
                100.0 * s.recall,
                100.0 * s.f1
            )?;
        }
        writeln!(f, "micro F1 {:.1}  macro F1 {:.1}", 100.0 * self.micro_f1, 100.0 * self.macro_f1)?;
        if let Some(p) = &self.positive {
            writeln!(f, "{:<10} {:>6} {:>6} {:>9} {:>6}", "positive", "AURC", "F1", "Precision", "Recall")?;
            let aurc = self.aurc.map_or("-".to_string(), |a| format!("{a:.1}"));
            writeln!(
                f,
                "{:<10} {:>6} {:>6.1} {:>9.1} {:>6.1}",
                p.class,
                aurc,
                100.0 * p.f1,
                100.0 * p.precision,
                100.0 * p.recall
            )?;
        } else if let Some(a) = self.aurc {
            writeln!(f, "AURC {a:.1}")?;
        }
        write!(f, "{}", self.confusion)
    }
}

/// One line of an externally produced prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: String,
    pub predicted: String,
    pub confidence: Option<f64>,
}
