//! Source documents and passage sampling.
//!
//! Documents arrive as JSON Lines, are whitespace-normalized, segmented into
//! sentences with a rule-based splitter and sampled into short contiguous
//! passages of 2 to 10 sentences.

use std::collections::HashSet;
use std::io::BufRead;
use std::sync::LazyLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_rng, SeededRng};

const ABBREVIATION_DATA: &str = include_str!("../data/abbreviations.txt");

/// Version of the shipped abbreviation list, read from its `# version:` line.
pub static ABBREVIATION_LIST_VERSION: LazyLock<u32> = LazyLock::new(|| {
    ABBREVIATION_DATA
        .lines()
        .find_map(|l| l.strip_prefix("# version:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
});

static ABBREVIATIONS: LazyLock<HashSet<String>> = LazyLock::new(|| {
    ABBREVIATION_DATA
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
});

pub const DEFAULT_MIN_SENTENCES: usize = 2;
pub const DEFAULT_MAX_SENTENCES: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document {doc_id} has {sentences} sentence(s), fewer than the required {min}")]
    TooShort {
        doc_id: String,
        sentences: usize,
        min: usize,
    },
    #[error("invalid sentence bounds: min {min}, max {max}")]
    InvalidBounds { min: usize, max: usize },
    #[error("no document in the corpus has at least {min} sentences")]
    NoEligibleDocuments { min: usize },
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// A source full-text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub source_collection: String,
    pub language: String,
}

/// A contiguous run of sentences sampled from one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub sentence_count: usize,
    pub token_count: usize,
}

impl Passage {
    pub fn sentences(&self) -> Vec<String> {
        segment_sentences(&self.text)
    }

    pub fn first_sentence(&self) -> Option<String> {
        self.sentences().into_iter().next()
    }
}

/// A corpus line that could not be turned into a [`Document`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub documents: Vec<Document>,
    pub errors: Vec<RecordError>,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    text: String,
    #[serde(default)]
    source_collection: Option<String>,
    #[serde(default)]
    language: Option<String>,
}

/// Read a JSON Lines corpus.
///
/// Malformed records are reported with their 1-based line number and skipped;
/// only a failing reader aborts ingestion. `collection_tag` fills in
/// `source_collection` where a record does not carry one.
pub fn ingest_corpus<R: BufRead>(
    source: R,
    collection_tag: &str,
) -> Result<IngestOutcome, CorpusError> {
    let mut outcome = IngestOutcome::default();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(err) => {
                outcome.errors.push(RecordError {
                    line: line_no,
                    message: err.to_string(),
                });
                continue;
            }
        };
        let text = normalize_whitespace(&raw.text);
        if text.is_empty() {
            outcome.errors.push(RecordError {
                line: line_no,
                message: format!("document {} has empty text", raw.id),
            });
            continue;
        }
        if !seen.insert(raw.id.clone()) {
            outcome.errors.push(RecordError {
                line: line_no,
                message: format!("duplicate document id {}", raw.id),
            });
            continue;
        }
        outcome.documents.push(Document {
            id: raw.id,
            text,
            source_collection: raw
                .source_collection
                .unwrap_or_else(|| collection_tag.to_string()),
            language: raw.language.unwrap_or_else(|| "en".to_string()),
        });
    }
    Ok(outcome)
}

/// Collapse every run of whitespace into one space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    tokenize_whitespace(text).join(" ")
}

/// Maximal runs of non-whitespace characters.
pub fn tokenize_whitespace(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Strip leading and trailing non-alphanumeric characters from a token.
pub fn strip_punctuation(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Lowercased whitespace tokens with surrounding punctuation stripped;
/// tokens that are pure punctuation are dropped.
pub fn word_tokens(text: &str) -> Vec<String> {
    tokenize_whitespace(text)
        .into_iter()
        .map(strip_punctuation)
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn is_abbreviation(token: &str) -> bool {
    let core = token.trim_start_matches(|c: char| !c.is_alphanumeric());
    ABBREVIATIONS.contains(&core.to_lowercase())
}

fn closes_sentence(token: &str, next: &str) -> bool {
    let ends_with_terminal = matches!(token.chars().last(), Some('.' | '?' | '!'));
    let next_opens = next
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit());
    ends_with_terminal && next_opens && !is_abbreviation(token)
}

/// Split text into sentences.
///
/// A boundary falls after a token ending in `.`, `?` or `!` when the next
/// token starts with an uppercase letter or a digit, unless the token is in
/// the shipped abbreviation list. Joining the result with single spaces
/// gives back the whitespace-normalized input.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let tokens = tokenize_whitespace(text);
    let mut sentences = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let boundary = match tokens.get(i + 1) {
            Some(next) => closes_sentence(tokens[i], next),
            None => true,
        };
        if boundary {
            sentences.push(tokens[start..=i].join(" "));
            start = i + 1;
        }
    }
    sentences
}

/// Inclusive sentence-count range for sampled passages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceBounds {
    pub min_sentences: usize,
    pub max_sentences: usize,
}

impl Default for SentenceBounds {
    fn default() -> Self {
        Self {
            min_sentences: DEFAULT_MIN_SENTENCES,
            max_sentences: DEFAULT_MAX_SENTENCES,
        }
    }
}

impl SentenceBounds {
    pub fn new(min_sentences: usize, max_sentences: usize) -> Result<Self, CorpusError> {
        if min_sentences == 0 || min_sentences > max_sentences {
            return Err(CorpusError::InvalidBounds {
                min: min_sentences,
                max: max_sentences,
            });
        }
        Ok(Self {
            min_sentences,
            max_sentences,
        })
    }
}

/// Choose a contiguous span of `sentences`: the length `k` is drawn
/// uniformly from `[min, min(max, available)]`, then the start uniformly
/// from all valid starts. Returns `(start, k)`.
pub(crate) fn choose_span(
    available: usize,
    bounds: SentenceBounds,
    rng: &mut SeededRng,
) -> Option<(usize, usize)> {
    if available < bounds.min_sentences {
        return None;
    }
    let upper = bounds.max_sentences.min(available);
    let k = rng.random_range(bounds.min_sentences..=upper);
    let start = rng.random_range(0..=available - k);
    Some((start, k))
}

fn passage_from_span(id: String, doc_id: &str, sentences: &[String], start: usize, k: usize) -> Passage {
    let text = sentences[start..start + k].join(" ");
    let token_count = tokenize_whitespace(&text).len();
    Passage {
        id,
        doc_id: doc_id.to_string(),
        text,
        sentence_count: k,
        token_count,
    }
}

/// Sample one passage from `doc`.
pub fn sample_passage(
    doc: &Document,
    rng: &mut SeededRng,
    bounds: SentenceBounds,
) -> Result<Passage, CorpusError> {
    let sentences = segment_sentences(&doc.text);
    let (start, k) =
        choose_span(sentences.len(), bounds, rng).ok_or_else(|| CorpusError::TooShort {
            doc_id: doc.id.clone(),
            sentences: sentences.len(),
            min: bounds.min_sentences,
        })?;
    let id = format!("{}:{}+{}", doc.id, start, k);
    Ok(passage_from_span(id, &doc.id, &sentences, start, k))
}

/// Sample `count` passages from a corpus, in parallel.
///
/// Documents too short for `bounds` are skipped with a warning. The eligible
/// documents are visited in a seeded shuffled order, cycling when `count`
/// exceeds their number, so each passage comes from a single document and
/// documents are reused only once all have been used. Passage `i` draws from
/// a stream keyed on (seed, document id, visit round), which makes the output
/// identical for any worker count.
pub fn sample_passages(
    docs: &[Document],
    count: usize,
    seed: u64,
    bounds: SentenceBounds,
    workers: usize,
) -> Result<Vec<Passage>, CorpusError> {
    crate::parallel::install(workers, || {
        let segmented: Vec<Vec<String>> = docs
            .par_iter()
            .map(|d| segment_sentences(&d.text))
            .collect();
        let mut eligible = Vec::new();
        for (i, sentences) in segmented.iter().enumerate() {
            if sentences.len() >= bounds.min_sentences {
                eligible.push(i);
            } else {
                log::warn!(
                    "skipping document {}: {} sentence(s), need {}",
                    docs[i].id,
                    sentences.len(),
                    bounds.min_sentences
                );
            }
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        if eligible.is_empty() {
            return Err(CorpusError::NoEligibleDocuments {
                min: bounds.min_sentences,
            });
        }
        let mut order_rng = derive_rng(seed, &["passage-order"]);
        rand::seq::SliceRandom::shuffle(eligible.as_mut_slice(), &mut order_rng);

        let passages = (0..count)
            .into_par_iter()
            .map(|i| {
                let doc_idx = eligible[i % eligible.len()];
                let round = i / eligible.len();
                let doc = &docs[doc_idx];
                let sentences = &segmented[doc_idx];
                let mut rng = derive_rng(seed, &["passage", &doc.id, &round.to_string()]);
                let (start, k) = choose_span(sentences.len(), bounds, &mut rng)
                    .expect("eligible documents satisfy the minimum");
                let id = format!("{}#{}:{}+{}", doc.id, round, start, k);
                passage_from_span(id, &doc.id, sentences, start, k)
            })
            .collect();
        Ok(passages)
    })
}

/// Summary statistics over sampled passages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageStats {
    pub count: usize,
    pub mean_token_count: f64,
    pub mean_sentence_count: f64,
}

pub fn passage_stats(passages: &[Passage]) -> PassageStats {
    let n = passages.len();
    let denom = n.max(1) as f64;
    PassageStats {
        count: n,
        mean_token_count: passages.iter().map(|p| p.token_count as f64).sum::<f64>() / denom,
        mean_sentence_count: passages.iter().map(|p| p.sentence_count as f64).sum::<f64>()
            / denom,
    }
}
