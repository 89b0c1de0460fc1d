//! Near-duplicate rejection between a seed passage and its synthetic rewrite.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{word_tokens, Passage};
use crate::taxonomy::LabelPath;

/// Default maximum similarity for an accepted synthetic passage.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.10;

const SHINGLE: usize = 3;

fn shingles(tokens: &[String], width: usize) -> HashSet<Vec<&str>> {
    tokens
        .windows(width)
        .map(|w| w.iter().map(String::as_str).collect())
        .collect()
}

fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Jaccard coefficient over lowercased word 3-gram shingles.
///
/// Tokens are whitespace tokens with surrounding punctuation stripped. When
/// either text has fewer than three tokens the comparison falls back to
/// unigram sets. Two empty texts have similarity 0.
pub fn similarity(a: &str, b: &str) -> f64 {
    let ta = word_tokens(a);
    let tb = word_tokens(b);
    let width = if ta.len() < SHINGLE || tb.len() < SHINGLE {
        1
    } else {
        SHINGLE
    };
    jaccard(&shingles(&ta, width), &shingles(&tb, width))
}

/// A synthetic candidate together with its filter verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub text: String,
    pub label: LabelPath,
    pub seed_passage_id: String,
    pub similarity: f64,
    pub accepted: bool,
}

/// Keep `synthetic_text` only if it is at most `threshold` similar to the seed.
pub fn filter_sample(
    original: &Passage,
    synthetic_text: String,
    label: &LabelPath,
    threshold: f64,
) -> SynthesisOutcome {
    let sim = similarity(&original.text, &synthetic_text);
    SynthesisOutcome {
        text: synthetic_text,
        label: label.clone(),
        seed_passage_id: original.id.clone(),
        similarity: sim,
        accepted: sim <= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize_whitespace;

    fn passage(text: &str) -> Passage {
        Passage {
            id: "p".into(),
            doc_id: "d".into(),
            text: text.into(),
            sentence_count: 1,
            token_count: tokenize_whitespace(text).len(),
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("the cat sat", "the cat sat"), 1.0);
        assert_eq!(similarity("alpha beta gamma", "delta epsilon zeta"), 0.0);
        assert_eq!(similarity("", ""), 0.0);
        assert_eq!(similarity("", "some text here"), 0.0);
        // shingles {the-cat-sat, cat-sat-on, sat-on-the, on-the-mat} vs
        // {the-cat-sat, cat-sat-on, sat-on-a, on-a-mat}: 2 shared of 6
        let s = similarity("the cat sat on the mat", "the cat sat on a mat");
        assert!((s - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn short_texts_use_unigrams() {
        // {a, b} vs {b, c, d, e}
        assert!((similarity("a b", "b c d e") - 1.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn case_and_punctuation_are_ignored() {
        assert_eq!(similarity("The Cat sat.", "the cat, sat"), 1.0);
    }

    #[test]
    fn filter_examples() {
        let label = "generate/x/y".parse().unwrap();
        let original = passage("the cat sat on the mat");
        let same = filter_sample(&original, original.text.clone(), &label, 0.10);
        assert_eq!(same.similarity, 1.0);
        assert!(!same.accepted);
        let disjoint = filter_sample(&original, "dogs run far away".into(), &label, 0.10);
        assert_eq!(disjoint.similarity, 0.0);
        assert!(disjoint.accepted);
        let close = filter_sample(&original, "the cat sat on a mat".into(), &label, 0.10);
        assert!(!close.accepted);
        assert_eq!(close.seed_passage_id, "p");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_and_bounded(a in "[a-d ,.]{0,60}", b in "[a-d ,.]{0,60}") {
                let ab = similarity(&a, &b);
                let ba = similarity(&b, &a);
                prop_assert_eq!(ab, ba);
                prop_assert!((0.0..=1.0).contains(&ab));
            }

            #[test]
            fn self_similarity_is_one(a in "[a-z]{1,5}( [a-z]{1,5}){0,12}") {
                prop_assert_eq!(similarity(&a, &a), 1.0);
            }
        }
    }
}
