//! Synthesis procedures: prompted generation with re-prompting, paraphrase,
//! back-translation, whole-document extraction and the similarity filter.

mod adapter;
pub mod http;
pub mod mock;
mod similarity;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use adapter::{
    Adapter, AdapterEndpoint, AdapterHandle, Decoding, GenerateRequest, HealthResponse,
    ParaphraseRequest, SynthError, TextResponse, TranslateRequest, PROTOCOL_VERSION,
};
pub use similarity::{filter_sample, similarity, SynthesisOutcome, DEFAULT_SIMILARITY_THRESHOLD};

use crate::corpus::{choose_span, segment_sentences, Passage, SentenceBounds};
use crate::rng::SeededRng;
use crate::taxonomy::TechnologyType;

/// Sentences requested from a whole-document generator before extraction.
pub const EXTRACT_DOCUMENT_SENTENCES: usize = 40;

/// Consecutive calls without usable output before generation is declared stalled.
const STALL_LIMIT: usize = 2;

fn default_temperature() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    #[serde(default = "default_min")]
    pub min_sentences: usize,
    #[serde(default = "default_max")]
    pub max_sentences: usize,
    #[serde(default)]
    pub decoding: Decoding,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_true")]
    pub strip_prompt_sentence: bool,
    /// Extra decoding options passed through to adapters untouched.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, Value>,
}

fn default_min() -> usize {
    crate::corpus::DEFAULT_MIN_SENTENCES
}

fn default_max() -> usize {
    crate::corpus::DEFAULT_MAX_SENTENCES
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            min_sentences: default_min(),
            max_sentences: default_max(),
            decoding: Decoding::Greedy,
            temperature: default_temperature(),
            strip_prompt_sentence: true,
            options: BTreeMap::new(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_sentences < 1 || self.min_sentences > self.max_sentences {
            return Err(format!(
                "sentence bounds must satisfy 1 <= min <= max, got {}..{}",
                self.min_sentences, self.max_sentences
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(format!("temperature must be positive, got {}", self.temperature));
        }
        Ok(())
    }

    pub fn bounds(&self) -> SentenceBounds {
        SentenceBounds {
            min_sentences: self.min_sentences,
            max_sentences: self.max_sentences,
        }
    }
}

fn require_kind(handle: &AdapterHandle, kind: TechnologyType) -> Result<(), SynthError> {
    if handle.endpoint.kind != kind {
        return Err(SynthError::Precondition(format!(
            "endpoint {} is a {} endpoint, expected {kind}",
            handle.id(),
            handle.endpoint.kind
        )));
    }
    Ok(())
}

/// Prompted generation with re-prompting.
///
/// The seed passage's first sentence is the prompt. The accumulated text
/// (prompt plus everything generated so far) is sent back as the next prompt
/// until `k` new sentences exist, with `k` drawn uniformly from the configured
/// bounds. Generated sentences that contain the prompt sentence verbatim are
/// discarded. With `strip_prompt_sentence` the result is the `k` generated
/// sentences; otherwise it is the prompt followed by the first `k - 1`.
pub fn generate_continuation(
    handle: &AdapterHandle,
    seed: &Passage,
    cfg: &GenerationConfig,
    rng: &mut SeededRng,
) -> Result<String, SynthError> {
    require_kind(handle, TechnologyType::Generate)?;
    cfg.validate().map_err(SynthError::Precondition)?;
    let seed_sentences = seed.sentences();
    if seed_sentences.len() < 2 {
        return Err(SynthError::Precondition(format!(
            "seed passage {} has fewer than 2 sentences",
            seed.id
        )));
    }
    let prompt = seed_sentences[0].clone();
    let k = rng.random_range(cfg.min_sentences..=cfg.max_sentences);
    let wanted = if cfg.strip_prompt_sentence { k } else { k.saturating_sub(1) };

    let mut generated: Vec<String> = Vec::new();
    let mut idle_calls = 0;
    // hard cap on calls: an adapter that keeps producing unusable fragments
    // is as stalled as one that produces nothing
    let max_calls = 4 * cfg.max_sentences + STALL_LIMIT;
    let mut calls = 0;
    while generated.len() < wanted {
        if idle_calls >= STALL_LIMIT || calls >= max_calls {
            return Err(SynthError::GenerationStalled {
                endpoint: handle.id().to_string(),
            });
        }
        calls += 1;
        let context = std::iter::once(prompt.as_str())
            .chain(generated.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ");
        let mut options = cfg.options.clone();
        options.insert("seed".into(), Value::from(rng.random::<u64>() >> 11));
        let request = GenerateRequest {
            prompt: context,
            max_new_sentences: wanted - generated.len(),
            decoding: cfg.decoding,
            temperature: cfg.temperature,
            options,
        };
        let output = handle.client.generate(&request)?.text;
        let fresh: Vec<String> = segment_sentences(&output)
            .into_iter()
            .filter(|s| !s.contains(&prompt))
            .collect();
        if fresh.is_empty() {
            idle_calls += 1;
            continue;
        }
        idle_calls = 0;
        generated.extend(fresh);
    }
    generated.truncate(wanted);
    let text = if cfg.strip_prompt_sentence {
        generated.join(" ")
    } else {
        std::iter::once(prompt.clone())
            .chain(generated)
            .collect::<Vec<_>>()
            .join(" ")
    };
    if cfg.strip_prompt_sentence && text.contains(&prompt) {
        // joining can in principle reassemble the prompt across a boundary
        return Err(SynthError::GenerationStalled {
            endpoint: handle.id().to_string(),
        });
    }
    Ok(text)
}

/// Send the whole passage through a paraphrase tool.
pub fn paraphrase_passage(handle: &AdapterHandle, passage: &Passage) -> Result<String, SynthError> {
    require_kind(handle, TechnologyType::Paraphrase)?;
    let text = handle
        .client
        .paraphrase(&ParaphraseRequest {
            text: passage.text.clone(),
        })?
        .text;
    if text.trim().is_empty() {
        return Err(SynthError::EmptyResponse {
            endpoint: handle.id().to_string(),
            operation: "paraphrase",
        });
    }
    Ok(text)
}

/// Result of a round trip through a pivot language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackTranslation {
    pub text: String,
    pub pivot_language: String,
    pub pivot_text: String,
}

fn translate_leg(
    handle: &AdapterHandle,
    text: &str,
    source: &str,
    target: &str,
    leg: &str,
) -> Result<String, SynthError> {
    let tag = |e: SynthError| match e {
        SynthError::Transport {
            endpoint, message, ..
        } => SynthError::Transport {
            endpoint,
            leg: Some(leg.to_string()),
            message,
        },
        other => other,
    };
    let text = handle
        .client
        .translate(&TranslateRequest {
            text: text.to_string(),
            source_lang: source.to_string(),
            target_lang: target.to_string(),
        })
        .map_err(tag)?
        .text;
    if text.trim().is_empty() {
        return Err(SynthError::EmptyResponse {
            endpoint: handle.id().to_string(),
            operation: "translate",
        });
    }
    Ok(text)
}

/// Translate into the endpoint's pivot language and back: exactly two calls.
pub fn back_translate(handle: &AdapterHandle, passage: &Passage) -> Result<BackTranslation, SynthError> {
    require_kind(handle, TechnologyType::Translate)?;
    let pivot = handle.endpoint.pivot_language.clone().ok_or_else(|| {
        SynthError::Precondition(format!("endpoint {} has no pivot_language", handle.id()))
    })?;
    let home = handle.endpoint.source_language.as_str();
    let pivot_text = translate_leg(handle, &passage.text, home, &pivot, "forward")?;
    log::debug!("pivot text for {}: {pivot_text}", passage.id);
    let text = translate_leg(handle, &pivot_text, &pivot, home, "return")?;
    Ok(BackTranslation {
        text,
        pivot_language: pivot,
        pivot_text,
    })
}

/// One-way translation, as used for aligned bilingual evaluation sets.
pub fn translate_text(
    handle: &AdapterHandle,
    text: &str,
    source_lang: &str,
    target_lang: &str,
) -> Result<String, SynthError> {
    require_kind(handle, TechnologyType::Translate)?;
    translate_leg(handle, text, source_lang, target_lang, "forward")
}

/// Random contiguous passage from an externally generated full document,
/// using the same span rule as corpus sampling.
pub fn extract_generated_passage(
    full_document_text: &str,
    rng: &mut SeededRng,
    bounds: SentenceBounds,
) -> Result<String, SynthError> {
    let sentences = segment_sentences(full_document_text);
    let (start, k) = choose_span(sentences.len(), bounds, rng).ok_or(SynthError::TooShort {
        sentences: sentences.len(),
        min: bounds.min_sentences,
    })?;
    Ok(sentences[start..start + k].join(" "))
}

/// Ask a whole-document generator for a document and extract a passage.
pub fn generate_and_extract(
    handle: &AdapterHandle,
    cfg: &GenerationConfig,
    rng: &mut SeededRng,
) -> Result<String, SynthError> {
    require_kind(handle, TechnologyType::Generate)?;
    let mut options = cfg.options.clone();
    options.insert("seed".into(), Value::from(rng.random::<u64>() >> 11));
    let document = handle
        .client
        .generate(&GenerateRequest {
            prompt: String::new(),
            max_new_sentences: EXTRACT_DOCUMENT_SENTENCES,
            decoding: cfg.decoding,
            temperature: cfg.temperature,
            options,
        })?
        .text;
    extract_generated_passage(&document, rng, cfg.bounds())
}

/// Instantiate the client for an endpoint description. Mock endpoints are
/// trained on `human_texts` where the mock needs it.
pub fn connect<'a>(
    endpoint: &AdapterEndpoint,
    human_texts: impl IntoIterator<Item = &'a str>,
) -> Result<AdapterHandle, String> {
    endpoint.validate()?;
    let client: Arc<dyn Adapter> = match endpoint.base_url.strip_prefix("mock:") {
        Some(kind) => mock::build_mock(kind, human_texts, &endpoint.source_language)?,
        None => Arc::new(http::HttpAdapter::new(endpoint.clone())),
    };
    Ok(AdapterHandle::new(endpoint.clone(), client))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize_whitespace;
    use crate::rng::derive_rng;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn passage(text: &str) -> Passage {
        Passage {
            id: "p1".into(),
            doc_id: "d1".into(),
            text: text.into(),
            sentence_count: segment_sentences(text).len(),
            token_count: tokenize_whitespace(text).len(),
        }
    }

    struct Scripted(&'static str);

    impl Adapter for Scripted {
        fn generate(&self, _: &GenerateRequest) -> Result<TextResponse, SynthError> {
            Ok(TextResponse { text: self.0.into() })
        }
        fn paraphrase(&self, _: &ParaphraseRequest) -> Result<TextResponse, SynthError> {
            Ok(TextResponse { text: self.0.into() })
        }
        fn translate(&self, _: &TranslateRequest) -> Result<TextResponse, SynthError> {
            Ok(TextResponse { text: self.0.into() })
        }
        fn health(&self) -> Result<HealthResponse, SynthError> {
            Ok(HealthResponse { status: "ok".into(), model_name: "scripted".into() })
        }
    }

    fn handle(kind: TechnologyType, client: Arc<dyn Adapter>) -> AdapterHandle {
        AdapterHandle::new(AdapterEndpoint::mock("test", kind, "scripted"), client)
    }

    fn fixed_k(k: usize) -> GenerationConfig {
        GenerationConfig { min_sentences: k, max_sentences: k, ..Default::default() }
    }

    #[test]
    fn continuation_strips_prompt() {
        let h = handle(TechnologyType::Generate, Arc::new(Scripted("X1. X2.")));
        let out = generate_continuation(&h, &passage("S1. S2. S3."), &fixed_k(2), &mut derive_rng(1, &[]))
            .unwrap();
        assert_eq!(out, "X1. X2.");
    }

    #[test]
    fn continuation_reprompts_until_enough_sentences() {
        struct OneAtATime(AtomicUsize);
        impl Adapter for OneAtATime {
            fn generate(&self, req: &GenerateRequest) -> Result<TextResponse, SynthError> {
                let n = self.0.fetch_add(1, Ordering::SeqCst);
                assert!(req.prompt.starts_with("S1."));
                Ok(TextResponse { text: format!("Next {n}.") })
            }
            fn health(&self) -> Result<HealthResponse, SynthError> {
                Ok(HealthResponse { status: "ok".into(), model_name: "one".into() })
            }
        }
        let client = Arc::new(OneAtATime(AtomicUsize::new(0)));
        let h = handle(TechnologyType::Generate, client.clone());
        let out = generate_continuation(&h, &passage("S1. S2."), &fixed_k(3), &mut derive_rng(1, &[]))
            .unwrap();
        assert_eq!(out, "Next 0. Next 1. Next 2.");
        assert_eq!(client.0.load(Ordering::SeqCst), 3);

        let keep = GenerationConfig { strip_prompt_sentence: false, ..fixed_k(3) };
        let out = generate_continuation(&h, &passage("S1. S2."), &keep, &mut derive_rng(1, &[])).unwrap();
        assert_eq!(out, "S1. Next 3. Next 4.");
    }

    #[test]
    fn echo_generation_stalls() {
        let h = mock::mock_handle("echo", "echo", std::iter::empty()).unwrap();
        let err = generate_continuation(&h, &passage("S1 here. S2 there."), &fixed_k(2), &mut derive_rng(1, &[]))
            .unwrap_err();
        assert!(matches!(err, SynthError::GenerationStalled { .. }));
    }

    #[test]
    fn empty_output_twice_stalls() {
        let h = handle(TechnologyType::Generate, Arc::new(Scripted("")));
        let err = generate_continuation(&h, &passage("A b. C d."), &fixed_k(2), &mut derive_rng(1, &[]))
            .unwrap_err();
        assert_eq!(err, SynthError::GenerationStalled { endpoint: "test".into() });
    }

    #[test]
    fn continuation_is_deterministic_with_markov_mock() {
        let docs = crate::mockdata::mock_documents(2, 20, crate::mockdata::Domain::Physics);
        let h = mock::mock_handle("m", "markov", docs.iter().map(|d| d.text.as_str())).unwrap();
        let seed = passage("We measured the lattice. The gap closes.");
        let run = || generate_continuation(&h, &seed, &GenerationConfig::default(), &mut derive_rng(4, &["x"])).unwrap();
        let a = run();
        assert_eq!(a, run());
        assert!(!a.contains("We measured the lattice."));
        let n = segment_sentences(&a).len();
        assert!((2..=10).contains(&n), "{n} sentences in {a}");
    }

    #[test]
    fn wrong_kind_is_a_precondition_error() {
        let h = handle(TechnologyType::Paraphrase, Arc::new(Scripted("x")));
        assert!(matches!(
            generate_continuation(&h, &passage("A. B."), &fixed_k(2), &mut derive_rng(1, &[])),
            Err(SynthError::Precondition(_))
        ));
    }

    #[test]
    fn paraphrase_examples() {
        let identity = mock::mock_handle("id", "identity", std::iter::empty()).unwrap();
        let p = passage("Large results show. Things happen.");
        assert_eq!(paraphrase_passage(&identity, &p).unwrap(), p.text);

        let dict = AdapterHandle::new(
            AdapterEndpoint::mock("dict", TechnologyType::Paraphrase, "dictionary"),
            Arc::new(mock::DictionaryParaphraser::from_pairs([("large", "big")])),
        );
        assert_eq!(paraphrase_passage(&dict, &passage("large results show")).unwrap(), "big results show");

        let empty = handle(TechnologyType::Paraphrase, Arc::new(Scripted("  ")));
        assert!(matches!(paraphrase_passage(&empty, &p), Err(SynthError::EmptyResponse { .. })));
    }

    #[test]
    fn back_translation_examples() {
        let p = passage("the cat sat on the mat today");
        let reversal = mock::mock_handle("rev", "reversal", std::iter::empty()).unwrap();
        let bt = back_translate(&reversal, &p).unwrap();
        assert_eq!(bt.text, p.text);
        assert_eq!(bt.pivot_text, "today mat the on sat cat the");

        let lossy = mock::mock_handle("shuf", "shuffle", std::iter::empty()).unwrap();
        let bt = back_translate(&lossy, &p).unwrap();
        assert_ne!(bt.text, p.text);
        assert!(!bt.text.split(' ').any(|t| t == "the"));

        let no_pivot = AdapterHandle::new(
            AdapterEndpoint::mock("np", TechnologyType::Translate, "reversal").with_pivot(None),
            Arc::new(mock::ShuffleTranslator::reversal("en")),
        );
        assert!(matches!(back_translate(&no_pivot, &p), Err(SynthError::Precondition(_))));
    }

    #[test]
    fn back_translation_makes_two_calls() {
        struct Counting(AtomicUsize);
        impl Adapter for Counting {
            fn translate(&self, r: &TranslateRequest) -> Result<TextResponse, SynthError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(TextResponse { text: format!("{}!", r.text) })
            }
            fn health(&self) -> Result<HealthResponse, SynthError> {
                Ok(HealthResponse { status: "ok".into(), model_name: "count".into() })
            }
        }
        let client = Arc::new(Counting(AtomicUsize::new(0)));
        let h = AdapterHandle::new(AdapterEndpoint::mock("c", TechnologyType::Translate, "count"), client.clone());
        for i in 0..5 {
            back_translate(&h, &passage("a b c")).unwrap();
            assert_eq!(client.0.load(Ordering::SeqCst), 2 * (i + 1));
        }
    }

    #[test]
    fn transport_errors_name_the_leg() {
        struct FailBack;
        impl Adapter for FailBack {
            fn translate(&self, r: &TranslateRequest) -> Result<TextResponse, SynthError> {
                if r.target_lang == "en" {
                    Err(SynthError::Transport { endpoint: "fb".into(), leg: None, message: "down".into() })
                } else {
                    Ok(TextResponse { text: r.text.clone() })
                }
            }
            fn health(&self) -> Result<HealthResponse, SynthError> {
                Ok(HealthResponse { status: "ok".into(), model_name: "fb".into() })
            }
        }
        let h = AdapterHandle::new(AdapterEndpoint::mock("fb", TechnologyType::Translate, "fb"), Arc::new(FailBack));
        match back_translate(&h, &passage("a b")) {
            Err(SynthError::Transport { leg, .. }) => assert_eq!(leg.as_deref(), Some("return")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extraction_examples() {
        let bounds = SentenceBounds::default();
        assert_eq!(
            extract_generated_passage("One here. Two there.", &mut derive_rng(1, &[]), bounds).unwrap(),
            "One here. Two there."
        );
        assert!(matches!(
            extract_generated_passage("Just one.", &mut derive_rng(1, &[]), bounds),
            Err(SynthError::TooShort { sentences: 1, .. })
        ));
        let doc: String = (0..30).map(|i| format!("Sentence {i} here. ")).collect();
        let a = extract_generated_passage(&doc, &mut derive_rng(8, &[]), bounds).unwrap();
        let b = extract_generated_passage(&doc, &mut derive_rng(8, &[]), bounds).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scigen_mock_extraction() {
        let h = mock::mock_handle("sg", "scigen", std::iter::empty()).unwrap();
        let text = generate_and_extract(&h, &GenerationConfig::default(), &mut derive_rng(3, &[])).unwrap();
        let n = segment_sentences(&text).len();
        assert!((2..=10).contains(&n));
    }

    #[test]
    fn generation_config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        assert!(GenerationConfig { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(GenerationConfig { min_sentences: 5, max_sentences: 3, ..Default::default() }.validate().is_err());
    }
}
