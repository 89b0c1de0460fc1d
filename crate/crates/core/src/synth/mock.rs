//! In-process mock adapters, so the whole pipeline runs without a model server.
//!
//! | kind         | operation  | behaviour                                                        |
//! |--------------|------------|------------------------------------------------------------------|
//! | `markov`     | generate   | order-3 character Markov chain trained on the human corpus       |
//! | `scigen`     | generate   | grammar-based nonsense computer-science prose (whole documents)  |
//! | `echo`       | generate   | returns the prompt unchanged                                     |
//! | `dictionary` | paraphrase | word-for-word dictionary substitution                            |
//! | `identity`   | paraphrase, translate | returns the input unchanged                           |
//! | `shuffle`    | translate  | drops articles and interleaves tokens going out, reverses coming back |
//! | `reversal`   | translate  | reverses token order on every leg (lossless round trip)          |
//!
//! Mocks are deterministic: sampling mocks draw from the request's `seed`
//! option, or from a hash of the prompt when none is given.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::adapter::{
    Adapter, AdapterEndpoint, AdapterHandle, GenerateRequest, HealthResponse, ParaphraseRequest,
    SynthError, TextResponse, TranslateRequest,
};
use crate::corpus::{normalize_whitespace, segment_sentences, strip_punctuation};
use crate::rng::{derive_rng, derive_seed, SeededRng};
use crate::taxonomy::TechnologyType;

const MARKOV_ORDER: usize = 3;
const MAX_SENTENCE_CHARS: usize = 320;
const MIN_SENTENCE_CHARS: usize = 24;

fn health(name: &str) -> Result<HealthResponse, SynthError> {
    Ok(HealthResponse {
        status: "ok".into(),
        model_name: name.into(),
    })
}

fn request_rng(kind: &str, request: &GenerateRequest) -> SeededRng {
    let seed = request
        .seed_option()
        .unwrap_or_else(|| derive_seed(0, &[kind, &request.prompt]));
    derive_rng(seed, &[kind])
}

/// Order-3 character-level Markov chain.
///
/// The mock ignores temperature: it always samples proportionally to the
/// training counts, because greedy decoding of a character chain collapses
/// into a loop.
pub struct MarkovGenerator {
    transitions: BTreeMap<Vec<char>, Vec<(char, u32)>>,
    starts: Vec<Vec<char>>,
}

impl MarkovGenerator {
    pub fn train<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: BTreeMap<Vec<char>, BTreeMap<char, u32>> = BTreeMap::new();
        let mut starts = HashSet::new();
        for text in texts {
            for sentence in segment_sentences(text) {
                let chars: Vec<char> = sentence.chars().collect();
                if chars.len() <= MARKOV_ORDER {
                    continue;
                }
                starts.insert(chars[..MARKOV_ORDER].to_vec());
                // a trailing space lets the chain learn where sentences end
                let mut padded = chars;
                padded.push(' ');
                for w in padded.windows(MARKOV_ORDER + 1) {
                    *counts
                        .entry(w[..MARKOV_ORDER].to_vec())
                        .or_default()
                        .entry(w[MARKOV_ORDER])
                        .or_default() += 1;
                }
            }
        }
        let mut starts: Vec<Vec<char>> = starts.into_iter().collect();
        starts.sort();
        Self {
            transitions: counts
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
            starts,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    fn next_char(&self, state: &[char], rng: &mut SeededRng) -> Option<char> {
        let options = self.transitions.get(state)?;
        let total: u32 = options.iter().map(|(_, c)| c).sum();
        let mut draw = rng.random_range(0..total);
        for (ch, count) in options {
            if draw < *count {
                return Some(*ch);
            }
            draw -= count;
        }
        None
    }

    fn sentence(&self, rng: &mut SeededRng) -> String {
        let mut out: Vec<char> = self.starts.choose(rng).cloned().unwrap_or_default();
        while out.len() < MAX_SENTENCE_CHARS {
            let state = &out[out.len() - MARKOV_ORDER..];
            let Some(ch) = self.next_char(state, rng) else {
                break;
            };
            let last = *out.last().expect("non-empty");
            if ch == ' ' && matches!(last, '.' | '?' | '!') && out.len() >= MIN_SENTENCE_CHARS {
                break;
            }
            out.push(ch);
        }
        let mut s: String = out.into_iter().collect();
        s = normalize_whitespace(&s);
        if !s.ends_with(['.', '?', '!']) {
            s.push('.');
        }
        s
    }
}

impl Adapter for MarkovGenerator {
    fn generate(&self, request: &GenerateRequest) -> Result<TextResponse, SynthError> {
        if self.is_empty() {
            return Ok(TextResponse {
                text: String::new(),
            });
        }
        let mut rng = request_rng("markov", request);
        let n = request.max_new_sentences.max(1);
        let text = (0..n).map(|_| self.sentence(&mut rng)).collect::<Vec<_>>().join(" ");
        Ok(TextResponse { text })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-markov")
    }
}

/// Grammar-driven generator of nonsense systems-research prose.
pub struct ScigenGenerator;

static SG_TOPICS: &[&str] = &[
    "Byzantine fault tolerance", "the lookaside buffer", "e-business", "wide-area networks",
    "DHTs", "RAID", "symmetric encryption", "Markov models", "linked lists",
    "the producer-consumer problem", "superblocks", "red-black trees", "SMPs", "IPv7",
    "virtual machines", "the Ethernet", "active networks", "write-back caches", "courseware",
    "object-oriented languages", "scatter/gather I/O", "the Turing machine",
];
static SG_ADJ: &[&str] = &[
    "probabilistic", "homogeneous", "introspective", "pervasive", "cacheable", "ubiquitous",
    "game-theoretic", "metamorphic", "replicated", "low-energy", "decentralized", "amphibious",
    "permutable", "lossless", "self-learning", "stable",
];
static SG_SYSTEMS: &[&str] = &[
    "Bun", "Glaive", "Tort", "Yom", "Ferule", "Quaff", "Pimp", "Hug", "Loge", "Rux", "Wem",
    "Doab",
];
static SG_VERBS: &[&str] = &[
    "refine", "visualize", "harness", "deploy", "emulate", "synthesize", "construct",
    "investigate", "disprove", "explore", "evaluate", "improve",
];
static SG_FIELDS: &[&str] = &[
    "cyberinformaticians", "theorists", "system administrators", "futurists",
    "statisticians", "steganographers", "hackers worldwide", "electrical engineers",
];

fn sg_pick<'a>(rng: &mut SeededRng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty grammar table")
}

impl ScigenGenerator {
    fn sentence(rng: &mut SeededRng) -> String {
        match rng.random_range(0..8) {
            0 => format!(
                "Many {} would agree that, had it not been for {}, the {} of {} might never have occurred.",
                sg_pick(rng, SG_FIELDS),
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, &["deployment", "simulation", "emulation", "refinement", "improvement"]),
                sg_pick(rng, SG_TOPICS)
            ),
            1 => format!(
                "In this position paper, we {} how {} can be applied to the {} of {}.",
                sg_pick(rng, SG_VERBS),
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, &["synthesis", "analysis", "visualization", "construction"]),
                sg_pick(rng, SG_TOPICS)
            ),
            2 => format!(
                "{} runs in O({}) time.",
                sg_pick(rng, SG_SYSTEMS),
                sg_pick(rng, &["n", "log n", "n^2", "2^n", "n log n", "log log n"])
            ),
            3 => format!(
                "Our {} heuristic, {}, is the solution to all of these challenges.",
                sg_pick(rng, SG_ADJ),
                sg_pick(rng, SG_SYSTEMS)
            ),
            4 => format!(
                "Unlike other authors, we have decided not to {} {}.",
                sg_pick(rng, SG_VERBS),
                sg_pick(rng, SG_TOPICS)
            ),
            5 => format!(
                "The {} unification of {} and {} has {} many {} problems.",
                sg_pick(rng, SG_ADJ),
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, &["harnessed", "visualized", "solved", "obviated"]),
                sg_pick(rng, SG_ADJ)
            ),
            6 => format!(
                "Continuing with this rationale, {} is {} because of {}.",
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, SG_ADJ),
                sg_pick(rng, SG_TOPICS)
            ),
            _ => format!(
                "Next, we {} that {} and {} are mostly incompatible.",
                sg_pick(rng, &["argue", "verify", "confirm", "show"]),
                sg_pick(rng, SG_TOPICS),
                sg_pick(rng, SG_TOPICS)
            ),
        }
    }
}

impl Adapter for ScigenGenerator {
    fn generate(&self, request: &GenerateRequest) -> Result<TextResponse, SynthError> {
        let mut rng = request_rng("scigen", request);
        let n = request.max_new_sentences.max(1);
        let text = (0..n).map(|_| Self::sentence(&mut rng)).collect::<Vec<_>>().join(" ");
        Ok(TextResponse { text })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-scigen")
    }
}

/// Returns the prompt as its output.
pub struct EchoGenerator;

impl Adapter for EchoGenerator {
    fn generate(&self, request: &GenerateRequest) -> Result<TextResponse, SynthError> {
        Ok(TextResponse {
            text: request.prompt.clone(),
        })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-echo")
    }
}

const DEFAULT_DICTIONARY: &str = include_str!("../../data/paraphrase_dictionary.tsv");

/// Word-for-word substitution. Leading and trailing punctuation and an
/// initial capital are preserved; unmapped words pass through.
pub struct DictionaryParaphraser {
    map: BTreeMap<String, String>,
}

impl DictionaryParaphraser {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        Self {
            map: map.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    /// The shipped default dictionary.
    pub fn default_dictionary() -> Self {
        Self::new(
            DEFAULT_DICTIONARY
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .filter_map(|l| l.split_once('\t'))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect(),
        )
    }

    fn lookup(&self, core: &str) -> Option<&str> {
        // abbreviations such as "e.g." are stored with their periods
        self.map.get(&core.to_lowercase()).map(String::as_str)
    }

    pub fn rewrite(&self, text: &str) -> String {
        text.split_whitespace()
            .map(|tok| {
                let core = strip_punctuation(tok);
                let with_period = tok
                    .trim_start_matches(|c: char| !c.is_alphanumeric())
                    .trim_end_matches([',', ';', ':', ')']);
                if let Some(rep) = self.lookup(with_period).filter(|_| with_period.ends_with('.')) {
                    return tok.replacen(with_period, &match_case(with_period, rep), 1);
                }
                match self.lookup(core) {
                    Some(rep) if !core.is_empty() => tok.replacen(core, &match_case(core, rep), 1),
                    _ => tok.to_string(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

impl Adapter for DictionaryParaphraser {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<TextResponse, SynthError> {
        Ok(TextResponse {
            text: self.rewrite(&request.text),
        })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-dictionary")
    }
}

/// Passes text through unchanged for paraphrase and translate.
pub struct IdentityAdapter;

impl Adapter for IdentityAdapter {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<TextResponse, SynthError> {
        Ok(TextResponse {
            text: request.text.clone(),
        })
    }

    fn translate(&self, request: &TranslateRequest) -> Result<TextResponse, SynthError> {
        Ok(TextResponse {
            text: request.text.clone(),
        })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-identity")
    }
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Deterministic token-order "translator".
///
/// A leg whose target is not `home_language` is the forward leg; any other
/// leg is a return leg.
pub struct ShuffleTranslator {
    home_language: String,
    lossy: bool,
}

impl ShuffleTranslator {
    /// Forward leg drops articles and interleaves tokens (even positions, then
    /// odd); the return leg reverses token order.
    pub fn lossy(home_language: &str) -> Self {
        Self {
            home_language: home_language.into(),
            lossy: true,
        }
    }

    /// Both legs reverse token order, so a round trip is the identity.
    pub fn reversal(home_language: &str) -> Self {
        Self {
            home_language: home_language.into(),
            lossy: false,
        }
    }

    fn forward(&self, text: &str) -> String {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if !self.lossy {
            return tokens.into_iter().rev().collect::<Vec<_>>().join(" ");
        }
        let kept: Vec<&str> = tokens
            .into_iter()
            .filter(|t| !ARTICLES.contains(&strip_punctuation(t).to_lowercase().as_str()))
            .collect();
        kept.iter()
            .step_by(2)
            .chain(kept.iter().skip(1).step_by(2))
            .copied()
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn back(&self, text: &str) -> String {
        text.split_whitespace().rev().collect::<Vec<_>>().join(" ")
    }
}

impl Adapter for ShuffleTranslator {
    fn translate(&self, request: &TranslateRequest) -> Result<TextResponse, SynthError> {
        let text = if request.target_lang != self.home_language {
            self.forward(&request.text)
        } else {
            self.back(&request.text)
        };
        Ok(TextResponse { text })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health(if self.lossy { "mock-shuffle" } else { "mock-reversal" })
    }
}

/// Word-lexicon translator between English and the mock pseudo-Spanish.
pub struct LexiconTranslator {
    home_language: String,
}

impl LexiconTranslator {
    pub fn new(home_language: &str) -> Self {
        Self {
            home_language: home_language.into(),
        }
    }
}

impl Adapter for LexiconTranslator {
    fn translate(&self, request: &TranslateRequest) -> Result<TextResponse, SynthError> {
        let text = if request.target_lang != self.home_language {
            crate::mockdata::pseudo_spanish(&request.text)
        } else {
            crate::mockdata::pseudo_english(&request.text)
        };
        Ok(TextResponse { text })
    }

    fn health(&self) -> Result<HealthResponse, SynthError> {
        health("mock-lexicon")
    }
}

/// Names accepted after `mock:`.
pub const MOCK_KINDS: [&str; 8] = [
    "markov", "scigen", "echo", "dictionary", "identity", "shuffle", "reversal", "lexicon",
];

/// The technology type a mock kind serves, for building default endpoints.
pub fn mock_kind_technology(kind: &str) -> Option<TechnologyType> {
    match kind {
        "markov" | "scigen" | "echo" => Some(TechnologyType::Generate),
        "dictionary" | "identity" => Some(TechnologyType::Paraphrase),
        "shuffle" | "reversal" | "lexicon" => Some(TechnologyType::Translate),
        _ => None,
    }
}

/// Instantiate a mock adapter. `human_texts` trains the Markov generator and
/// is ignored by other kinds.
pub fn build_mock<'a>(
    kind: &str,
    human_texts: impl IntoIterator<Item = &'a str>,
    home_language: &str,
) -> Result<Arc<dyn Adapter>, String> {
    Ok(match kind {
        "markov" => Arc::new(MarkovGenerator::train(human_texts)),
        "scigen" => Arc::new(ScigenGenerator),
        "echo" => Arc::new(EchoGenerator),
        "dictionary" => Arc::new(DictionaryParaphraser::default_dictionary()),
        "identity" => Arc::new(IdentityAdapter),
        "shuffle" => Arc::new(ShuffleTranslator::lossy(home_language)),
        "reversal" => Arc::new(ShuffleTranslator::reversal(home_language)),
        "lexicon" => Arc::new(LexiconTranslator::new(home_language)),
        other => {
            return Err(format!(
                "unknown mock adapter kind {other:?} (expected one of {})",
                MOCK_KINDS.join(", ")
            ))
        }
    })
}

/// A ready-to-use handle for a mock kind.
pub fn mock_handle<'a>(
    id: &str,
    kind: &str,
    human_texts: impl IntoIterator<Item = &'a str>,
) -> Result<AdapterHandle, String> {
    let tech = mock_kind_technology(kind)
        .ok_or_else(|| format!("unknown mock adapter kind {kind:?}"))?;
    let endpoint = AdapterEndpoint::mock(id, tech, kind);
    let client = build_mock(kind, human_texts, &endpoint.source_language)?;
    Ok(AdapterHandle::new(endpoint, client))
}
