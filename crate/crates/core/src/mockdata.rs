//! Deterministic stand-in corpora for tests, demos and desk-scale runs.
//!
//! The text is template-generated scientific prose. It is not meant to be
//! realistic, only varied enough that sampling, synthesis and detection have
//! something to work on without external data.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::rng::{derive_rng, SeededRng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Physics,
    Biomed,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Physics => "physics",
            Domain::Biomed => "biomed",
        }
    }

    fn vocab(self) -> &'static DomainVocab {
        match self {
            Domain::Physics => &PHYSICS,
            Domain::Biomed => &BIOMED,
        }
    }
}

struct DomainVocab {
    nouns: &'static [&'static str],
    adjectives: &'static [&'static str],
    methods: &'static [&'static str],
    quantities: &'static [&'static str],
    units: &'static [&'static str],
}

static PHYSICS: DomainVocab = DomainVocab {
    nouns: &[
        "lattice", "phonon spectrum", "spin chain", "magnetic moment", "superconducting gap",
        "wave function", "scattering amplitude", "dark matter halo", "plasma density",
        "quantum dot", "band structure", "electron gas", "photon flux", "gravitational lens",
        "neutron star", "boundary condition", "Hamiltonian", "correlation length",
        "critical exponent", "thin film", "crystal surface", "vortex lattice", "laser pulse",
        "detector array", "cosmic ray", "energy spectrum", "phase diagram", "order parameter",
    ],
    adjectives: &[
        "anisotropic", "quantum", "thermal", "nonlinear", "topological", "relativistic",
        "magnetic", "coherent", "disordered", "periodic", "stochastic", "metastable",
        "ultrafast", "two-dimensional", "collective", "asymptotic",
    ],
    methods: &[
        "density functional theory", "Monte Carlo sampling", "perturbation theory",
        "exact diagonalization", "the renormalization group", "numerical simulation",
        "neutron scattering", "X-ray diffraction", "mean field theory", "lattice gauge theory",
    ],
    quantities: &[
        "temperature", "pressure", "field strength", "coupling constant", "frequency",
        "energy", "magnetization", "conductivity", "wavelength", "luminosity",
    ],
    units: &["K", "GeV", "meV", "nm", "Tesla", "GHz", "kbar", "fs"],
};

static BIOMED: DomainVocab = DomainVocab {
    nouns: &[
        "tumor growth", "gene expression", "immune response", "blood pressure",
        "protein folding", "cell viability", "insulin resistance", "viral load",
        "patient cohort", "receptor binding", "inflammatory marker", "mortality rate",
        "clinical outcome", "bone density", "cardiac function", "antibody titer",
        "drug toxicity", "gut microbiome", "neuronal activity", "tissue sample",
        "hospital admission", "treatment response", "serum level", "disease progression",
    ],
    adjectives: &[
        "clinical", "chronic", "acute", "randomized", "longitudinal", "systemic",
        "metabolic", "genetic", "pediatric", "cellular", "molecular", "prospective",
        "retrospective", "oral", "pulmonary", "renal",
    ],
    methods: &[
        "logistic regression", "flow cytometry", "western blot analysis",
        "a randomized controlled trial", "survival analysis", "RNA sequencing",
        "immunohistochemistry", "a cohort design", "mass spectrometry", "PCR assays",
    ],
    quantities: &[
        "dose", "concentration", "age", "body mass index", "heart rate", "glucose level",
        "follow-up time", "incidence", "expression level", "cholesterol",
    ],
    units: &["mg", "mmol/L", "years", "weeks", "mL", "ng/mL", "percent", "days"],
};

static SURNAMES: &[&str] = &[
    "Smith", "Garcia", "Chen", "Kumar", "Müller", "Rossi", "Tanaka", "Silva", "Nowak",
    "Okafor", "Johansson", "Dubois", "Kim", "Ivanova", "Hassan", "Lopez",
];

static VERBS_PAST: &[&str] = &[
    "observed", "measured", "reported", "examined", "investigated", "estimated",
    "identified", "characterized", "quantified", "analyzed",
];

static VERBS_PRESENT: &[&str] = &[
    "increases", "decreases", "depends on", "correlates with", "affects", "determines",
    "modulates", "constrains", "reduces", "enhances",
];

static RESULT_NOUNS: &[&str] = &["results", "data", "measurements", "findings", "estimates"];

static HEDGES: &[&str] = &[
    "significant", "strong", "weak", "moderate", "clear", "consistent", "large", "small",
];

fn pick<'a>(rng: &mut SeededRng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty vocabulary")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn noun_phrase(rng: &mut SeededRng, v: &DomainVocab) -> String {
    if rng.random_bool(0.5) {
        format!("the {} {}", pick(rng, v.adjectives), pick(rng, v.nouns))
    } else {
        format!("the {}", pick(rng, v.nouns))
    }
}

fn sentence(rng: &mut SeededRng, domain: Domain) -> String {
    let v = domain.vocab();
    let s = match rng.random_range(0..14) {
        0 => format!(
            "We {} {} using {}.",
            pick(rng, VERBS_PAST),
            noun_phrase(rng, v),
            pick(rng, v.methods)
        ),
        1 => format!(
            "{} {} {}.",
            capitalize(&noun_phrase(rng, v)),
            pick(rng, VERBS_PRESENT),
            noun_phrase(rng, v)
        ),
        2 => format!(
            "As shown in Fig. {}, {} {} with the {}.",
            rng.random_range(1..9),
            noun_phrase(rng, v),
            pick(rng, VERBS_PRESENT),
            pick(rng, v.quantities)
        ),
        3 => format!(
            "{} et al. {} a {} effect of the {} on {}.",
            pick(rng, SURNAMES),
            pick(rng, VERBS_PAST),
            pick(rng, HEDGES),
            pick(rng, v.quantities),
            noun_phrase(rng, v)
        ),
        4 => format!(
            "The {} was {} at {} {}.",
            pick(rng, v.quantities),
            pick(rng, VERBS_PAST),
            rng.random_range(2..500),
            pick(rng, v.units)
        ),
        5 => format!(
            "Our {} show that {} {} {}.",
            pick(rng, RESULT_NOUNS),
            noun_phrase(rng, v),
            pick(rng, VERBS_PRESENT),
            noun_phrase(rng, v)
        ),
        6 => format!(
            "In this work, we study {} in the presence of {}.",
            noun_phrase(rng, v),
            noun_phrase(rng, v)
        ),
        7 => format!(
            "These {} are consistent with {} (see Table {}).",
            pick(rng, RESULT_NOUNS),
            pick(rng, v.methods),
            rng.random_range(1..5)
        ),
        8 => format!(
            "However, {} remains {} for {}.",
            noun_phrase(rng, v),
            pick(rng, &["unclear", "poorly understood", "difficult to measure", "an open problem"]),
            noun_phrase(rng, v)
        ),
        9 => format!(
            "A {} increase in the {} was {} between the two groups, i.e. a change of {} {}.",
            pick(rng, HEDGES),
            pick(rng, v.quantities),
            pick(rng, VERBS_PAST),
            rng.random_range(2..90),
            pick(rng, v.units)
        ),
        10 => format!(
            "{} is {} by {}, e.g. through {}.",
            capitalize(&noun_phrase(rng, v)),
            pick(rng, VERBS_PAST),
            noun_phrase(rng, v),
            pick(rng, v.methods)
        ),
        11 => format!(
            "To our knowledge, this is the first {} study of {}.",
            pick(rng, v.adjectives),
            noun_phrase(rng, v)
        ),
        12 => format!(
            "The {} of {} was {} with {} and compared with previous {}.",
            pick(rng, v.quantities),
            noun_phrase(rng, v),
            pick(rng, VERBS_PAST),
            pick(rng, v.methods),
            pick(rng, RESULT_NOUNS)
        ),
        _ => format!(
            "Why does {} {} {}?",
            noun_phrase(rng, v),
            pick(rng, &["depend on", "affect", "constrain", "reduce"]),
            noun_phrase(rng, v)
        ),
    };
    s
}

fn paragraph(rng: &mut SeededRng, domain: Domain, sentences: usize) -> String {
    (0..sentences)
        .map(|_| sentence(rng, domain))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `count` documents of 12 to 40 sentences each.
pub fn mock_documents(seed: u64, count: usize, domain: Domain) -> Vec<Document> {
    (0..count)
        .map(|i| {
            let id = format!("{}-{i:06}", domain.as_str());
            let mut rng = derive_rng(seed, &["mock-document", &id]);
            let n = rng.random_range(12..=40);
            Document {
                text: paragraph(&mut rng, domain, n),
                id,
                source_collection: format!("mock-{}", domain.as_str()),
                language: "en".into(),
            }
        })
        .collect()
}

/// Aligned passage pair for out-of-domain evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualPair {
    pub id: String,
    pub text_a: String,
    pub text_b: String,
    #[serde(default = "default_lang_a")]
    pub lang_a: String,
    #[serde(default = "default_lang_b")]
    pub lang_b: String,
}

fn default_lang_a() -> String {
    "en".into()
}

fn default_lang_b() -> String {
    "es".into()
}

static PSEUDO_SPANISH: &[(&str, &str)] = &[
    ("the", "el"),
    ("of", "de"),
    ("and", "y"),
    ("in", "en"),
    ("with", "con"),
    ("we", "nosotros"),
    ("our", "nuestros"),
    ("is", "es"),
    ("was", "fue"),
    ("are", "son"),
    ("a", "un"),
    ("for", "para"),
    ("this", "este"),
    ("these", "estos"),
    ("that", "que"),
    ("by", "por"),
    ("on", "sobre"),
    ("between", "entre"),
    ("two", "dos"),
    ("results", "resultados"),
    ("data", "datos"),
    ("study", "estudio"),
    ("work", "trabajo"),
    ("however", "sin embargo"),
    ("using", "usando"),
    ("first", "primer"),
    ("increase", "aumento"),
    ("groups", "grupos"),
];

fn map_words(text: &str, lookup: impl Fn(&str) -> Option<&'static str>) -> String {
    text.split_whitespace()
        .map(|tok| {
            let core = crate::corpus::strip_punctuation(tok);
            let lower = core.to_lowercase();
            match lookup(&lower) {
                Some(mapped) if !core.is_empty() => {
                    let replaced = if core.chars().next().is_some_and(char::is_uppercase) {
                        capitalize(mapped)
                    } else {
                        mapped.to_string()
                    };
                    tok.replacen(core, &replaced, 1)
                }
                _ => tok.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Word-by-word pseudo-Spanish rendering used for mock pair generation.
pub fn pseudo_spanish(text: &str) -> String {
    map_words(text, |w| PSEUDO_SPANISH.iter().find(|(en, _)| *en == w).map(|(_, es)| *es))
}

/// Word-by-word inverse of [`pseudo_spanish`]. Multi-word renderings are
/// not reassembled, so the inverse is lossy.
pub fn pseudo_english(text: &str) -> String {
    map_words(text, |w| PSEUDO_SPANISH.iter().find(|(_, es)| *es == w).map(|(en, _)| *en))
}

/// `count` aligned pairs; `text_b` is the pseudo-Spanish side.
pub fn mock_bilingual_pairs(seed: u64, count: usize, domain: Domain) -> Vec<BilingualPair> {
    (0..count)
        .map(|i| {
            let id = format!("pair-{i:06}");
            let mut rng = derive_rng(seed, &["mock-pair", &id]);
            let n = rng.random_range(3..=8);
            let text_a = paragraph(&mut rng, domain, n);
            BilingualPair {
                text_b: pseudo_spanish(&text_a),
                text_a,
                id,
                lang_a: default_lang_a(),
                lang_b: default_lang_b(),
            }
        })
        .collect()
}
