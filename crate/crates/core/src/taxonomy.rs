//! The three-level label hierarchy (technology type / model family / model)
//! and the registry of synthesis sources.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("label {input:?} must have exactly three '/'-separated segments, found {found}")]
    SegmentCount { input: String, found: usize },
    #[error("unknown technology type {0:?} (expected real, generate, paraphrase or translate)")]
    UnknownTechnology(String),
    #[error("label {input:?} has an empty {segment} segment")]
    EmptySegment { input: String, segment: &'static str },
    #[error("real labels must be real/real/real, got {0:?}")]
    InconsistentReal(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate source label {0}")]
    Duplicate(LabelPath),
    #[error("source {0} has a zero target count")]
    ZeroCount(LabelPath),
}

/// Parent label: which kind of tool produced the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TechnologyType {
    Real,
    Generate,
    Paraphrase,
    Translate,
}

impl TechnologyType {
    /// All values in declaration order; this is also the detector's class order.
    pub const ALL: [TechnologyType; 4] = [
        TechnologyType::Real,
        TechnologyType::Generate,
        TechnologyType::Paraphrase,
        TechnologyType::Translate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechnologyType::Real => "real",
            TechnologyType::Generate => "generate",
            TechnologyType::Paraphrase => "paraphrase",
            TechnologyType::Translate => "translate",
        }
    }

    pub fn binary(self) -> BinaryLabel {
        match self {
            TechnologyType::Real => BinaryLabel::Human,
            _ => BinaryLabel::Machine,
        }
    }
}

impl fmt::Display for TechnologyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechnologyType {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "real" => Ok(TechnologyType::Real),
            "generate" => Ok(TechnologyType::Generate),
            "paraphrase" => Ok(TechnologyType::Paraphrase),
            "translate" => Ok(TechnologyType::Translate),
            _ => Err(LabelError::UnknownTechnology(s.to_string())),
        }
    }
}

/// Human vs machine, for scoring against binary datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Human,
    Machine,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Human, BinaryLabel::Machine];

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Human => "human",
            BinaryLabel::Machine => "machine",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = LabelError;

    /// Accepts `human`/`machine`, a technology type, or a full label path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "human" => Ok(BinaryLabel::Human),
            "machine" => Ok(BinaryLabel::Machine),
            other if other.contains('/') => Ok(other.parse::<LabelPath>()?.tech.binary()),
            other => Ok(other.parse::<TechnologyType>()?.binary()),
        }
    }
}

/// `type/family/model`, e.g. `generate/gpt2/distilgpt2`.
///
/// Family and model are free-form and stored lowercased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelPath {
    pub tech: TechnologyType,
    pub family: String,
    pub model: String,
}

impl LabelPath {
    pub fn new(tech: TechnologyType, family: &str, model: &str) -> Result<Self, LabelError> {
        let family = family.trim().to_lowercase();
        let model = model.trim().to_lowercase();
        let rendered = format!("{tech}/{family}/{model}");
        if family.is_empty() {
            return Err(LabelError::EmptySegment {
                input: rendered,
                segment: "family",
            });
        }
        if model.is_empty() {
            return Err(LabelError::EmptySegment {
                input: rendered,
                segment: "model",
            });
        }
        if tech == TechnologyType::Real && (family != "real" || model != "real") {
            return Err(LabelError::InconsistentReal(rendered));
        }
        Ok(Self {
            tech,
            family,
            model,
        })
    }

    pub fn real() -> Self {
        Self {
            tech: TechnologyType::Real,
            family: "real".into(),
            model: "real".into(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.tech == TechnologyType::Real
    }

    pub fn binary(&self) -> BinaryLabel {
        self.tech.binary()
    }
}

/// Parse a `type/family/model` string.
pub fn parse_label_path(s: &str) -> Result<LabelPath, LabelError> {
    s.parse()
}

/// `real` maps to human, everything else to machine.
pub fn collapse_to_binary(label: &LabelPath) -> BinaryLabel {
    label.binary()
}

impl FromStr for LabelPath {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments: Vec<&str> = s.split('/').collect();
        if segments.len() != 3 {
            return Err(LabelError::SegmentCount {
                input: s.to_string(),
                found: segments.len(),
            });
        }
        let tech = segments[0].parse()?;
        LabelPath::new(tech, segments[1], segments[2])
    }
}

impl fmt::Display for LabelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.tech, self.family, self.model)
    }
}

impl Serialize for LabelPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a generate-type source turns adapter output into a passage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    /// Prompt with a seed passage's first sentence and re-prompt.
    #[default]
    Continue,
    /// Produce a whole document and extract a random passage (SCIgen-style).
    Extract,
}

fn is_default_procedure(p: &Procedure) -> bool {
    *p == Procedure::Continue
}

/// One row of a build plan: a label, the adapter that produces it and how
/// many accepted passages are wanted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub label: LabelPath,
    /// Endpoint id from the adapters file, or `mock:<kind>`.
    pub adapter: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "is_default_procedure")]
    pub procedure: Procedure,
}

/// Immutable, label-indexed set of sources.
#[derive(Debug, Clone, Default)]
pub struct SourceRegistry {
    specs: Vec<SourceSpec>,
    index: BTreeMap<LabelPath, usize>,
}

/// Build a registry, rejecting duplicate labels and zero counts.
pub fn registry_from_plan(plan: Vec<SourceSpec>) -> Result<SourceRegistry, RegistryError> {
    let mut index = BTreeMap::new();
    for (i, spec) in plan.iter().enumerate() {
        if spec.count == 0 {
            return Err(RegistryError::ZeroCount(spec.label.clone()));
        }
        if index.insert(spec.label.clone(), i).is_some() {
            return Err(RegistryError::Duplicate(spec.label.clone()));
        }
    }
    Ok(SourceRegistry { specs: plan, index })
}

impl SourceRegistry {
    pub fn get(&self, label: &LabelPath) -> Option<&SourceSpec> {
        self.index.get(label).map(|&i| &self.specs[i])
    }

    /// Sources in plan order.
    pub fn specs(&self) -> &[SourceSpec] {
        &self.specs
    }

    pub fn synthetic(&self) -> impl Iterator<Item = &SourceSpec> {
        self.specs.iter().filter(|s| !s.label.is_real())
    }

    pub fn real_count(&self) -> Option<usize> {
        self.specs.iter().find(|s| s.label.is_real()).map(|s| s.count)
    }

    pub fn synthetic_total(&self) -> usize {
        self.synthetic().map(|s| s.count).sum()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

/// The shipped default build plan (human rows plus eleven synthetic sources).
pub const DEFAULT_PLAN_JSON: &str = include_str!("../data/plan.default.json");

pub fn default_plan() -> Vec<SourceSpec> {
    serde_json::from_str(DEFAULT_PLAN_JSON).expect("shipped plan parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let l = parse_label_path("generate/gpt2/distilgpt2").unwrap();
        assert_eq!(l.tech, TechnologyType::Generate);
        assert_eq!(l.family, "gpt2");
        assert_eq!(l.model, "distilgpt2");
        assert_eq!(parse_label_path("real/real/real").unwrap(), LabelPath::real());
        assert_eq!(
            parse_label_path("summarize/x/y"),
            Err(LabelError::UnknownTechnology("summarize".into()))
        );
        assert!(matches!(
            parse_label_path("generate/gpt2"),
            Err(LabelError::SegmentCount { found: 2, .. })
        ));
        assert!(parse_label_path("real/x/real").is_err());
        assert!(parse_label_path("generate//m").is_err());
    }

    #[test]
    fn family_and_model_are_lowercased() {
        let l = parse_label_path("Generate/GPT2/GPT-2-arxiv_generate").unwrap();
        assert_eq!(l.to_string(), "generate/gpt2/gpt-2-arxiv_generate");
    }

    #[test]
    fn binary_collapse() {
        let b = |s: &str| collapse_to_binary(&parse_label_path(s).unwrap());
        assert_eq!(b("real/real/real"), BinaryLabel::Human);
        assert_eq!(b("translate/opus/opus-es-en"), BinaryLabel::Machine);
        assert_eq!(b("paraphrase/spinbot/spinbot"), BinaryLabel::Machine);
        for t in TechnologyType::ALL {
            assert_eq!(t.binary() == BinaryLabel::Human, t == TechnologyType::Real);
        }
        assert_eq!("generate".parse::<BinaryLabel>().unwrap(), BinaryLabel::Machine);
        assert_eq!("real/real/real".parse::<BinaryLabel>().unwrap(), BinaryLabel::Human);
    }

    #[test]
    fn default_plan_totals() {
        let registry = registry_from_plan(default_plan()).unwrap();
        assert_eq!(registry.synthetic_total(), 10_475);
        assert_eq!(registry.synthetic().count(), 11);
        assert_eq!(registry.real_count(), Some(99_064));
        let scigen = registry
            .get(&parse_label_path("generate/scigen/scigen").unwrap())
            .unwrap();
        assert_eq!(scigen.procedure, Procedure::Extract);
    }

    #[test]
    fn empty_and_duplicate_plans() {
        let empty = registry_from_plan(Vec::new()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.synthetic_total(), 0);

        let spec = SourceSpec {
            label: parse_label_path("paraphrase/spinbot/spinbot").unwrap(),
            adapter: "mock:dictionary".into(),
            count: 3,
            procedure: Procedure::Continue,
        };
        assert!(matches!(
            registry_from_plan(vec![spec.clone(), spec]),
            Err(RegistryError::Duplicate(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn label_round_trip(tech in 1usize..4, family in "[a-z0-9_.-]{1,12}", model in "[a-z0-9_.-]{1,16}") {
                let label = LabelPath::new(TechnologyType::ALL[tech], &family, &model).unwrap();
                prop_assert_eq!(parse_label_path(&label.to_string()).unwrap(), label);
            }
        }
    }
}
