//! Run configuration: one JSON file carrying the build plan, split spec,
//! adapter endpoints, detector settings and experiment options.
//!
//! Every section is checked independently so that all problems are
//! reported together.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assembly::{BuildOptions, SplitSpec};
use crate::corpus::SentenceBounds;
use crate::detector::{FeaturizerConfig, TrainConfig};
use crate::experiments::AblationSpec;
use crate::mockdata::Domain;
use crate::synth::mock::{mock_kind_technology, MOCK_KINDS};
use crate::synth::{AdapterEndpoint, GenerationConfig};
use crate::taxonomy::{Procedure, SourceSpec, TechnologyType};

/// Environment variable naming the default adapter endpoints file.
pub const ADAPTERS_ENV: &str = "SYNTHDETECT_ADAPTERS";

pub const DEFAULT_CONFIG_JSON: &str = include_str!("../configs/default.json");

/// A problem found while validating, with the offending field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct CorpusConfig {
    /// Document JSONL produced by `ingest`. Takes precedence over `mock_documents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Number of template documents to generate when no path is given.
    #[serde(default = "default_mock_documents")]
    pub mock_documents: usize,
    #[serde(default)]
    pub domain: Domain,
}

fn default_mock_documents() -> usize {
    4000
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            path: None,
            mock_documents: default_mock_documents(),
            domain: Domain::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSection {
    /// Overrides the plan's `real/real/real` count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_count: Option<usize>,
    #[serde(default = "crate::taxonomy::default_plan")]
    pub plan: Vec<SourceSpec>,
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    #[serde(default = "default_retry")]
    pub retry_budget: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub passage_bounds: SentenceBounds,
}

fn default_threshold() -> f64 {
    crate::synth::DEFAULT_SIMILARITY_THRESHOLD
}

fn default_retry() -> usize {
    crate::assembly::DEFAULT_RETRY_BUDGET
}

impl Default for BuildSection {
    fn default() -> Self {
        Self {
            human_count: None,
            plan: crate::taxonomy::default_plan(),
            similarity_threshold: default_threshold(),
            retry_budget: default_retry(),
            generation: GenerationConfig::default(),
            passage_bounds: SentenceBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default)]
    pub featurizer: FeaturizerConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PathBuf>,
    /// Template pairs to generate when no pairs file is given.
    #[serde(default = "default_mock_pairs")]
    pub mock_pairs: usize,
    /// Endpoint id or `mock:<kind>`.
    #[serde(default = "default_translator")]
    pub translator: String,
}

fn default_mock_pairs() -> usize {
    1000
}

fn default_translator() -> String {
    "mock:lexicon".to_string()
}

impl Default for OodSection {
    fn default() -> Self {
        Self {
            pairs: None,
            mock_pairs: default_mock_pairs(),
            translator: default_translator(),
        }
    }
}

/// Normalized configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub build: BuildSection,
    pub split: SplitSpec,
    pub adapters: Vec<AdapterEndpoint>,
    pub detector: DetectorSection,
    pub ablation: AblationSpec,
    pub ood: OodSection,
}

impl Config {
    pub fn human_count(&self) -> usize {
        self.build.human_count.unwrap_or_else(|| {
            self.build
                .plan
                .iter()
                .find(|s| s.label.is_real())
                .map_or(0, |s| s.count)
        })
    }

    pub fn build_options(&self, workers: usize) -> BuildOptions {
        BuildOptions {
            seed: self.seed,
            similarity_threshold: self.build.similarity_threshold,
            retry_budget: self.build.retry_budget,
            generation: self.build.generation.clone(),
            passage_bounds: self.build.passage_bounds,
            workers,
        }
    }

    pub fn endpoint(&self, id: &str) -> Option<&AdapterEndpoint> {
        self.adapters.iter().find(|a| a.id == id)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Default mock kind for a source when mock adapters are forced.
pub fn default_mock_kind(tech: TechnologyType, procedure: Procedure) -> &'static str {
    match (tech, procedure) {
        (TechnologyType::Generate, Procedure::Extract) => "scigen",
        (TechnologyType::Generate, Procedure::Continue) => "markov",
        (TechnologyType::Paraphrase, _) => "dictionary",
        (TechnologyType::Translate, _) => "shuffle",
        (TechnologyType::Real, _) => "identity",
    }
}

fn section<T: serde::de::DeserializeOwned + Default>(
    root: &serde_json::Map<String, Value>,
    name: &str,
    issues: &mut Vec<ConfigIssue>,
) -> T {
    match root.get(name) {
        None | Some(Value::Null) => T::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            issues.push(ConfigIssue {
                field: name.to_string(),
                message: e.to_string(),
            });
            T::default()
        }),
    }
}

fn seed_of(v: Option<&Value>) -> Option<u64> {
    v.and_then(|s| s.get("seed")).and_then(Value::as_u64)
}

/// Set `a.b.c` in a JSON tree, creating objects on the way. The value is
/// parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override {assignment:?} is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(format!("override {assignment:?} has an empty key"));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| format!("override {assignment:?}: {} is not an object", keys[..i].join(".")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one key")
}

/// Validate a raw configuration tree and fill in defaults.
///
/// `seed` at the top level is the master seed; the split and training seeds
/// default to it when not given explicitly.
pub fn validate_config_value(value: &Value) -> Result<Config, Vec<ConfigIssue>> {
    let mut issues = Vec::new();
    let issue = |field: &str, message: String| ConfigIssue {
        field: field.to_string(),
        message,
    };
    let Some(root) = value.as_object() else {
        return Err(vec![issue("<root>", "configuration must be a JSON object".into())]);
    };
    const KNOWN: [&str; 8] = ["seed", "corpus", "build", "split", "adapters", "detector", "ablation", "ood"];
    for key in root.keys() {
        if !KNOWN.contains(&key.as_str()) {
            issues.push(issue(key, format!("unknown section (expected one of {})", KNOWN.join(", "))));
        }
    }
    let seed = match root.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            issues.push(issue("seed", format!("must be a non-negative integer, got {v}")));
            0
        }),
    };
    let corpus: CorpusConfig = section(root, "corpus", &mut issues);
    let build: BuildSection = section(root, "build", &mut issues);
    let mut split: SplitSpec = section(root, "split", &mut issues);
    let adapters: Vec<AdapterEndpoint> = section(root, "adapters", &mut issues);
    let mut detector: DetectorSection = section(root, "detector", &mut issues);
    let ablation: AblationSpec = section(root, "ablation", &mut issues);
    let ood: OodSection = section(root, "ood", &mut issues);

    split.seed = seed_of(root.get("split")).unwrap_or(seed);
    let train_seed = root.get("detector").and_then(|d| seed_of(d.get("train")));
    detector.train.seed = train_seed.unwrap_or(seed);

    for (field, message) in split.problems() {
        issues.push(issue(&format!("split.{field}"), message));
    }
    for (field, message) in detector.featurizer.problems() {
        issues.push(issue(&format!("detector.featurizer.{field}"), message));
    }
    for (field, message) in detector.train.problems() {
        issues.push(issue(&format!("detector.train.{field}"), message));
    }
    if let Err(message) = build.generation.validate() {
        issues.push(issue("build.generation", message));
    }
    let b = build.passage_bounds;
    if b.min_sentences < 1 || b.min_sentences > b.max_sentences {
        issues.push(issue(
            "build.passage_bounds",
            format!("must satisfy 1 <= min <= max, got {}..{}", b.min_sentences, b.max_sentences),
        ));
    }
    if !(0.0..=1.0).contains(&build.similarity_threshold) {
        issues.push(issue(
            "build.similarity_threshold",
            format!("must lie in [0, 1], got {}", build.similarity_threshold),
        ));
    }
    if corpus.path.is_none() && corpus.mock_documents == 0 {
        issues.push(issue("corpus", "needs a path or a positive mock_documents".into()));
    }

    let mut ids = BTreeSet::new();
    for (i, a) in adapters.iter().enumerate() {
        if let Err(message) = a.validate() {
            issues.push(issue(&format!("adapters[{i}]"), message));
        }
        if !ids.insert(a.id.as_str()) {
            issues.push(issue(&format!("adapters[{i}].id"), format!("duplicate endpoint id {:?}", a.id)));
        }
    }

    let mut seen = BTreeMap::new();
    for (i, s) in build.plan.iter().enumerate() {
        let field = format!("build.plan[{i}]");
        if let Some(first) = seen.insert(s.label.clone(), i) {
            issues.push(issue(&field, format!("label {} already used by build.plan[{first}]", s.label)));
        }
        if s.count == 0 {
            issues.push(issue(&format!("{field}.count"), "must be positive".into()));
        }
        if s.label.is_real() {
            continue;
        }
        if s.procedure == Procedure::Extract && s.label.tech != TechnologyType::Generate {
            issues.push(issue(&format!("{field}.procedure"), "extract applies to generate sources only".into()));
        }
        check_binding(&s.adapter, s.label.tech, &adapters, &format!("{field}.adapter"), &mut issues);
    }
    let human = build.human_count.or_else(|| build.plan.iter().find(|s| s.label.is_real()).map(|s| s.count));
    match human {
        None => issues.push(issue("build.plan", "no real/real/real row and no build.human_count".into())),
        Some(0) => issues.push(issue("build.human_count", "must be positive".into())),
        Some(_) => {}
    }
    check_binding(&ood.translator, TechnologyType::Translate, &adapters, "ood.translator", &mut issues);

    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(Config {
        seed,
        corpus,
        build,
        split,
        adapters,
        detector,
        ablation,
        ood,
    })
}

fn check_binding(
    binding: &str,
    tech: TechnologyType,
    adapters: &[AdapterEndpoint],
    field: &str,
    issues: &mut Vec<ConfigIssue>,
) {
    let found = if let Some(kind) = binding.strip_prefix("mock:") {
        match mock_kind_technology(kind) {
            Some(t) => t,
            None => {
                issues.push(ConfigIssue {
                    field: field.to_string(),
                    message: format!("unknown mock kind {kind:?} (expected one of {})", MOCK_KINDS.join(", ")),
                });
                return;
            }
        }
    } else {
        match adapters.iter().find(|a| a.id == binding) {
            Some(a) => a.kind,
            None => {
                issues.push(ConfigIssue {
                    field: field.to_string(),
                    message: format!("no adapter endpoint with id {binding:?}"),
                });
                return;
            }
        }
    };
    if found != tech {
        issues.push(ConfigIssue {
            field: field.to_string(),
            message: format!("{binding:?} is a {found} adapter but a {tech} adapter is needed"),
        });
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, message: String },
    Override(String),
    Invalid(Vec<ConfigIssue>),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            LoadError::Parse { path, message } => write!(f, "{}: {message}", path.display()),
            LoadError::Override(m) => f.write_str(m),
            LoadError::Invalid(issues) => {
                write!(f, "{} configuration error(s): ", issues.len())?;
                let parts: Vec<String> = issues.iter().map(ToString::to_string).collect();
                f.write_str(&parts.join("; "))
            }
        }
    }
}

impl std::error::Error for LoadError {}

fn read_json(path: &Path) -> Result<Value, LoadError> {
    let raw = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Adapter endpoints from a file holding either a list or `{"adapters": [...]}`.
pub fn read_adapters_file(path: &Path) -> Result<Vec<AdapterEndpoint>, LoadError> {
    let value = read_json(path)?;
    let list = value.get("adapters").cloned().unwrap_or(value);
    serde_json::from_value(list).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load a config file (or the shipped default), merge extra adapter
/// endpoints (replacing same-id entries), apply `key=value` overrides and
/// validate.
pub fn load_config(
    path: Option<&Path>,
    adapters_file: Option<&Path>,
    overrides: &[String],
) -> Result<Config, LoadError> {
    let mut value = match path {
        Some(p) => read_json(p)?,
        None => serde_json::from_str(DEFAULT_CONFIG_JSON).expect("shipped default config parses"),
    };
    if let Some(file) = adapters_file {
        let extra = read_adapters_file(file)?;
        let root = value
            .as_object_mut()
            .ok_or_else(|| LoadError::Invalid(vec![ConfigIssue {
                field: "<root>".into(),
                message: "configuration must be a JSON object".into(),
            }]))?;
        let mut list: Vec<Value> = root
            .get("adapters")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        for endpoint in extra {
            list.retain(|v| v.get("id").and_then(Value::as_str) != Some(endpoint.id.as_str()));
            list.push(serde_json::to_value(&endpoint).expect("endpoint serializes"));
        }
        root.insert("adapters".into(), Value::Array(list));
    }
    for o in overrides {
        apply_override(&mut value, o).map_err(LoadError::Override)?;
    }
    validate_config_value(&value).map_err(LoadError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn shipped_default_is_valid() {
        let cfg = load_config(None, None, &[]).unwrap();
        assert_eq!(cfg.human_count(), 99_064);
        assert_eq!(cfg.build.plan.iter().filter(|s| !s.label.is_real()).map(|s| s.count).sum::<usize>(), 10_475);
        assert_eq!(cfg.split, SplitSpec { seed: cfg.seed, ..Default::default() });
    }

    #[test]
    fn shipped_served_config_needs_the_example_endpoints() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let served = dir.join("served.json");
        match load_config(Some(&served), None, &[]) {
            Err(LoadError::Invalid(issues)) => assert_eq!(issues.len(), 12),
            other => panic!("{other:?}"),
        }
        let cfg = load_config(Some(&served), Some(&dir.join("adapters.example.json")), &[]).unwrap();
        assert_eq!(cfg.adapters.len(), 11);
        let default = load_config(None, None, &[]).unwrap();
        let counts = |c: &Config| c.build.plan.iter().map(|s| (s.label.clone(), s.count)).collect::<Vec<_>>();
        assert_eq!(counts(&cfg), counts(&default));
    }

    #[test]
    fn empty_object_takes_defaults() {
        let cfg = validate_config_value(&json!({"seed": 9})).unwrap();
        assert_eq!(cfg.split.seed, 9);
        assert_eq!(cfg.detector.train.seed, 9);
        assert_eq!(cfg.detector.train.epochs, 20);
        let cfg = validate_config_value(&json!({"seed": 9, "split": {"seed": 2}})).unwrap();
        assert_eq!(cfg.split.seed, 2);
    }

    #[test]
    fn reports_every_problem_at_once() {
        let value = json!({
            "split": {"train_fraction": 0.7, "validation_fraction": 0.1, "test_fraction": 0.1},
            "build": {"plan": [
                {"label": "generate/a/b", "adapter": "mock:markov", "count": 3},
                {"label": "generate/a/b", "adapter": "mock:markov", "count": 4},
                {"label": "paraphrase/x/y", "adapter": "mock:markov", "count": 4},
                {"label": "real/real/real", "adapter": "corpus", "count": 10}
            ]},
            "detector": {"train": {"epochs": 0}},
            "bogus": 1
        });
        let issues = validate_config_value(&value).unwrap_err();
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        assert!(fields.contains(&"split.train_fraction+validation_fraction+test_fraction"), "{fields:?}");
        assert!(fields.contains(&"build.plan[1]"));
        assert!(fields.contains(&"build.plan[2].adapter"));
        assert!(fields.contains(&"detector.train.epochs"));
        assert!(fields.contains(&"bogus"));
    }

    #[test]
    fn unknown_endpoint_and_bad_section_types() {
        let value = json!({
            "build": {"plan": [
                {"label": "translate/g/t", "adapter": "gt", "count": 3},
                {"label": "real/real/real", "adapter": "corpus", "count": 10}
            ]},
            "split": "nope"
        });
        let issues = validate_config_value(&value).unwrap_err();
        assert!(issues.iter().any(|i| i.field == "build.plan[0].adapter"));
        assert!(issues.iter().any(|i| i.field == "split"));

        let ok = json!({
            "adapters": [{"id": "gt", "kind": "translate", "base_url": "http://localhost:9", "model_name": "t", "family": "g", "pivot_language": "es"}],
            "build": {"plan": [
                {"label": "translate/g/t", "adapter": "gt", "count": 3},
                {"label": "real/real/real", "adapter": "corpus", "count": 10}
            ]}
        });
        assert!(validate_config_value(&ok).is_ok());
    }

    #[test]
    fn overrides() {
        let mut v = json!({"split": {"seed": 1}});
        apply_override(&mut v, "split.seed=5").unwrap();
        apply_override(&mut v, "detector.train.epochs=3").unwrap();
        apply_override(&mut v, "ood.translator=mock:reversal").unwrap();
        assert_eq!(v["split"]["seed"], 5);
        assert_eq!(v["detector"]["train"]["epochs"], 3);
        assert_eq!(v["ood"]["translator"], "mock:reversal");
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "split.seed.x=1").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_config(Some(Path::new("/nonexistent/config.json")), None, &[]),
            Err(LoadError::Io { .. })
        ));
    }
}
