//! Dataset assembly: human passages plus filtered synthetic passages per
//! source, stratified train/validation/test splits and the on-disk formats.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{sample_passages, CorpusError, Document, Passage, SentenceBounds};
use crate::rng::derive_rng;
use crate::synth::{
    back_translate, filter_sample, generate_and_extract, generate_continuation,
    paraphrase_passage, AdapterHandle, GenerationConfig, SynthError,
    DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::taxonomy::{LabelPath, Procedure, SourceRegistry, SourceSpec, TechnologyType};

pub use crate::jsonl::JsonlError;

pub const DEFAULT_RETRY_BUDGET: usize = 10;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("source {label}: accepted {accepted} of {target} after exhausting the retry budget (shortfall {})", target - accepted)]
    Shortfall {
        label: LabelPath,
        accepted: usize,
        target: usize,
    },
    #[error("source {label}: {error}")]
    Synthesis { label: LabelPath, error: SynthError },
    #[error("no adapter bound for {binding:?} (source {label})")]
    MissingAdapter { label: LabelPath, binding: String },
    #[error("source {label} is bound to a {found} adapter")]
    AdapterKind {
        label: LabelPath,
        found: TechnologyType,
    },
    #[error("invalid build plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled passage; the unit of the dataset JSONL format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub label: LabelPath,
    /// `None` until [`assign_splits`] has run; serialized as `null`.
    pub split: Option<Split>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl DatasetRecord {
    /// The generating model named in the label (`real` for human text).
    pub fn source_model(&self) -> &str {
        &self.label.model
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default = "default_train")]
    pub train_fraction: f64,
    #[serde(default = "default_tenth")]
    pub validation_fraction: f64,
    #[serde(default = "default_tenth")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_train() -> f64 {
    0.8
}

fn default_tenth() -> f64 {
    0.1
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: default_train(),
            validation_fraction: default_tenth(),
            test_fraction: default_tenth(),
            seed: 0,
        }
    }
}

impl SplitSpec {
    /// Every violated constraint, by field name.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("train_fraction", self.train_fraction),
            ("validation_fraction", self.validation_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(v > 0.0) {
                out.push((name.to_string(), format!("must be positive, got {v}")));
            }
        }
        let sum = self.train_fraction + self.validation_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            out.push((
                "train_fraction+validation_fraction+test_fraction".to_string(),
                format!("fractions must sum to 1, got {sum}"),
            ));
        }
        out
    }
}

/// Human passage count plus the synthetic sources.
#[derive(Debug, Clone)]
pub struct BuildPlan {
    pub human_count: usize,
    pub registry: SourceRegistry,
}

impl BuildPlan {
    pub fn new(human_count: usize, registry: SourceRegistry) -> Result<Self, BuildError> {
        if human_count == 0 {
            return Err(BuildError::Plan("human_count must be positive".into()));
        }
        Ok(Self {
            human_count,
            registry,
        })
    }

    /// Take the human count from the registry's `real/real/real` row.
    pub fn from_registry(registry: SourceRegistry) -> Result<Self, BuildError> {
        let human = registry
            .real_count()
            .ok_or_else(|| BuildError::Plan("plan has no real/real/real row".into()))?;
        Self::new(human, registry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub passage_bounds: SentenceBounds,
    /// Worker threads (0 = all cores). Never changes the output.
    #[serde(skip)]
    pub workers: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_SIMILARITY_THRESHOLD
}

fn default_retry_budget() -> usize {
    DEFAULT_RETRY_BUDGET
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            retry_budget: DEFAULT_RETRY_BUDGET,
            generation: GenerationConfig::default(),
            passage_bounds: SentenceBounds::default(),
            workers: 0,
        }
    }
}

/// Per-source bookkeeping from a build.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub label: String,
    pub adapter: String,
    pub target: usize,
    pub accepted: usize,
    pub attempts: usize,
    pub rejected_similar: usize,
    pub failed_attempts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub human_passages: usize,
    pub mean_human_tokens: f64,
    pub sources: Vec<SourceReport>,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub records: Vec<DatasetRecord>,
    pub report: BuildReport,
}

struct ItemResult {
    record: Option<DatasetRecord>,
    attempts: usize,
    rejected_similar: usize,
    failed: usize,
}

fn synthesize_once(
    spec: &SourceSpec,
    handle: &AdapterHandle,
    seed_passage: &Passage,
    opts: &BuildOptions,
    rng: &mut crate::rng::SeededRng,
) -> Result<(String, BTreeMap<String, String>), SynthError> {
    let mut extra = BTreeMap::new();
    let text = match spec.label.tech {
        TechnologyType::Generate => match spec.procedure {
            Procedure::Continue => generate_continuation(handle, seed_passage, &opts.generation, rng)?,
            Procedure::Extract => {
                extra.insert("procedure".to_string(), "extract".to_string());
                generate_and_extract(handle, &opts.generation, rng)?
            }
        },
        TechnologyType::Paraphrase => paraphrase_passage(handle, seed_passage)?,
        TechnologyType::Translate => {
            let bt = back_translate(handle, seed_passage)?;
            extra.insert("pivot_language".to_string(), bt.pivot_language);
            extra.insert("pivot_text".to_string(), bt.pivot_text);
            bt.text
        }
        TechnologyType::Real => unreachable!("real sources are not synthesized"),
    };
    Ok((text, extra))
}

fn synthesize_item(
    spec: &SourceSpec,
    handle: &AdapterHandle,
    pool: &[Passage],
    opts: &BuildOptions,
    index: usize,
) -> Result<ItemResult, SynthError> {
    let label = spec.label.to_string();
    let mut rng = derive_rng(opts.seed, &["synth", &label, &index.to_string()]);
    let mut result = ItemResult {
        record: None,
        attempts: 0,
        rejected_similar: 0,
        failed: 0,
    };
    for _ in 0..=opts.retry_budget {
        result.attempts += 1;
        // seed passages are drawn with replacement
        let seed_passage = &pool[rng.random_range(0..pool.len())];
        let (text, extra) = match synthesize_once(spec, handle, seed_passage, opts, &mut rng) {
            Ok(out) => out,
            Err(err @ (SynthError::Transport { .. } | SynthError::Unsupported { .. } | SynthError::Precondition(_))) => {
                return Err(err)
            }
            Err(err) => {
                log::debug!("{label} item {index}: {err}");
                result.failed += 1;
                continue;
            }
        };
        let outcome = filter_sample(seed_passage, text, &spec.label, opts.similarity_threshold);
        if !outcome.accepted {
            result.rejected_similar += 1;
            continue;
        }
        let mut provenance = BTreeMap::from([
            ("seed_passage_id".to_string(), seed_passage.id.clone()),
            ("seed_doc_id".to_string(), seed_passage.doc_id.clone()),
            ("adapter".to_string(), handle.id().to_string()),
            ("model_name".to_string(), handle.endpoint.model_name.clone()),
            ("similarity".to_string(), outcome.similarity.to_string()),
            ("attempts".to_string(), result.attempts.to_string()),
        ]);
        provenance.extend(extra);
        result.record = Some(DatasetRecord {
            id: format!("{label}#{index:06}"),
            text: outcome.text,
            label: spec.label.clone(),
            split: None,
            provenance,
        });
        break;
    }
    Ok(result)
}

/// Assemble human and synthetic records.
///
/// `adapters` maps each source's `adapter` binding to a connected handle.
/// Every synthetic item owns a random stream keyed on (seed, label, item
/// index), so output does not depend on `opts.workers`. Records come out as
/// all human passages first, then each source in plan order.
pub fn build_dataset(
    corpus: &[Document],
    plan: &BuildPlan,
    adapters: &HashMap<String, AdapterHandle>,
    opts: &BuildOptions,
) -> Result<BuildOutput, BuildError> {
    let pool = sample_passages(
        corpus,
        plan.human_count,
        opts.seed,
        opts.passage_bounds,
        opts.workers,
    )?;
    let stats = crate::corpus::passage_stats(&pool);
    log::info!(
        "sampled {} human passages, mean {:.1} whitespace tokens",
        stats.count,
        stats.mean_token_count
    );

    let real = LabelPath::real();
    let mut records: Vec<DatasetRecord> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| DatasetRecord {
            id: format!("{real}#{i:06}"),
            text: p.text.clone(),
            label: real.clone(),
            split: None,
            provenance: BTreeMap::from([
                ("passage_id".to_string(), p.id.clone()),
                ("doc_id".to_string(), p.doc_id.clone()),
            ]),
        })
        .collect();

    let sources: Vec<&SourceSpec> = plan.registry.synthetic().collect();
    let mut handles = Vec::with_capacity(sources.len());
    for spec in &sources {
        let handle = adapters
            .get(&spec.adapter)
            .ok_or_else(|| BuildError::MissingAdapter {
                label: spec.label.clone(),
                binding: spec.adapter.clone(),
            })?;
        if handle.endpoint.kind != spec.label.tech {
            return Err(BuildError::AdapterKind {
                label: spec.label.clone(),
                found: handle.endpoint.kind,
            });
        }
        handles.push(handle);
    }

    let per_source: Vec<Result<(Vec<DatasetRecord>, SourceReport), BuildError>> =
        crate::parallel::install(opts.workers, || {
            sources
                .par_iter()
                .zip(handles.par_iter())
                .map(|(spec, handle)| {
                    let items: Vec<ItemResult> = (0..spec.count)
                        .into_par_iter()
                        .map(|i| synthesize_item(spec, handle, &pool, opts, i))
                        .collect::<Result<_, _>>()
                        .map_err(|error| BuildError::Synthesis {
                            label: spec.label.clone(),
                            error,
                        })?;
                    let mut report = SourceReport {
                        label: spec.label.to_string(),
                        adapter: handle.id().to_string(),
                        target: spec.count,
                        ..Default::default()
                    };
                    let mut accepted = Vec::with_capacity(spec.count);
                    for item in items {
                        report.attempts += item.attempts;
                        report.rejected_similar += item.rejected_similar;
                        report.failed_attempts += item.failed;
                        accepted.extend(item.record);
                    }
                    report.accepted = accepted.len();
                    Ok((accepted, report))
                })
                .collect()
        });

    let mut report = BuildReport {
        human_passages: pool.len(),
        mean_human_tokens: stats.mean_token_count,
        sources: Vec::new(),
    };
    for (result, spec) in per_source.into_iter().zip(&sources) {
        let (accepted, source_report) = result?;
        if accepted.len() < spec.count {
            return Err(BuildError::Shortfall {
                label: spec.label.clone(),
                accepted: accepted.len(),
                target: spec.count,
            });
        }
        records.extend(accepted);
        report.sources.push(source_report);
    }
    Ok(BuildOutput { records, report })
}

/// Stratified split assignment.
///
/// Within each label group of size `m` (shuffled with a stream keyed on the
/// split seed and the label), the first `floor(train_fraction * m)` records
/// go to train, the next `floor(validation_fraction * m)` to validation and
/// the remainder to test. Record order is preserved.
pub fn assign_splits(mut records: Vec<DatasetRecord>, spec: &SplitSpec) -> Vec<DatasetRecord> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.label.to_string()).or_default().push(i);
    }
    for (label, mut members) in groups {
        let mut rng = derive_rng(spec.seed, &["split", &label]);
        members.shuffle(&mut rng);
        let m = members.len() as f64;
        // the epsilon absorbs products like 0.7 * 10 = 7.000000000000001 / 6.9999...
        let n_train = (spec.train_fraction * m + 1e-9).floor() as usize;
        let n_val = (spec.validation_fraction * m + 1e-9).floor() as usize;
        for (rank, idx) in members.into_iter().enumerate() {
            records[idx].split = Some(if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            });
        }
    }
    records
}

/// Records of one split, in dataset order.
pub fn split_records(records: &[DatasetRecord], split: Split) -> Vec<DatasetRecord> {
    records
        .iter()
        .filter(|r| r.split == Some(split))
        .cloned()
        .collect()
}

pub fn write_jsonl(records: &[DatasetRecord], path: &Path) -> Result<(), JsonlError> {
    crate::jsonl::write_jsonl(records, path)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetRecord>, JsonlError> {
    crate::jsonl::read_jsonl(path)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    text: &'a str,
    binary_label: &'static str,
    multiclass_label: &'static str,
    split: &'static str,
}

/// Flat CSV export without provenance: `id,text,binary_label,multiclass_label,split`.
/// `multiclass_label` is the technology type.
pub fn write_csv(records: &[DatasetRecord], path: &Path) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(CsvRow {
            id: &r.id,
            text: &r.text,
            binary_label: r.label.binary().as_str(),
            multiclass_label: r.label.tech.as_str(),
            split: r.split.map(Split::as_str).unwrap_or(""),
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub per_label: BTreeMap<String, usize>,
    pub per_technology: BTreeMap<String, usize>,
    pub per_split: BTreeMap<String, usize>,
    pub human_fraction: f64,
}

pub fn dataset_stats(records: &[DatasetRecord]) -> DatasetStats {
    let mut stats = DatasetStats {
        total: records.len(),
        ..Default::default()
    };
    for r in records {
        *stats.per_label.entry(r.label.to_string()).or_default() += 1;
        *stats
            .per_technology
            .entry(r.label.tech.to_string())
            .or_default() += 1;
        let split = r.split.map(Split::as_str).unwrap_or("unassigned");
        *stats.per_split.entry(split.to_string()).or_default() += 1;
    }
    let human = stats.per_technology.get("real").copied().unwrap_or(0);
    stats.human_fraction = if records.is_empty() {
        0.0
    } else {
        human as f64 / records.len() as f64
    };
    stats
}

impl fmt::Display for DatasetStats {
    /// Table with one row per label: type, family, model, passages.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:<20} {:<40} {:>9}", "type", "model family", "model", "passages")?;
        for (label, count) in &self.per_label {
            let mut parts = label.splitn(3, '/');
            let (t, fam, model) = (
                parts.next().unwrap_or(""),
                parts.next().unwrap_or(""),
                parts.next().unwrap_or(""),
            );
            writeln!(f, "{t:<12} {fam:<20} {model:<40} {count:>9}")?;
        }
        writeln!(f, "{:<74} {:>9}", "total", self.total)?;
        for (split, count) in &self.per_split {
            writeln!(f, "{:<74} {:>9}", format!("split {split}"), count)?;
        }
        write!(f, "human fraction {:.4}", self.human_fraction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mockdata::{mock_documents, Domain};
    use crate::synth::mock::mock_handle;
    use crate::taxonomy::{registry_from_plan, Procedure};

    fn record(id: &str, label: &str) -> DatasetRecord {
        DatasetRecord {
            id: id.into(),
            text: format!("text of {id}"),
            label: label.parse().unwrap(),
            split: None,
            provenance: BTreeMap::new(),
        }
    }

    fn mock_adapters(docs: &[Document], kinds: &[&str]) -> HashMap<String, AdapterHandle> {
        kinds
            .iter()
            .map(|k| {
                let binding = format!("mock:{k}");
                let h = mock_handle(&binding, k, docs.iter().map(|d| d.text.as_str())).unwrap();
                (binding, h)
            })
            .collect()
    }

    fn spec(label: &str, adapter: &str, count: usize) -> SourceSpec {
        SourceSpec {
            label: label.parse().unwrap(),
            adapter: adapter.into(),
            count,
            procedure: Procedure::Continue,
        }
    }

    #[test]
    fn split_counts_follow_floor_rule() {
        let records: Vec<_> = (0..100).map(|i| record(&i.to_string(), "real/real/real")).collect();
        let out = assign_splits(records, &SplitSpec::default());
        let stats = dataset_stats(&out);
        assert_eq!(stats.per_split["train"], 80);
        assert_eq!(stats.per_split["validation"], 10);
        assert_eq!(stats.per_split["test"], 10);

        let five: Vec<_> = (0..5).map(|i| record(&i.to_string(), "generate/a/b")).collect();
        let out = assign_splits(five, &SplitSpec::default());
        let stats = dataset_stats(&out);
        assert_eq!(stats.per_split.get("train"), Some(&4));
        assert_eq!(stats.per_split.get("validation"), None);
        assert_eq!(stats.per_split.get("test"), Some(&1));
    }

    #[test]
    fn splits_are_deterministic_and_stratified() {
        let mut records = Vec::new();
        for i in 0..37 {
            records.push(record(&format!("r{i}"), "real/real/real"));
        }
        for i in 0..23 {
            records.push(record(&format!("g{i}"), "generate/a/b"));
        }
        let spec = SplitSpec { seed: 3, ..Default::default() };
        let a = assign_splits(records.clone(), &spec);
        let b = assign_splits(records.clone(), &spec);
        assert_eq!(a, b);
        let c = assign_splits(records, &SplitSpec { seed: 4, ..Default::default() });
        assert_ne!(a, c);
        let train_g = a.iter().filter(|r| r.label.model == "b" && r.split == Some(Split::Train)).count();
        let train_r = a.iter().filter(|r| r.label.is_real() && r.split == Some(Split::Train)).count();
        assert_eq!(train_g, 18);
        assert_eq!(train_r, 29);
        assert!(a.iter().all(|r| r.split.is_some()));
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::default().problems().is_empty());
        let bad = SplitSpec { train_fraction: 0.7, ..Default::default() };
        assert_eq!(bad.problems().len(), 1);
        let neg = SplitSpec { test_fraction: -0.1, train_fraction: 1.0, ..Default::default() };
        assert!(neg.problems().iter().any(|(f, _)| f == "test_fraction"));
    }

    #[test]
    fn stats_examples() {
        let mut records: Vec<_> = (0..9).map(|i| record(&i.to_string(), "real/real/real")).collect();
        records.push(record("g", "generate/x/y"));
        let stats = dataset_stats(&records);
        assert_eq!(stats.human_fraction, 0.9);
        assert_eq!(stats.per_technology.values().sum::<usize>(), 10);
        assert_eq!(dataset_stats(&[]), DatasetStats::default());
        let table = stats.to_string();
        assert!(table.contains("generate"));
        assert!(table.contains("human fraction 0.9000"));
    }

    #[test]
    fn small_mock_build() {
        let docs = mock_documents(1, 80, Domain::Physics);
        let plan = BuildPlan::new(
            200,
            registry_from_plan(vec![spec("generate/mock/markov", "mock:markov", 20)]).unwrap(),
        )
        .unwrap();
        let adapters = mock_adapters(&docs, &["markov"]);
        let opts = BuildOptions { seed: 5, workers: 2, ..Default::default() };
        let out = build_dataset(&docs, &plan, &adapters, &opts).unwrap();
        assert_eq!(out.records.len(), 220);
        let stats = dataset_stats(&out.records);
        assert_eq!(stats.per_technology["generate"], 20);
        for r in out.records.iter().filter(|r| !r.label.is_real()) {
            let sim: f64 = r.provenance["similarity"].parse().unwrap();
            assert!(sim <= 0.10);
        }
        assert_eq!(out.report.sources[0].accepted, 20);
    }

    #[test]
    fn build_is_independent_of_worker_count() {
        let docs = mock_documents(2, 50, Domain::Biomed);
        let registry = registry_from_plan(vec![
            spec("generate/mock/markov", "mock:markov", 6),
            spec("paraphrase/mock/dict", "mock:dictionary", 6),
            spec("translate/mock/shuffle", "mock:shuffle", 6),
        ])
        .unwrap();
        let plan = BuildPlan::new(40, registry).unwrap();
        let adapters = mock_adapters(&docs, &["markov", "dictionary", "shuffle"]);
        let one = build_dataset(&docs, &plan, &adapters, &BuildOptions { seed: 9, workers: 1, ..Default::default() }).unwrap();
        let many = build_dataset(&docs, &plan, &adapters, &BuildOptions { seed: 9, workers: 6, ..Default::default() }).unwrap();
        assert_eq!(one.records, many.records);
        let translated = one.records.iter().find(|r| r.label.tech == TechnologyType::Translate).unwrap();
        assert!(translated.provenance.contains_key("pivot_text"));
    }

    #[test]
    fn echo_source_exhausts_retry_budget() {
        let docs = mock_documents(1, 20, Domain::Physics);
        let plan = BuildPlan::new(
            10,
            registry_from_plan(vec![spec("generate/mock/echo", "mock:echo", 3)]).unwrap(),
        )
        .unwrap();
        let adapters = mock_adapters(&docs, &["echo"]);
        let err = build_dataset(&docs, &plan, &adapters, &BuildOptions::default()).unwrap_err();
        match err {
            BuildError::Shortfall { accepted, target, .. } => {
                assert_eq!(accepted, 0);
                assert_eq!(target, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binding_errors() {
        let docs = mock_documents(1, 20, Domain::Physics);
        let plan = BuildPlan::new(
            10,
            registry_from_plan(vec![spec("paraphrase/mock/x", "mock:markov", 3)]).unwrap(),
        )
        .unwrap();
        let adapters = mock_adapters(&docs, &["markov"]);
        assert!(matches!(
            build_dataset(&docs, &plan, &adapters, &BuildOptions::default()),
            Err(BuildError::AdapterKind { .. })
        ));
        assert!(matches!(
            build_dataset(&docs, &plan, &HashMap::new(), &BuildOptions::default()),
            Err(BuildError::MissingAdapter { .. })
        ));
        assert!(BuildPlan::new(0, SourceRegistry::default()).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut records = vec![record("a", "real/real/real"), record("b", "translate/opus/opus-es-en"), record("c", "generate/x/y")];
        records[1].split = Some(Split::Test);
        records[1].provenance.insert("pivot_text".into(), "texto \"citado\"\nlínea".into());
        write_jsonl(&records, &path).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), records);

        std::fs::write(&path, "").unwrap();
        assert!(read_jsonl(&path).unwrap().is_empty());

        let good = serde_json::to_string(&records[0]).unwrap();
        std::fs::write(&path, format!("{good}\n{{broken\n{good}\n")).unwrap();
        match read_jsonl(&path) {
            Err(JsonlError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_export_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut r = record("a,1", "paraphrase/spinbot/spinbot");
        r.split = Some(Split::Train);
        write_csv(&[r], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let mut lines = content.lines();
        assert_eq!(lines.next(), Some("id,text,binary_label,multiclass_label,split"));
        assert_eq!(lines.next(), Some("\"a,1\",\"text of a,1\",machine,paraphrase,train"));
    }
}
