//! Command-line front end. Exit status: 0 on success, 1 on user or
//! configuration errors, 2 on internal errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::assembly::{
    assign_splits, build_dataset, dataset_stats, read_jsonl, split_records, write_csv, write_jsonl, BuildPlan,
    DatasetRecord, Split,
};
use crate::config::{load_config, Config, LoadError, ADAPTERS_ENV};
use crate::corpus::ingest_corpus;
use crate::detector::{technology_classes, Detector};
use crate::experiments::{
    build_ood_set, detector_predictions, evaluate_selective, run_ablation, run_cross_eval, BilingualPair, Scorer,
};
use crate::manifest::Manifest;
use crate::metrics::{evaluate, PredictionRecord};
use crate::mockdata::mock_bilingual_pairs;
use crate::pipeline::{connect_binding, force_mock_plan, load_corpus, resolve_adapters};
use crate::taxonomy::{registry_from_plan, TechnologyType};

#[derive(Debug, Parser)]
#[command(name = "synthdetect", version, about = "Build machine-generated scientific text datasets and train/evaluate detectors")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Configuration file (defaults to the shipped full-scale plan).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's seed fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Adapter endpoints file, merged into the config's `adapters`.
    #[arg(long, global = true, env = ADAPTERS_ENV)]
    adapters: Option<PathBuf>,
    /// Bind every synthetic source and translator to its default mock adapter.
    #[arg(long, global = true)]
    mock: bool,
    /// Override a config field, e.g. `--set detector.train.epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw document JSONL file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "default")]
        collection: String,
    },
    /// Sample human passages, synthesize the plan's sources, assign splits.
    Build {
        /// Ingested document JSONL (overrides `corpus.path`).
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train the four-class detector on a dataset's train split.
    Train {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Score a model or a prediction file, or run a cross-dataset matrix.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, conflicts_with = "predictions")]
        model: Option<PathBuf>,
        /// JSON Lines of {id, gold, predicted, confidence}.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// train, validation, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        /// NAME=PATH; two or more produce a train-on-row, test-on-column matrix.
        #[arg(long = "cross-dataset", value_name = "NAME=PATH")]
        cross: Vec<String>,
    },
    /// Retrain without each held-out source and score per-source subsets.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        /// Model name to hold out (repeatable; overrides the config).
        #[arg(long = "hold-out")]
        hold_out: Vec<String>,
        /// Model name to report (repeatable; default every synthetic model).
        #[arg(long = "subset")]
        subsets: Vec<String>,
    },
    /// Build the out-of-domain set from aligned bilingual pairs.
    Ood {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Translator binding (overrides `ood.translator`).
        #[arg(long)]
        translator: Option<String>,
        /// Detector to score on the resulting set.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Per-label passage counts of a dataset.
    Report {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Validate the configuration and print it with defaults filled in.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Build { .. } => "build",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Ablate { .. } => "ablate",
            Command::Ood { .. } => "ood",
            Command::Report { .. } => "report",
            Command::Validate => "validate",
        }
    }
}

enum CliError {
    User(String),
    Internal(String),
}

type CliResult<T> = Result<T, CliError>;

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

struct Ctx {
    global: GlobalArgs,
    config: Config,
    manifest: Manifest,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.global.output_dir.join(name)
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.add_input(path).map_err(|e| user(format!("{}: {e}", path.display())))
    }

    fn wrote(&mut self, name: &str) -> CliResult<()> {
        self.manifest.add_output(&self.global.output_dir, name).map_err(internal)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(internal)?;
        std::fs::write(self.out(name), text + "\n").map_err(internal)?;
        self.wrote(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        std::fs::write(self.out(name), format!("{text}\n")).map_err(internal)?;
        self.wrote(name)
    }

    fn write_records(&mut self, name: &str, records: &[DatasetRecord]) -> CliResult<()> {
        write_jsonl(records, &self.out(name)).map_err(internal)?;
        self.wrote(name)
    }

    fn read_dataset(&mut self, path: &Path) -> CliResult<Vec<DatasetRecord>> {
        let records = read_jsonl(path).map_err(user)?;
        self.input(path)?;
        Ok(records)
    }
}

fn parse_split(s: &str) -> CliResult<Option<Split>> {
    match s {
        "all" => Ok(None),
        "train" => Ok(Some(Split::Train)),
        "validation" => Ok(Some(Split::Validation)),
        "test" => Ok(Some(Split::Test)),
        other => Err(user(format!("unknown split {other:?} (train, validation, test or all)"))),
    }
}

fn select(records: Vec<DatasetRecord>, split: Option<Split>) -> Vec<DatasetRecord> {
    match split {
        None => records,
        Some(s) => split_records(&records, s),
    }
}

fn cmd_ingest(ctx: &mut Ctx, input: &Path, collection: &str) -> CliResult<()> {
    let file = File::open(input).map_err(|e| user(format!("{}: {e}", input.display())))?;
    let outcome = ingest_corpus(BufReader::new(file), collection).map_err(user)?;
    ctx.input(input)?;
    crate::jsonl::write_jsonl(&outcome.documents, &ctx.out("documents.jsonl")).map_err(internal)?;
    ctx.wrote("documents.jsonl")?;
    crate::jsonl::write_jsonl(&outcome.errors, &ctx.out("ingest_errors.jsonl")).map_err(internal)?;
    ctx.wrote("ingest_errors.jsonl")?;
    println!(
        "ingested {} documents, {} rejected lines",
        outcome.documents.len(),
        outcome.errors.len()
    );
    Ok(())
}

fn cmd_build(ctx: &mut Ctx, corpus: Option<&Path>) -> CliResult<()> {
    if let Some(p) = corpus {
        ctx.config.corpus.path = Some(p.to_path_buf());
    }
    if let Some(p) = ctx.config.corpus.path.clone() {
        ctx.input(&p)?;
    }
    let docs = load_corpus(&ctx.config).map_err(user)?;
    let plan = if ctx.global.mock {
        force_mock_plan(&ctx.config.build.plan)
    } else {
        ctx.config.build.plan.clone()
    };
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let adapters = resolve_adapters(&ctx.config, &plan, &texts).map_err(user)?;
    let registry = registry_from_plan(plan).map_err(user)?;
    let build_plan = BuildPlan::new(ctx.config.human_count(), registry).map_err(user)?;
    let opts = ctx.config.build_options(ctx.global.workers);
    let output = build_dataset(&docs, &build_plan, &adapters, &opts).map_err(user)?;
    let records = assign_splits(output.records, &ctx.config.split);
    let stats = dataset_stats(&records);
    ctx.write_records("dataset.jsonl", &records)?;
    write_csv(&records, &ctx.out("dataset.csv")).map_err(internal)?;
    ctx.wrote("dataset.csv")?;
    ctx.write_json("build_report.json", &output.report)?;
    ctx.write_json("stats.json", &stats)?;
    println!("{stats}");
    Ok(())
}

fn cmd_train(ctx: &mut Ctx, dataset: &Path) -> CliResult<()> {
    let records = ctx.read_dataset(dataset)?;
    let train = split_records(&records, Split::Train);
    if train.is_empty() {
        return Err(user(format!("{}: no train split", dataset.display())));
    }
    let texts: Vec<&str> = train.iter().map(|r| r.text.as_str()).collect();
    let labels: Vec<String> = train.iter().map(|r| r.label.tech.to_string()).collect();
    let det = &ctx.config.detector;
    let (detector, report) =
        Detector::train(&texts, &labels, &technology_classes(), &det.featurizer, &det.train).map_err(user)?;
    detector.save(&ctx.out("model.json")).map_err(internal)?;
    ctx.wrote("model.json")?;
    let validation = split_records(&records, Split::Validation);
    let validation_report = if validation.is_empty() {
        None
    } else {
        Some(multiclass_report(&detector, &validation)?)
    };
    ctx.write_json(
        "train_report.json",
        &json!({
            "train_size": train.len(),
            "vocabulary_size": detector.featurizer.dim(),
            "epoch_losses": report.epoch_losses,
            "final_loss": report.final_loss,
            "validation": validation_report,
        }),
    )?;
    println!(
        "trained on {} passages, vocabulary {}, final loss {:.4}",
        train.len(),
        detector.featurizer.dim(),
        report.final_loss
    );
    if let Some(r) = validation_report {
        println!("validation micro F1 {:.1}", 100.0 * r.micro_f1);
    }
    Ok(())
}

fn multiclass_report(detector: &Detector, records: &[DatasetRecord]) -> CliResult<crate::metrics::EvalReport> {
    let preds = detector_predictions(detector, records);
    let golds: Vec<&str> = preds.iter().map(|p| p.gold.as_str()).collect();
    let predicted: Vec<&str> = preds.iter().map(|p| p.predicted.as_str()).collect();
    let confidences: Vec<f64> = preds.iter().map(|p| p.confidence.unwrap_or(0.0)).collect();
    evaluate(&golds, &predicted, &technology_classes(), Some(&confidences), None).map_err(user)
}

fn load_detector(ctx: &mut Ctx, path: &Path) -> CliResult<Detector> {
    let d = Detector::load(path).map_err(user)?;
    ctx.input(path)?;
    Ok(d)
}

fn cmd_eval(
    ctx: &mut Ctx,
    dataset: Option<&Path>,
    model: Option<&Path>,
    predictions: Option<&Path>,
    split: &str,
    cross: &[String],
) -> CliResult<()> {
    let split = parse_split(split)?;
    if !cross.is_empty() {
        let mut named = Vec::new();
        for c in cross {
            let (name, path) = c
                .split_once('=')
                .ok_or_else(|| user(format!("--cross-dataset {c:?} is not NAME=PATH")))?;
            named.push((name.to_string(), ctx.read_dataset(Path::new(path))?));
        }
        let det = &ctx.config.detector;
        let report = run_cross_eval(&named, &det.featurizer, &det.train).map_err(user)?;
        ctx.write_json("cross_eval.json", &report)?;
        println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?);
        println!("{report}");
        return Ok(());
    }
    let dataset = dataset.ok_or_else(|| user("eval needs --dataset (or --cross-dataset)"))?;
    let records = select(ctx.read_dataset(dataset)?, split);
    if records.is_empty() {
        return Err(user(format!("{}: no records in the selected split", dataset.display())));
    }
    let (multiclass, binary) = match (model, predictions) {
        (Some(m), _) => {
            let detector = load_detector(ctx, m)?;
            let preds = detector_predictions(&detector, &records);
            crate::jsonl::write_jsonl(&preds, &ctx.out("predictions.jsonl")).map_err(internal)?;
            ctx.wrote("predictions.jsonl")?;
            (
                Some(multiclass_report(&detector, &records)?),
                evaluate_selective(Scorer::Detector(&detector), &records).map_err(user)?,
            )
        }
        (None, Some(p)) => {
            let preds: Vec<PredictionRecord> = crate::jsonl::read_jsonl(p).map_err(user)?;
            ctx.input(p)?;
            let binary = evaluate_selective(Scorer::Predictions(&preds), &records).map_err(user)?;
            (multiclass_from_file(&preds, &records)?, binary)
        }
        (None, None) => return Err(user("eval needs --model or --predictions")),
    };
    let report = json!({"multiclass": multiclass, "binary": binary});
    ctx.write_json("eval_report.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?);
    if let Some(m) = &multiclass {
        println!("{m}\n");
    }
    println!("{binary}");
    Ok(())
}

/// Four-class report when every prediction names a technology type.
fn multiclass_from_file(
    preds: &[PredictionRecord],
    records: &[DatasetRecord],
) -> CliResult<Option<crate::metrics::EvalReport>> {
    let by_id: BTreeMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut golds = Vec::new();
    let mut predicted = Vec::new();
    let mut confidences = Vec::new();
    for r in records {
        let Some(p) = by_id.get(r.id.as_str()) else {
            return Ok(None);
        };
        let Ok(tech) = p.predicted.parse::<TechnologyType>() else {
            return Ok(None);
        };
        golds.push(r.label.tech.to_string());
        predicted.push(tech.to_string());
        confidences.push(p.confidence.unwrap_or(0.0));
    }
    evaluate(&golds, &predicted, &technology_classes(), Some(&confidences), None)
        .map(Some)
        .map_err(user)
}

fn cmd_ablate(ctx: &mut Ctx, dataset: &Path, hold_out: &[String], subsets: &[String]) -> CliResult<()> {
    let records = ctx.read_dataset(dataset)?;
    let mut spec = ctx.config.ablation.clone();
    if !hold_out.is_empty() {
        spec.held_out_sources = hold_out.to_vec();
    }
    if !subsets.is_empty() {
        spec.evaluation_subsets = subsets.to_vec();
    }
    let det = &ctx.config.detector;
    let report = run_ablation(&records, &spec, &det.featurizer, &det.train).map_err(user)?;
    ctx.write_json("ablation.json", &report)?;
    println!("{report}");
    Ok(())
}

fn cmd_ood(ctx: &mut Ctx, pairs: Option<&Path>, translator: Option<&str>, model: Option<&Path>) -> CliResult<()> {
    let pairs_path = pairs.map(Path::to_path_buf).or_else(|| ctx.config.ood.pairs.clone());
    let pairs: Vec<BilingualPair> = match &pairs_path {
        Some(p) => {
            let v = crate::jsonl::read_jsonl(p).map_err(user)?;
            ctx.input(p)?;
            v
        }
        None => mock_bilingual_pairs(ctx.config.seed, ctx.config.ood.mock_pairs, ctx.config.corpus.domain),
    };
    let binding = match (translator, ctx.global.mock) {
        (Some(t), _) => t.to_string(),
        (None, true) => "mock:lexicon".to_string(),
        (None, false) => ctx.config.ood.translator.clone(),
    };
    let handle = connect_binding(&ctx.config, &binding, &[]).map_err(user)?;
    let set = build_ood_set(&pairs, &handle).map_err(user)?;
    ctx.write_records("ood_dataset.jsonl", &set.records)?;
    let evaluation = match model {
        Some(m) => {
            let detector = load_detector(ctx, m)?;
            Some(evaluate_selective(Scorer::Detector(&detector), &set.records).map_err(user)?)
        }
        None => None,
    };
    let report = json!({
        "translator": set.translator,
        "pairs": pairs.len(),
        "records": set.records.len(),
        "bleu": set.bleu,
        "evaluation": evaluation,
    });
    ctx.write_json("ood_report.json", &report)?;
    println!("{} pairs -> {} records, BLEU {:.1}", pairs.len(), set.records.len(), set.bleu);
    if let Some(e) = evaluation {
        println!("{e}");
    }
    Ok(())
}

fn cmd_report(ctx: &mut Ctx, dataset: &Path) -> CliResult<()> {
    let records = ctx.read_dataset(dataset)?;
    let stats = dataset_stats(&records);
    ctx.write_json("stats.json", &stats)?;
    ctx.write_text("stats.txt", &stats.to_string())?;
    println!("{stats}");
    Ok(())
}

fn dispatch(cli: Cli, argv: &[String]) -> CliResult<()> {
    let mut overrides = cli.global.overrides.clone();
    if let Some(seed) = cli.global.seed {
        overrides.extend([
            format!("seed={seed}"),
            format!("split.seed={seed}"),
            format!("detector.train.seed={seed}"),
        ]);
    }
    let config = load_config(cli.global.config.as_deref(), cli.global.adapters.as_deref(), &overrides).map_err(
        |e| match e {
            LoadError::Invalid(issues) => {
                let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
                CliError::User(format!("invalid configuration:\n{}", lines.join("\n")))
            }
            other => user(other),
        },
    )?;
    if let Command::Validate = cli.command {
        println!("{}", serde_json::to_string_pretty(&config.to_value()).map_err(internal)?);
        return Ok(());
    }
    std::fs::create_dir_all(&cli.global.output_dir)
        .map_err(|e| user(format!("{}: {e}", cli.global.output_dir.display())))?;
    let command_name = cli.command.name();
    let manifest_config = json!({"config": config.to_value(), "arguments": argv});
    let mut ctx = Ctx {
        manifest: Manifest::new(command_name, config.seed, manifest_config),
        config,
        global: cli.global,
    };
    if let Some(p) = ctx.global.config.clone() {
        ctx.input(&p)?;
    }
    let workers = ctx.global.workers;
    crate::parallel::install(workers, || -> CliResult<()> {
        match &cli.command {
            Command::Ingest { input, collection } => cmd_ingest(&mut ctx, input, collection),
            Command::Build { corpus } => cmd_build(&mut ctx, corpus.as_deref()),
            Command::Train { dataset } => cmd_train(&mut ctx, dataset),
            Command::Eval {
                dataset,
                model,
                predictions,
                split,
                cross,
            } => cmd_eval(&mut ctx, dataset.as_deref(), model.as_deref(), predictions.as_deref(), split, cross),
            Command::Ablate {
                dataset,
                hold_out,
                subsets,
            } => cmd_ablate(&mut ctx, dataset, hold_out, subsets),
            Command::Ood {
                pairs,
                translator,
                model,
            } => cmd_ood(&mut ctx, pairs.as_deref(), translator.as_deref(), model.as_deref()),
            Command::Report { dataset } => cmd_report(&mut ctx, dataset),
            Command::Validate => unreachable!("handled above"),
        }
    })?;
    ctx.manifest.write(&ctx.global.output_dir).map_err(internal)
}

/// Run the CLI on `argv` (program name first) and return the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli, &recorded)));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(CliError::User(msg))) => {
            eprintln!("error: {msg}");
            1
        }
        Ok(Err(CliError::Internal(msg))) => {
            eprintln!("internal error: {msg}\nre-run with RUST_BACKTRACE=1 for a stack trace");
            2
        }
        Err(_) => {
            eprintln!("internal error: the panic above is a bug; re-run with RUST_BACKTRACE=1 for a stack trace");
            2
        }
    }
}

