//! `dexter` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 transport error. Logs go to stderr as one JSON object per line;
//! command summaries go to stdout.

mod args;
pub mod config;
mod describe;
mod io;
mod pool;

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::Parser;
use dexter_core::cache::{CacheSource, DescriptionCache};
use dexter_core::classify::{
    class_weights, classify_external, compare_reports, compute_metrics, stratified_split, train_baseline,
    BaselineModel, ClassifyError, DatasetSplit, LabeledText, MetricsReport, Sample, SplitRatios,
};
use dexter_core::corpus::{corpus_stats, load_corpus};
use dexter_core::features::apk::features_from_apk;
use dexter_core::features::{read_features_jsonl, StaticFeatureSet};
use dexter_core::gateway::DescriptionRecord;
use dexter_core::labeling::{label_report_dir, Label, LabeledSample};
use dexter_core::textprep::{preprocess, PreprocessedText, StopwordList};
use serde_json::json;
use thiserror::Error;

use args::{CacheCommand, Cli, Command, CorpusCommand};
pub use config::PipelineConfig;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Transport(_) => 3,
        }
    }
}

pub(crate) fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn init_logging(filter: &str) {
    let filter =
        tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .try_init();
}

/// Parse `argv` (including the program name) and run the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
        }
    };
    init_logging(&cli.log_level);
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            tracing::error!(error = %e, exit_code = e.exit_code(), "command failed");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let cfg = match path {
        Some(p) => PipelineConfig::load(p).map_err(data)?,
        None => PipelineConfig::default(),
    };
    cfg.validate().map_err(data)?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let started = Instant::now();
    let stage = match &cli.command {
        Command::Extract(_) => "extract",
        Command::Label(_) => "label",
        Command::Corpus { .. } => "corpus",
        Command::Describe(_) => "describe",
        Command::Preprocess(_) => "preprocess",
        Command::Split(_) => "split",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Compare(_) => "compare",
        Command::Cache { .. } => "cache",
    };
    let result = match cli.command {
        Command::Extract(a) => extract(&a.inputs, &a.output, pool::workers(a.workers)),
        Command::Label(a) => label(&a.reports, &a.output),
        Command::Corpus {
            command: CorpusCommand::Validate { dir },
        } => corpus_validate(&dir),
        Command::Describe(a) => describe::run(a, cfg),
        Command::Preprocess(a) => preprocess_cmd(&a.input, &a.output, a.stopwords.or(cfg.paths.stopwords)),
        Command::Split(a) => split(&a.labels, &a.output, a.seed.unwrap_or(cfg.seed)),
        Command::Train(a) => {
            let mut tc = cfg.train_config();
            tc.seed = a.seed.unwrap_or(tc.seed);
            tc.learning_rate = a.learning_rate.unwrap_or(tc.learning_rate);
            tc.max_epochs = a.max_epochs.unwrap_or(tc.max_epochs);
            tc.patience = a.patience.unwrap_or(tc.patience);
            if !(tc.learning_rate > 0.0 && tc.learning_rate.is_finite()) {
                return Err(CliError::Usage("--learning-rate must be positive".into()));
            }
            train(&a.split, &a.texts, &a.output, &tc)
        }
        Command::Eval(a) => {
            let out_dir = a.out_dir.unwrap_or_else(|| cfg.paths.output_dir.clone());
            eval(&a.split, &a.texts, a.model.as_deref(), &cfg, &out_dir)
        }
        Command::Compare(a) => compare(&a.a, &a.b, a.label_a, a.label_b),
        Command::Cache {
            command: CacheCommand::Stats { file },
        } => cache_stats(&file),
    };
    tracing::info!(
        stage,
        elapsed_ms = started.elapsed().as_millis() as u64,
        ok = result.is_ok(),
        "stage finished"
    );
    result
}

fn print_summary(v: serde_json::Value) {
    println!("{v}");
}

fn apk_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("apk")))
        .collect();
    out.sort();
    Ok(out)
}

enum Source {
    Apk(PathBuf),
    Dump(Box<StaticFeatureSet>),
}

fn extract(inputs: &[PathBuf], output: &Path, workers: usize) -> Result<(), CliError> {
    let mut sources = Vec::new();
    for input in inputs {
        if input.is_dir() {
            sources.extend(apk_files(input)?.into_iter().map(Source::Apk));
        } else if input.extension().is_some_and(|e| e == "jsonl" || e == "json") {
            let f = std::fs::File::open(input).map_err(|e| data(format!("{}: {e}", input.display())))?;
            let sets = read_features_jsonl(std::io::BufReader::new(f))
                .map_err(|e| data(format!("{}: {e}", input.display())))?;
            sources.extend(sets.into_iter().map(|s| Source::Dump(Box::new(s.normalized()))));
        } else if input.is_file() {
            sources.push(Source::Apk(input.clone()));
        } else {
            return Err(data(format!("input {} does not exist", input.display())));
        }
    }
    let sets = pool::par_map(&sources, workers, |src| match src {
        Source::Dump(s) => Ok((**s).clone()),
        Source::Apk(path) => {
            let t = Instant::now();
            let set = features_from_apk(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            tracing::info!(
                stage = "extract",
                apk_id = %set.apk_id,
                file = %path.display(),
                features = set.len(),
                elapsed_ms = t.elapsed().as_millis() as u64,
            );
            Ok(set)
        }
    })?;
    io::write_jsonl(output, &sets)?;
    print_summary(json!({ "stage": "extract", "apks": sets.len(), "output": output.display().to_string() }));
    Ok(())
}

fn label(reports: &Path, output: &Path) -> Result<(), CliError> {
    let labels = label_report_dir(reports).map_err(data)?;
    io::write_jsonl(output, &labels)?;
    let malicious = labels.iter().filter(|l| l.label == Label::Malicious).count();
    print_summary(json!({
        "stage": "label",
        "labeled": labels.len(),
        "malicious": malicious,
        "benign": labels.len() - malicious,
    }));
    Ok(())
}

fn corpus_validate(dir: &Path) -> Result<(), CliError> {
    let corpus = load_corpus(dir).map_err(data)?;
    let counts: BTreeMap<&str, usize> = corpus_stats(&corpus)
        .into_iter()
        .map(|(c, n)| (c.as_str(), n))
        .collect();
    print_summary(json!({ "stage": "corpus", "valid": true, "entries": corpus.len(), "per_category": counts }));
    Ok(())
}

fn preprocess_cmd(input: &Path, output: &Path, stopwords: Option<PathBuf>) -> Result<(), CliError> {
    let list = match &stopwords {
        Some(p) => StopwordList::load(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
        None => StopwordList::shipped(),
    };
    let records: Vec<DescriptionRecord> = io::read_jsonl(input)?;
    let out = records
        .iter()
        .map(|r| preprocess(r, &list).map_err(data))
        .collect::<Result<Vec<PreprocessedText>, _>>()?;
    io::write_jsonl(output, &out)?;
    print_summary(json!({ "stage": "preprocess", "records": out.len(), "stopwords": list.version() }));
    Ok(())
}

fn split(labels: &Path, output: &Path, seed: u64) -> Result<(), CliError> {
    let labels: Vec<LabeledSample> = io::read_jsonl(labels)?;
    let samples: Vec<Sample> = labels.iter().map(Sample::from).collect();
    let split = stratified_split(&samples, SplitRatios::default(), seed).map_err(data)?;
    io::write_json(output, &split)?;
    print_summary(json!({
        "stage": "split",
        "seed": seed,
        "train": split.train.len(),
        "validation": split.validation.len(),
        "test": split.test.len(),
    }));
    Ok(())
}

fn load_texts(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let texts: Vec<PreprocessedText> = io::read_jsonl(path)?;
    Ok(texts.into_iter().map(|t| (t.apk_id, t.joined)).collect())
}

fn attach_texts(samples: &[Sample], texts: &HashMap<String, String>) -> Result<Vec<LabeledText>, CliError> {
    samples
        .iter()
        .map(|s| {
            let text = texts
                .get(&s.apk_id)
                .ok_or_else(|| data(format!("no preprocessed text for {}", s.apk_id)))?;
            Ok(LabeledText {
                apk_id: s.apk_id.clone(),
                text: text.clone(),
                label: s.label,
            })
        })
        .collect()
}

fn train(split: &Path, texts: &Path, output: &Path, cfg: &dexter_core::classify::TrainConfig) -> Result<(), CliError> {
    let split: DatasetSplit = io::read_json(split)?;
    let texts = load_texts(texts)?;
    let train_set = attach_texts(&split.train, &texts)?;
    let val_set = attach_texts(&split.validation, &texts)?;
    let weights = class_weights(&split.train).map_err(data)?;
    let model = train_baseline(&train_set, &val_set, &weights, cfg).map_err(data)?;
    io::write_json(output, &model)?;
    print_summary(json!({
        "stage": "train",
        "train": train_set.len(),
        "validation": val_set.len(),
        "epochs": model.history.len(),
        "best_epoch": model.best_epoch,
        "class_weights": weights,
    }));
    Ok(())
}

fn classify_error(e: ClassifyError) -> CliError {
    match e {
        ClassifyError::ProtocolError(_) | ClassifyError::Timeout { .. } => CliError::Transport(e.to_string()),
        other => data(other),
    }
}

fn eval(
    split: &Path,
    texts: &Path,
    model: Option<&Path>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(), CliError> {
    let split: DatasetSplit = io::read_json(split)?;
    let texts = load_texts(texts)?;
    let test = attach_texts(&split.test, &texts)?;
    let predicted: Vec<Label> = match (model, &cfg.classifier) {
        (Some(path), _) => {
            let model: BaselineModel = io::read_json(path)?;
            test.iter().map(|t| model.predict(&t.text)).collect()
        }
        (None, config::ClassifierChoice::External { endpoint, timeout_secs }) => {
            let batch: Vec<(String, String)> = test.iter().map(|t| (t.apk_id.clone(), t.text.clone())).collect();
            classify_external(&batch, endpoint, Duration::from_secs(*timeout_secs))
                .map_err(classify_error)?
                .into_iter()
                .map(|p| p.label)
                .collect()
        }
        (None, config::ClassifierChoice::Baseline) => {
            return Err(CliError::Usage("eval needs --model for the baseline classifier".into()))
        }
    };
    let pairs: Vec<(Label, Label)> = test.iter().map(|t| t.label).zip(predicted).collect();
    let report = compute_metrics(&pairs)
        .map_err(classify_error)?
        .with_test_ids(test.iter().map(|t| t.apk_id.as_str()));
    std::fs::create_dir_all(out_dir).map_err(|e| data(format!("{}: {e}", out_dir.display())))?;
    io::write_json(&out_dir.join("metrics.json"), &report)?;
    if let Some(m) = &report.confusion {
        io::write_text(&out_dir.join("confusion.csv"), &m.to_csv())?;
    }
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn file_label(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn compare(a: &Path, b: &Path, label_a: Option<String>, label_b: Option<String>) -> Result<(), CliError> {
    let ra: MetricsReport = io::read_json(a)?;
    let rb: MetricsReport = io::read_json(b)?;
    let la = label_a.unwrap_or_else(|| file_label(a));
    let lb = label_b.unwrap_or_else(|| file_label(b));
    let table = compare_reports(&la, &ra, &lb, &rb).map_err(data)?;
    print!("{}", table.render());
    Ok(())
}

fn cache_stats(file: &Path) -> Result<(), CliError> {
    if !file.is_file() {
        return Err(data(format!("cache file {} does not exist", file.display())));
    }
    let (cache, corrupt) = DescriptionCache::load(file).map_err(data)?;
    let mut per_category: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut corpus, mut llm) = (0, 0);
    for e in cache.dump() {
        *per_category.entry(e.category.as_str()).or_default() += 1;
        match e.source {
            CacheSource::Corpus => corpus += 1,
            CacheSource::Llm => llm += 1,
        }
    }
    print_summary(json!({
        "stage": "cache",
        "entries": cache.len(),
        "per_category": per_category,
        "per_source": { "corpus": corpus, "llm": llm },
        "corrupt_lines": corrupt.iter().map(|c| c.line).collect::<Vec<_>>(),
    }));
    Ok(())
}
