use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dexter",
    version,
    about = "Static-feature description pipeline and malware classifier for Android apps"
)]
pub struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log filter for the JSON log stream on stderr (e.g. `info`, `debug`).
    #[arg(long, global = true, value_name = "FILTER", default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract static features from APK files or feature dumps.
    Extract(ExtractArgs),
    /// Turn stored scan reports into labels.
    Label(LabelArgs),
    /// Knowledge corpus tools.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Generate a functional description per APK.
    Describe(DescribeArgs),
    /// Clean, filter and stem descriptions.
    Preprocess(PreprocessArgs),
    /// Stratified train/validation/test split of a label file.
    Split(SplitArgs),
    /// Train the baseline classifier.
    Train(TrainArgs),
    /// Evaluate a classifier on the test partition.
    Eval(EvalArgs),
    /// Tabulate metric deltas between two reports.
    Compare(CompareArgs),
    /// Description cache tools.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// APK files, directories of `*.apk`, or `*.jsonl` feature dumps.
    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,
    /// Output JSON Lines file.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// Parallel extraction workers (default: number of processors).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Directory of `<sha256>.json` reports.
    #[arg(long, value_name = "DIR")]
    pub reports: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum CorpusCommand {
    /// Load and check the four category tables; prints per-category counts.
    Validate {
        #[arg(value_name = "DIR")]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum CacheCommand {
    /// Entry counts per category and source.
    Stats {
        #[arg(value_name = "FILE")]
        file: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    AgenticRag,
    Fusion,
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    /// Feature JSON Lines file from `extract`.
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "agentic-rag")]
    pub mode: Mode,
    /// Use the scripted mock transport; unscripted prompts fail.
    #[arg(long)]
    pub offline: bool,
    /// Mock script for `--offline` (default: an empty script).
    #[arg(long, value_name = "FILE", requires = "offline")]
    pub mock_script: Option<PathBuf>,
    /// Append every completion call to this JSON Lines transcript.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Parallel APK workers (default: number of processors).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Minimum similarity for a fuzzy corpus match.
    #[arg(long, value_name = "X")]
    pub fuzzy_threshold: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Description JSON Lines file from `describe`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// Stopword list with a `# version:` header (default: built-in list).
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Label JSON Lines file.
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    /// Output split JSON.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Split JSON from `split`.
    #[arg(long, value_name = "FILE")]
    pub split: PathBuf,
    /// Preprocessed JSON Lines file.
    #[arg(long, value_name = "FILE")]
    pub texts: PathBuf,
    /// Output model JSON.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "X")]
    pub learning_rate: Option<f64>,
    #[arg(long, value_name = "N")]
    pub max_epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    pub patience: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub split: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub texts: PathBuf,
    /// Baseline model JSON; without it the configured classifier is used.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Directory receiving `metrics.json` and `confusion.csv`.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(value_name = "REPORT_A")]
    pub a: PathBuf,
    #[arg(value_name = "REPORT_B")]
    pub b: PathBuf,
    #[arg(long, value_name = "NAME")]
    pub label_a: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub label_b: Option<String>,
}
