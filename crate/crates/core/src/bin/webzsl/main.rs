//! Command-line front end. Every subcommand reads its inputs from files,
//! writes its artifacts and a JSON manifest next to them.
//!
//! Exit status: 0 on success, 1 when a stage fails, 2 on usage errors
//! (bad flags, missing input files).

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use webzsl::pairs::PairMode;
use webzsl::zsl::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "webzsl", version, about = "Word-embedding class prototypes and zero-shot evaluation")]
pub struct Cli {
    /// key=value config file with optional [stage] sections.
    #[arg(long, global = true, env = "WEBZSL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads; 1 makes training bit-reproducible, 0 uses every core.
    #[arg(long, global = true, env = "WEBZSL_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true, env = "WEBZSL_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Manifest path; defaults to a name next to the main output.
    #[arg(long, global = true, env = "WEBZSL_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Tokenize metadata and build the vocabulary.
    Ingest(IngestArgs),
    /// Extract training pairs.
    Pairs(PairsArgs),
    /// Train skip-gram embeddings on a pair file.
    TrainEmbed(TrainEmbedArgs),
    /// Write sparse co-occurrence counts of a pair file.
    ExportCooc(ExportCoocArgs),
    /// Build class prototypes from class names and embeddings.
    Prototypes(PrototypesArgs),
    /// Select hyperparameters and fit a zero-shot model.
    ZslFit(ZslFitArgs),
    /// Rank unseen classes for test features and score the rankings.
    ZslEval(ZslEvalArgs),
    /// Hierarchy diagnostics of a set of predictions.
    Analyze(AnalyzeArgs),
    /// Rerun the pipeline after removing fractions of the corpus.
    AblateCorpus(AblateCorpusArgs),
    /// Accuracy against the number of attributes kept.
    AblateAttributes(AblateAttributesArgs),
    /// Generate a synthetic corpus with matching visual features.
    Synth(SynthArgs),
    /// Full in-memory pipeline from metadata to an accuracy report.
    Run(RunArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// JSON-lines metadata file.
    #[arg(long, env = "WEBZSL_METADATA")]
    pub metadata: PathBuf,
    /// Stop-word list, one per line; a built-in English list otherwise.
    #[arg(long, env = "WEBZSL_STOPWORDS")]
    pub stopwords: Option<PathBuf>,
    /// Pieces kept per concept, in file order.
    #[arg(long, env = "WEBZSL_CAP", default_value_t = webzsl::corpus::DEFAULT_PIECE_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "WEBZSL_MIN_COUNT", default_value_t = 5)]
    pub min_count: u64,
    /// Vocabulary output (word<TAB>count).
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PairsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, env = "WEBZSL_VOCAB")]
    pub vocab: PathBuf,
    #[arg(long, env = "WEBZSL_MODE", default_value_t = PairMode::Voted)]
    pub mode: PairMode,
    /// Candidate records per concept held in memory before external sorting.
    #[arg(long, env = "WEBZSL_MEMORY_RECORDS", default_value_t = 50_000_000)]
    pub memory_records: usize,
    /// Pair output; a `.bin` extension selects the binary format.
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, env = "WEBZSL_DIM", default_value_t = 300)]
    pub dim: usize,
    #[arg(long, env = "WEBZSL_EPOCHS", default_value_t = 25)]
    pub epochs: usize,
    #[arg(long, env = "WEBZSL_LR", default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, env = "WEBZSL_NEGATIVE", default_value_t = 5)]
    pub negative: usize,
    /// Subsampling threshold; 0 disables it.
    #[arg(long, env = "WEBZSL_SAMPLE", default_value_t = 1e-4)]
    pub sample: f64,
    /// Enables subword n-grams (with --maxn).
    #[arg(long, env = "WEBZSL_MINN")]
    pub minn: Option<usize>,
    #[arg(long, env = "WEBZSL_MAXN")]
    pub maxn: Option<usize>,
    #[arg(long, env = "WEBZSL_BUCKETS", default_value_t = webzsl::sgns::DEFAULT_BUCKETS)]
    pub buckets: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainEmbedArgs {
    #[arg(long, env = "WEBZSL_PAIRS")]
    pub pairs: PathBuf,
    #[arg(long, env = "WEBZSL_VOCAB")]
    pub vocab: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Word vectors in word2vec text format.
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
    /// Binary model with subword tables, for out-of-vocabulary lookups.
    #[arg(long, env = "WEBZSL_MODEL_OUT")]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportCoocArgs {
    #[arg(long, env = "WEBZSL_PAIRS")]
    pub pairs: PathBuf,
    #[arg(long, env = "WEBZSL_VOCAB")]
    pub vocab: PathBuf,
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PrototypesArgs {
    /// class_id<TAB>variant|variant|...
    #[arg(long, env = "WEBZSL_CLASS_NAMES")]
    pub class_names: PathBuf,
    /// Word2vec text file or binary model.
    #[arg(long, env = "WEBZSL_EMBEDDINGS")]
    pub embeddings: PathBuf,
    #[arg(long, env = "WEBZSL_NORMALIZE", default_value_t = true, action = clap::ArgAction::Set)]
    pub normalize: bool,
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ZslArgs {
    #[arg(long, env = "WEBZSL_MODEL", default_value_t = ModelKind::LinearS2v)]
    pub model: ModelKind,
    /// Search grid, e.g. `lambda=0.1,1,10;gamma=1,10`; the model's default otherwise.
    #[arg(long, env = "WEBZSL_GRID")]
    pub grid: Option<String>,
    /// Seen classes held out for validation.
    #[arg(long, env = "WEBZSL_VALIDATION_CLASSES", default_value_t = 2)]
    pub validation_classes: usize,
    /// Explicit validation class list, one id per line.
    #[arg(long, env = "WEBZSL_VALIDATION_LIST", conflicts_with = "validation_classes")]
    pub validation_list: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSplitArgs {
    /// Prototype file (class_id followed by the vector on each row).
    #[arg(long, env = "WEBZSL_PROTOTYPES")]
    pub prototypes: PathBuf,
    #[arg(long, env = "WEBZSL_FEATURES")]
    pub features: PathBuf,
    #[arg(long, env = "WEBZSL_LABELS")]
    pub labels: PathBuf,
    #[arg(long, env = "WEBZSL_SEEN")]
    pub seen: PathBuf,
    #[arg(long, env = "WEBZSL_UNSEEN")]
    pub unseen: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ZslFitArgs {
    #[command(flatten)]
    pub data: TrainSplitArgs,
    #[command(flatten)]
    pub zsl: ZslArgs,
    /// Fitted model output.
    #[arg(long, env = "WEBZSL_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ZslEvalArgs {
    #[arg(long, env = "WEBZSL_MODEL_FILE")]
    pub model_file: PathBuf,
    #[arg(long, env = "WEBZSL_PROTOTYPES")]
    pub prototypes: PathBuf,
    #[arg(long, env = "WEBZSL_UNSEEN")]
    pub unseen: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_FEATURES")]
    pub test_features: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_LABELS")]
    pub test_labels: PathBuf,
    #[arg(long, env = "WEBZSL_TOPK", value_delimiter = ',', default_value = "1,5,10")]
    pub topk: Vec<usize>,
    /// Receives metrics.json, predictions.txt and per_class.csv.
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// child_id<TAB>parent_id
    #[arg(long, env = "WEBZSL_TAXONOMY")]
    pub taxonomy: PathBuf,
    /// Ranked class ids per test sample, as written by zsl-eval.
    #[arg(long, env = "WEBZSL_PREDICTIONS")]
    pub predictions: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_LABELS")]
    pub test_labels: PathBuf,
    #[arg(long, env = "WEBZSL_SEEN")]
    pub seen: PathBuf,
    #[arg(long, env = "WEBZSL_UNSEEN")]
    pub unseen: PathBuf,
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, env = "WEBZSL_CLASS_NAMES")]
    pub class_names: PathBuf,
    #[arg(long, env = "WEBZSL_FEATURES")]
    pub features: PathBuf,
    #[arg(long, env = "WEBZSL_LABELS")]
    pub labels: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_FEATURES")]
    pub test_features: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_LABELS")]
    pub test_labels: PathBuf,
    #[arg(long, env = "WEBZSL_SEEN")]
    pub seen: PathBuf,
    #[arg(long, env = "WEBZSL_UNSEEN")]
    pub unseen: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long, env = "WEBZSL_MIN_COUNT", default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, env = "WEBZSL_MODE", default_value_t = PairMode::Voted)]
    pub mode: PairMode,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub zsl: ZslArgs,
    /// l2-normalize prototypes; the model's default otherwise.
    #[arg(long, env = "WEBZSL_NORMALIZE", action = clap::ArgAction::Set)]
    pub normalize: Option<bool>,
    #[arg(long, env = "WEBZSL_TOPK", value_delimiter = ',', default_value = "1,5,10")]
    pub topk: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Receives report.json and per_class.csv.
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateCorpusArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Fractions of pieces removed; the full corpus always runs too.
    #[arg(long, env = "WEBZSL_FRACTIONS", value_delimiter = ',', default_value = "0.5,0.75,0.9")]
    pub fractions: Vec<f64>,
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateAttributesArgs {
    /// Attribute prototypes, one row per class.
    #[arg(long, env = "WEBZSL_ATTRIBUTES")]
    pub attributes: PathBuf,
    #[arg(long, env = "WEBZSL_FEATURES")]
    pub features: PathBuf,
    #[arg(long, env = "WEBZSL_LABELS")]
    pub labels: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_FEATURES")]
    pub test_features: PathBuf,
    #[arg(long, env = "WEBZSL_TEST_LABELS")]
    pub test_labels: PathBuf,
    #[arg(long, env = "WEBZSL_SEEN")]
    pub seen: PathBuf,
    #[arg(long, env = "WEBZSL_UNSEEN")]
    pub unseen: PathBuf,
    /// Attributes kept per setting; all, half, a quarter and an eighth otherwise.
    #[arg(long, env = "WEBZSL_KEEP", value_delimiter = ',')]
    pub keep: Vec<usize>,
    #[arg(long, env = "WEBZSL_RUNS", default_value_t = 10)]
    pub runs: usize,
    #[arg(long, env = "WEBZSL_GRID")]
    pub grid: Option<String>,
    #[arg(long, env = "WEBZSL_VALIDATION_CLASSES", default_value_t = 2)]
    pub validation_classes: usize,
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, env = "WEBZSL_CONCEPTS", default_value_t = 20)]
    pub concepts: usize,
    #[arg(long, env = "WEBZSL_USERS", default_value_t = 200)]
    pub users: usize,
    #[arg(long, env = "WEBZSL_PIECES_PER_CONCEPT", default_value_t = 120)]
    pub pieces_per_concept: usize,
    #[arg(long, env = "WEBZSL_VOCAB_PER_CONCEPT", default_value_t = 6)]
    pub vocab_per_concept: usize,
    #[arg(long, env = "WEBZSL_SHARED_VOCAB", default_value_t = 24)]
    pub shared_vocab: usize,
    #[arg(long, env = "WEBZSL_ATTRIBUTES_PER_CONCEPT", default_value_t = 5)]
    pub attributes_per_concept: usize,
    #[arg(long, env = "WEBZSL_BULK_USERS_FRACTION", default_value_t = 0.0)]
    pub bulk_users_fraction: f64,
    #[arg(long, env = "WEBZSL_BULK_FACTOR", default_value_t = 1)]
    pub bulk_factor: usize,
    #[arg(long = "seen-classes", env = "WEBZSL_SEEN_CLASSES", default_value_t = 10)]
    pub seen: usize,
    #[arg(long, env = "WEBZSL_GROUPS", default_value_t = 5)]
    pub groups: usize,
    #[arg(long, env = "WEBZSL_VISUAL_DIM", default_value_t = 32)]
    pub visual_dim: usize,
    #[arg(long, env = "WEBZSL_TRAIN_PER_CLASS", default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, env = "WEBZSL_TEST_PER_CLASS", default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, env = "WEBZSL_NOISE", default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, env = "WEBZSL_OUT_DIR")]
    pub out_dir: PathBuf,
}

/// Failure classes mapped to exit statuses.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage(webzsl::Error),
}

impl From<webzsl::Error> for CliError {
    fn from(e: webzsl::Error) -> Self {
        CliError::Stage(e)
    }
}

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command();
    let first = cmd.clone().try_get_matches_from(argv.clone())?;
    let config_path = first.get_one::<PathBuf>("config").cloned();
    let Some(path) = config_path else {
        return Cli::from_arg_matches(&first);
    };
    let usage = |msg: String| Cli::command().error(clap::error::ErrorKind::InvalidValue, msg);
    let entries = config::read(&path).map_err(usage)?;
    let extra = config::overrides(&cmd, &first, &entries).map_err(usage)?;
    let mut full = argv;
    full.extend(extra);
    let matches = cmd.try_get_matches_from(full)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WEBZSL_LOG", "warn")).init();
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
