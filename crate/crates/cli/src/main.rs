mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsgenre::eval::Stratify;
use lsgenre::features::VectorizerKind;
use lsgenre::models::ModelKind;
use lsgenre::Error;

#[derive(Parser, Debug)]
#[command(name = "lsgenre", version, about = "Classify health-related text by writing style")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML pipeline configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Serve network requests from the recorded fixtures in this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    pub vectorizer: Option<VectorizerKind>,
    #[arg(long, global = true)]
    pub model: Option<ModelKind>,
    /// Minimum calibrated score for a confident label.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read registered sources into a manifest.
    Ingest {
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Directory holding one subdirectory per source.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Retrieval date stamped on documents (YYYY-MM-DD); today if absent.
        #[arg(long)]
        retrieved_at: Option<String>,
        #[arg(long, default_value = "corpus")]
        version: String,
        /// Topic for files placed directly in a source directory.
        #[arg(long)]
        default_topic: Option<String>,
    },
    /// Apply the cleaning rules to every document.
    Clean {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Top terms per class of a cleaned manifest, to spot leftover boilerplate.
    Audit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equalize class counts within each topic.
    Balance {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// File listing the topics to keep, one per line; all topics if absent.
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Resolve DOIs and citation counts for a PMID list.
    Enrich {
        /// Lines of `pmid` or `topic<TAB>pmid`.
        #[arg(long)]
        pmids: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the top-decile selection here.
        #[arg(long)]
        top_decile_out: Option<PathBuf>,
        /// Rank within each topic or across all records.
        #[arg(long, default_value = "per-topic", value_parser = ["per-topic", "global"])]
        scope: String,
        /// Fetch date stamped on records (YYYY-MM-DD); today if absent.
        #[arg(long)]
        fetched_at: Option<String>,
        #[arg(long, default_value_t = 3.0)]
        requests_per_second: f64,
    },
    /// Fit a vectorizer and optionally write document vectors.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        vectors_out: Option<PathBuf>,
        #[arg(long)]
        max_features: Option<usize>,
    },
    /// Stratified train/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Training share.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value = "class-topic")]
        stratify: Stratify,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Train a calibrated classifier on a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_features: Option<usize>,
    },
    /// Score a model on a labeled manifest.
    Evaluate {
        /// Trained model artifact.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// MetricsReport JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Report known and held-out topics separately; needs --train-manifest.
        #[arg(long, value_delimiter = ',')]
        heldout_topics: Option<Vec<String>>,
        #[arg(long)]
        train_manifest: Option<PathBuf>,
    },
    /// Train every model kind and compare them on a test manifest.
    Benchmark {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_features: Option<usize>,
    },
    /// Print per-class scores for text files as JSON lines.
    Classify {
        /// Trained model artifact.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Most used split terms of a forest or largest weights of a linear model.
    Explain {
        /// Trained model artifact.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-means over document embeddings, scored against class labels.
    Cluster {
        /// JSON lines of `{"id", "vector"}`.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_init: usize,
    },
    /// Generate a synthetic four-style corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_cell: usize,
        #[arg(long, default_value_t = 10)]
        topics: usize,
        #[arg(long, default_value_t = 0)]
        holdout_topics: usize,
    },
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_EXTERNAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        e if e.is_external() => EXIT_EXTERNAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
