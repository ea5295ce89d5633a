//! `mder`: corpus preparation, training, evaluation, tagging and trend
//! mining from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{Overrides, RunConfig, SplitRatio};

#[derive(Parser, Debug)]
#[command(name = "mder", version, about = "Method and dataset entity recognition and trend mining")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory with methods.txt, datasets.txt and blacklist.txt.
    #[arg(long, global = true, value_name = "DIR")]
    lexicon_dir: Option<PathBuf>,
    /// Base directory for relative paths.
    #[arg(long, global = true, env = "MDER_DATA_DIR", value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Remove a model component; repeatable or comma-separated.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    ablation: Vec<Component>,
    /// Augmented training set size as a multiple of the original.
    #[arg(long, global = true)]
    multiplier: Option<f64>,
    /// Never replace an augmented span with its own surface.
    #[arg(long, global = true)]
    no_self: bool,
    /// Independent training runs with consecutive seeds.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Smallest edge weight kept in exported graphs (3 keeps weights > 2).
    #[arg(long, global = true)]
    min_edge_weight: Option<u32>,
    /// Length of the per-year betweenness ranking.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Tab-separated `alias<TAB>canonical` lines.
    #[arg(long, global = true, value_name = "FILE")]
    alias_file: Option<PathBuf>,
    /// Surfaces to drop before canonicalization, one per line.
    #[arg(long, global = true, value_name = "FILE")]
    exclude_file: Option<PathBuf>,
    /// Tab-separated `entity<TAB>category` lines for graph export.
    #[arg(long, global = true, value_name = "FILE")]
    categories_file: Option<PathBuf>,
    /// Maximum training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long = "lr", global = true)]
    learning_rate: Option<f64>,
    /// Sentences per training batch.
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Split proportions as train:val:test.
    #[arg(long, global = true, value_parser = parse_ratio)]
    ratio: Option<SplitRatio>,
    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_ratio(s: &str) -> Result<SplitRatio, String> {
    SplitRatio::parse(s).map_err(|e| e.to_string())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Rule,
    Cnn,
    Attention,
    Crf,
}

impl Component {
    fn name(self) -> &'static str {
        match self {
            Component::Rule => "rule",
            Component::Cnn => "cnn",
            Component::Attention => "attention",
            Component::Crf => "crf",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Segment plain-text paragraphs into an unannotated JSONL corpus.
    Prepare { input: PathBuf, output: PathBuf },
    /// Split a corpus into train, val and test files.
    Split {
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Draw the same number of sentences from each corpus into one.
    Mix {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long)]
        per_area: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate an annotated corpus from a template grammar.
    Synth {
        /// Built-in grammar: nlp, cv, dm or ai.
        #[arg(long, conflicts_with = "grammar")]
        preset: Option<String>,
        /// TOML grammar file.
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(short, long, default_value_t = 200)]
        n: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a tagger and write its checkpoint.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Optional test corpus scored after training.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Checkpoint path; with repeats, one file per seed.
        #[arg(short, long)]
        output: PathBuf,
        /// Per-epoch JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Training report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a checkpoint on an annotated corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        corpus: PathBuf,
        /// Report path; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train on each corpus and test on every corpus.
    Grid {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Tag JSON lines carrying a `text` field; other fields pass through.
    Predict {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
    /// Enlarge a corpus by entity substitution.
    Augment { input: PathBuf, output: PathBuf },
    /// Build per-year co-occurrence graphs, rankings and dataset counts.
    Mine {
        /// JSON lines with paper_id, year, methods and datasets.
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Aggregate evaluation reports into mean, std and recomputed F1.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare { .. } => "prepare",
            Command::Split { .. } => "split",
            Command::Mix { .. } => "mix",
            Command::Synth { .. } => "synth",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Grid { .. } => "grid",
            Command::Predict { .. } => "predict",
            Command::Augment { .. } => "augment",
            Command::Mine { .. } => "mine",
            Command::Report { .. } => "report",
        }
    }
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            lexicon_dir: self.lexicon_dir.clone(),
            data_dir: self.data_dir.clone(),
            ablation: self.ablation.iter().map(|c| c.name().to_string()).collect(),
            multiplier: self.multiplier,
            no_self: self.no_self,
            repeats: self.repeats,
            min_edge_weight: self.min_edge_weight,
            top_k: self.top_k,
            alias_file: self.alias_file.clone(),
            exclude_file: self.exclude_file.clone(),
            categories_file: self.categories_file.clone(),
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            ratio: self.ratio,
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<mder::Error>().map(|m| m.kind()))
        .unwrap_or("runtime")
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_string(), 2),
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = RunConfig::resolve(cli.global.config.as_deref(), &cli.global.overrides())
        .and_then(|run| commands::run(&cli.command, &run));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), format!("{e:#}"), 1),
    }
}
