//! Batch command-line surface for the headline-generation pipeline.
//!
//! Exit codes: 0 success, 2 usage or input-validation error, 1 runtime
//! failure. Progress goes to stderr; data goes to files only.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "headliner", version, about = "News headline generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMode {
    /// First sentence of the article, verbatim.
    First,
    /// First sentence with full stops removed, capped at 25 words.
    FirstModified,
}

#[derive(Subcommand)]
enum Command {
    /// Train a byte-pair encoding tokenizer on a JSONL corpus.
    BpeTrain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle and split a JSONL corpus into train/val/test files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "90:5:5")]
        ratio: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model as described by a run configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue from `<out-dir>/last.ckpt`.
        #[arg(long)]
        resume: bool,
    },
    /// Generate headlines for a JSONL corpus with a trained checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Beam width.
        #[arg(long, default_value_t = 10, conflicts_with = "greedy")]
        beam: usize,
        /// Greedy decoding (equivalent to --beam 1).
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 24)]
        max_length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit first-sentence baselines instead of model output.
    Baseline {
        #[arg(long, value_enum)]
        mode: BaselineMode,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against references with ROUGE and BLEU.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Input-validation failure; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if err.downcast_ref::<UsageError>().is_some() {
        return ExitCode::from(2);
    }
    if let Some(core) = err.downcast_ref::<headliner::Error>() {
        use headliner::Error as E;
        let validation = match core {
            E::Parse { .. }
            | E::MissingField { .. }
            | E::EmptyCorpus
            | E::VocabTooSmall { .. }
            | E::TooFewDocuments { .. }
            | E::InvalidRatio { .. }
            | E::MisalignedFiles { .. }
            | E::BatchBudgetExceeded { .. }
            | E::Checkpoint { .. } => true,
            E::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        };
        return ExitCode::from(if validation { 2 } else { 1 });
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BpeTrain {
            input,
            vocab_size,
            out,
        } => commands::bpe_train(&input, vocab_size, &out),
        Command::Split {
            input,
            ratio,
            seed,
            out_dir,
        } => commands::split(&input, &ratio, seed, &out_dir),
        Command::Train {
            config,
            out_dir,
            resume,
        } => commands::train(&config, &out_dir, resume),
        Command::Generate {
            checkpoint,
            input,
            beam,
            greedy,
            max_length,
            out,
        } => commands::generate(&checkpoint, &input, beam, greedy, max_length, &out),
        Command::Baseline { mode, input, out } => commands::baseline(mode, &input, &out),
        Command::Evaluate {
            predictions,
            references,
            out,
        } => commands::evaluate(&predictions, &references, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}
