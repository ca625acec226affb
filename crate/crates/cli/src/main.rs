mod config;
mod eval_cmd;
mod mos_cmd;
mod prepare;
mod text_cmd;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

/// Corpus preparation, tokenization and evaluation for forward and reversed
/// text-to-speech experiments.
#[derive(Parser, Debug)]
#[command(name = "revtts", version, about)]
struct Cli {
    /// Worker threads for per-file stages (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Compact single-line JSON output
    #[arg(long, global = true)]
    json: bool,
    /// Write the result document here instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// TOML run configuration; flags override its fields
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize, filter, direction-transform, resample and (optionally)
    /// extract mels for a corpus
    Prepare(prepare::PrepareArgs),
    /// Normalize text lines from stdin to stdout
    Textnorm(text_cmd::TextnormArgs),
    /// Train or apply a tokenizer
    #[command(subcommand)]
    Tokenize(text_cmd::TokenizeCmd),
    /// Word and character error rates of ASR transcripts
    EvalAsr(eval_cmd::AsrArgs),
    /// Duration comparison and end-of-sentence failure detection
    EvalDuration(eval_cmd::DurationArgs),
    /// Slope and diagonality of attention alignment matrices
    EvalAlign(eval_cmd::AlignArgs),
    /// Listening tests
    #[command(subcommand)]
    Mos(mos_cmd::MosCmd),
}

/// Where result documents go.
pub struct Output {
    compact: bool,
    out: Option<PathBuf>,
}

impl Output {
    pub fn emit<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = if self.compact {
            serde_json::to_string(value)?
        } else {
            serde_json::to_string_pretty(value)?
        };
        text.push('\n');
        self.emit_text(&text)
    }

    pub fn emit_text(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_atomic(path, text.as_bytes()),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// A missing or contradictory argument discovered after parsing; exits 2
/// like a clap usage error.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub struct Globals {
    pub seed: Option<u64>,
    pub jobs: usize,
    pub config: config::RunConfig,
    pub output: Output,
}

fn run(cli: Cli) -> Result<()> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .context("starting worker pool")?;
    let g = Globals {
        seed: cli.seed,
        jobs,
        config: config::RunConfig::load_or_default(cli.config.as_deref())?,
        output: Output {
            compact: cli.json,
            out: cli.out,
        },
    };
    match cli.command {
        Command::Prepare(a) => prepare::run(a, &g),
        Command::Textnorm(a) => text_cmd::textnorm(a, &g),
        Command::Tokenize(c) => text_cmd::tokenize(c, &g),
        Command::EvalAsr(a) => eval_cmd::asr(a, &g),
        Command::EvalDuration(a) => eval_cmd::duration(a, &g),
        Command::EvalAlign(a) => eval_cmd::align(a, &g),
        Command::Mos(c) => mos_cmd::run(c, &g),
    }
}

fn main() -> ExitCode {
    // usage errors exit with 2 from inside clap
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
