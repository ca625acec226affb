use std::io::{BufRead, Read};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use revtts::textnorm::{normalize_text, reverse_text};
use revtts::tokenize::{length_regulate, train_bpe, train_char, TokenizerModel};
use serde::Serialize;

use crate::config::TokenizerKindConfig;
use crate::{write_atomic, Globals};

#[derive(Args, Debug)]
pub struct TextnormArgs {
    /// Keep letter case
    #[arg(long)]
    no_lowercase: bool,
    /// Leave numerals as digits
    #[arg(long)]
    no_expand: bool,
    /// Also reverse each normalized line
    #[arg(long)]
    reverse: bool,
}

pub fn textnorm(a: TextnormArgs, g: &Globals) -> Result<()> {
    let mut policy = g.config.normalize;
    policy.lowercase &= !a.no_lowercase;
    policy.expand_numbers &= !a.no_expand;
    let mut out = String::new();
    for (i, line) in std::io::stdin().lock().lines().enumerate() {
        let line = line.context("reading stdin")?;
        let n = normalize_text(&line, &policy);
        for w in n.warnings {
            log::warn!("line {}: {w}", i + 1);
        }
        out.push_str(&if a.reverse { reverse_text(&n.text) } else { n.text });
        out.push('\n');
    }
    g.output.emit_text(&out)
}

#[derive(Subcommand, Debug)]
pub enum TokenizeCmd {
    /// Learn a tokenizer from text lines
    Train(TrainArgs),
    /// Tokenize lines from stdin, one space-separated token line per input
    Encode(EncodeArgs),
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum KindArg {
    Char,
    Bpe,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training text, one sentence per line
    #[arg(long)]
    input: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Target vocabulary size including base symbols
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Longest token in characters
    #[arg(long)]
    max_token_len: Option<usize>,
    /// Allow tokens of any length
    #[arg(long, conflicts_with = "max_token_len")]
    unlimited: bool,
}

#[derive(Serialize)]
struct TrainSummary {
    kind: &'static str,
    vocab_size: usize,
    merges: usize,
    max_token_len: Option<usize>,
    lines: usize,
    model: PathBuf,
}

pub fn tokenize(cmd: TokenizeCmd, g: &Globals) -> Result<()> {
    match cmd {
        TokenizeCmd::Train(a) => train(a, g),
        TokenizeCmd::Encode(a) => encode(a, g),
    }
}

fn train(a: TrainArgs, g: &Globals) -> Result<()> {
    let cfg = &g.config.tokenizer;
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let kind = match a.kind {
        Some(KindArg::Char) => TokenizerKindConfig::Char,
        Some(KindArg::Bpe) => TokenizerKindConfig::Bpe,
        None => cfg.kind,
    };
    let model = match kind {
        TokenizerKindConfig::Char => train_char(lines.iter().copied())?,
        TokenizerKindConfig::Bpe => {
            let max_len = if a.unlimited { None } else { a.max_token_len.or(cfg.max_token_len) };
            train_bpe(lines.iter().copied(), a.vocab_size.unwrap_or(cfg.vocab_size), max_len)?
        }
    };
    write_atomic(&a.model, (model.to_json() + "\n").as_bytes())?;
    g.output.emit(&TrainSummary {
        kind: match kind {
            TokenizerKindConfig::Char => "char",
            TokenizerKindConfig::Bpe => "bpe",
        },
        vocab_size: model.vocab().len(),
        merges: model.merges().len(),
        max_token_len: model.max_token_len(),
        lines: lines.len(),
        model: a.model,
    })
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Apply the length regulator to each token sequence
    #[arg(long)]
    regulate: bool,
}

fn encode(a: EncodeArgs, g: &Globals) -> Result<()> {
    let text = std::fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model = TokenizerModel::from_json(&text).with_context(|| format!("loading {}", a.model.display()))?;
    let regulate = a.regulate || g.config.tokenizer.regulate;
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).context("reading stdin")?;
    let mut out = String::new();
    for (i, line) in input.lines().enumerate() {
        let mut seq = model.encode(line).with_context(|| format!("line {}", i + 1))?;
        if regulate {
            seq = length_regulate(&seq).with_context(|| format!("line {}", i + 1))?;
        }
        out.push_str(&seq.joined(" "));
        out.push('\n');
    }
    g.output.emit_text(&out)
}
