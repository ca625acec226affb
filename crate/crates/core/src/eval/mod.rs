//! Objective evaluation of synthesized speech: error rates over ASR
//! transcripts, end-of-sentence failure detection, duration comparison and
//! attention-alignment diagnostics.

mod alignment;
mod asr;
mod duration;
mod edit;
mod score;

pub use alignment::{
    analyze_alignment, load_alignment, parse_alignment_csv, write_alignment, AlignmentDiagnostics,
    AlignmentMatrix, SlopeSign, ALIGNMENT_MAGIC, DEFAULT_CONFIDENCE,
};
pub use asr::transcribe_with_command;
pub use duration::{
    detect_eos_failures, duration_stats, measure_durations, scatter_tsv, shorter_by_percent,
    DurationItem, DurationStats, ScatterRow, DEFAULT_EOS_EPSILON,
};
pub use edit::{edit_distance, EditOps};
pub use score::{
    improvement, join_transcripts, normalize_for_scoring, parse_transcripts, score, EvalReport,
    Improvement, ItemScore, ScoringPolicy, TranscriptPair,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("alignment row {row} sums to zero")]
    ZeroRow { row: usize },
    #[error("alignment cell (row {row}, col {col}) is not a finite non-negative number")]
    BadCell { row: usize, col: usize },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;
