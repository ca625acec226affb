//! Human listening tests: MOS rating sessions and randomized paired
//! preference tests, with an append-only response journal and offline
//! aggregation.

mod aggregate;
mod journal;
mod plan;
mod state;

pub use aggregate::{
    aggregate_mos, aggregate_preferences, MeanStd, MosAggregate, PreferenceAggregate, SystemMos,
};
pub use journal::{read_journal, Journal, JournalRecord};
pub use plan::{
    build_session, parse_audio_index, AudioIndex, PairItem, RatingItem, SessionPlan, SessionSpec,
};
pub use state::{NextItem, Progress, SessionState, SubmitError};

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub const RUBRIC_JSON: &str = include_str!("../../assets/rubric.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub key: String,
    pub label: String,
    pub levels: BTreeMap<String, String>,
}

/// The score descriptions shown to raters next to each 1–5 selector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub scale: Vec<u8>,
    pub criteria: Vec<Criterion>,
}

pub fn rubric() -> Rubric {
    serde_json::from_str(RUBRIC_JSON).expect("bundled rubric is valid JSON")
}

#[derive(Debug, thiserror::Error)]
pub enum PerceptualError {
    #[error("system {system:?} has {available} usable clips, {required} required")]
    InsufficientAudio {
        system: String,
        available: usize,
        required: usize,
    },
    #[error("invalid session: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PerceptualError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosResponse {
    pub rater_id: String,
    pub item_id: String,
    pub naturalness: u8,
    pub intelligibility: u8,
    /// Unix milliseconds.
    pub timestamp: u64,
}

impl MosResponse {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [("naturalness", self.naturalness), ("intelligibility", self.intelligibility)] {
            if !(1..=5).contains(&v) {
                return Err(format!("{name} must be 1..5, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceResponse {
    pub rater_id: String,
    pub pair_id: String,
    pub choice: Choice,
    /// Unix milliseconds.
    pub timestamp: u64,
}
