use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use revtts::audio::MelConfig;
use revtts::corpus::{AudioPlacement, FilterPolicy, ManifestFormat, Variant};
use revtts::eval::{ScoringPolicy, DEFAULT_EOS_EPSILON};
use revtts::textnorm::NormPolicy;
use serde::{Deserialize, Serialize};

/// Everything a run needs, as one TOML document. Command-line flags override
/// individual fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub prepare: PrepareConfig,
    pub filter: FilterConfig,
    pub normalize: NormPolicy,
    pub mel: MelConfig,
    pub tokenizer: TokenizerConfig,
    pub eval: EvalConfig,
    pub session: SessionConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    /// Base for relative audio paths; defaults to the manifest's directory.
    pub audio_root: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub variant: Variant,
    pub manifest_format: ManifestFormat,
    pub placement: AudioPlacement,
    /// Count words after normalization instead of on the raw text.
    pub filter_after_normalize: bool,
    pub resample: bool,
    pub extract_mels: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ftfs,
            manifest_format: ManifestFormat::PathText,
            placement: AudioPlacement::Copy,
            filter_after_normalize: false,
            resample: true,
            extract_mels: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterPolicy::default();
        Self {
            min_words: p.min_words(),
            max_words: p.max_words(),
        }
    }
}

impl FilterConfig {
    pub fn policy(&self) -> Result<FilterPolicy> {
        Ok(FilterPolicy::new(self.min_words, self.max_words)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKindConfig {
    Char,
    Bpe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub kind: TokenizerKindConfig,
    pub vocab_size: usize,
    /// A character count, or `"unlimited"`.
    #[serde(with = "token_limit")]
    pub max_token_len: Option<usize>,
    pub regulate: bool,
}

// TOML has no null, so "no limit" must be spelled out to survive a round trip.
mod token_limit {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Chars(usize),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => Repr::Chars(*n),
            None => Repr::Word("unlimited".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Chars(n) => Ok(Some(n)),
            Repr::Word(w) if w == "unlimited" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "max_token_len must be a number or \"unlimited\", got {w:?}"
            ))),
        }
    }
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            kind: TokenizerKindConfig::Bpe,
            vocab_size: 50,
            max_token_len: Some(2),
            regulate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub max_duration: Option<f64>,
    pub epsilon: f64,
    pub scoring: ScoringPolicy,
    pub asr_command: Option<String>,
    pub confidence: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_duration: None,
            epsilon: DEFAULT_EOS_EPSILON,
            scoring: ScoringPolicy::default(),
            asr_command: None,
            confidence: revtts::eval::DEFAULT_CONFIDENCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub session_id: String,
    pub systems: Vec<String>,
    pub items_per_system: usize,
    pub pairs: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            session_id: "session".into(),
            systems: Vec::new(),
            items_per_system: 8,
            pairs: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
