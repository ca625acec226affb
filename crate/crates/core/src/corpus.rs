//! Filelist manifests and the three direction variants of a text-speech
//! corpus: forward text with forward speech (`ftfs`), reversed text with
//! reversed speech (`rtrs`) and reversed text with forward speech (`rtfs`).

use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioError};
use crate::textnorm::reverse_text;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("invalid filter policy: min_words={min} max_words={max}")]
    Policy { min: usize, max: usize },
    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("applying {applied} to a {current} manifest gives forward text with reversed audio")]
    UnsupportedComposition { current: Variant, applied: Variant },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

impl Direction {
    fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Ftfs,
    Rtrs,
    Rtfs,
}

impl Variant {
    pub fn text_direction(self) -> Direction {
        match self {
            Variant::Ftfs => Direction::Forward,
            Variant::Rtrs | Variant::Rtfs => Direction::Reverse,
        }
    }

    pub fn audio_direction(self) -> Direction {
        match self {
            Variant::Ftfs | Variant::Rtfs => Direction::Forward,
            Variant::Rtrs => Direction::Reverse,
        }
    }

    pub fn from_directions(text: Direction, audio: Direction) -> Option<Self> {
        match (text, audio) {
            (Direction::Forward, Direction::Forward) => Some(Variant::Ftfs),
            (Direction::Reverse, Direction::Reverse) => Some(Variant::Rtrs),
            (Direction::Reverse, Direction::Forward) => Some(Variant::Rtfs),
            (Direction::Forward, Direction::Reverse) => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ftfs => "ftfs",
            Variant::Rtrs => "rtrs",
            Variant::Rtfs => "rtfs",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ftfs" => Ok(Variant::Ftfs),
            "rtrs" => Ok(Variant::Rtrs),
            "rtfs" => Ok(Variant::Rtfs),
            other => Err(format!("unknown variant {other:?} (expected ftfs, rtrs or rtfs)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub audio_path: PathBuf,
    pub text: String,
    pub text_direction: Direction,
    pub audio_direction: Direction,
}

impl Utterance {
    pub fn new(id: impl Into<String>, audio_path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            audio_path: audio_path.into(),
            text: text.into(),
            text_direction: Direction::Forward,
            audio_direction: Direction::Forward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    entries: Vec<Utterance>,
    variant: Variant,
}

impl Manifest {
    pub fn new(entries: Vec<Utterance>, variant: Variant) -> Result<Self> {
        let mut ids = std::collections::HashSet::new();
        for u in &entries {
            if u.id.is_empty() {
                return Err(CorpusError::Invalid("empty utterance id".into()));
            }
            if !ids.insert(u.id.as_str()) {
                return Err(CorpusError::Invalid(format!("duplicate id {:?}", u.id)));
            }
            if u.text.trim().is_empty() {
                return Err(CorpusError::Invalid(format!("utterance {:?} has empty text", u.id)));
            }
            if u.text_direction != variant.text_direction()
                || u.audio_direction != variant.audio_direction()
            {
                return Err(CorpusError::Invalid(format!(
                    "utterance {:?} directions disagree with variant {variant}",
                    u.id
                )));
            }
        }
        Ok(Self { entries, variant })
    }

    pub fn empty(variant: Variant) -> Self {
        Self {
            entries: Vec::new(),
            variant,
        }
    }

    pub fn entries(&self) -> &[Utterance] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Utterance> {
        self.entries
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rewrites every text through `f`, keeping ids, paths and flags.
    pub fn map_texts(&self, mut f: impl FnMut(&str) -> String) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|u| Utterance {
                text: f(&u.text),
                ..u.clone()
            })
            .collect();
        Self::new(entries, self.variant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ManifestFormat {
    /// `path|text`, ids are zero-based line indices.
    #[default]
    PathText,
    /// `id|path|text`.
    IdPathText,
}

/// Parses a filelist. The first `|` (or the first two in three-field mode)
/// separate fields; the text may contain further `|` characters.
pub fn parse_manifest(reader: impl BufRead, format: ManifestFormat) -> Result<Manifest> {
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (index, line) in reader.lines().enumerate() {
        let lineno = index + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::from("<manifest>"),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: &str| CorpusError::Parse {
            line: lineno,
            message: message.to_string(),
        };
        let (id, rest) = match format {
            ManifestFormat::PathText => (index.to_string(), line),
            ManifestFormat::IdPathText => {
                let (id, rest) = line
                    .split_once('|')
                    .ok_or_else(|| parse_err("expected id|path|text"))?;
                if id.is_empty() {
                    return Err(parse_err("empty id"));
                }
                (id.to_string(), rest)
            }
        };
        let (path, text) = rest
            .split_once('|')
            .ok_or_else(|| parse_err("missing '|' separator"))?;
        if path.trim().is_empty() {
            return Err(parse_err("empty audio path"));
        }
        if text.trim().is_empty() {
            return Err(parse_err("empty text"));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(&format!("duplicate id {id:?}")));
        }
        entries.push(Utterance::new(id, path, text));
    }
    Manifest::new(entries, Variant::Ftfs)
}

pub fn read_manifest(path: impl AsRef<Path>, format: ManifestFormat) -> Result<Manifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(std::io::BufReader::new(file), format)
}

/// Renders the manifest as LF-terminated filelist lines.
pub fn format_manifest(m: &Manifest, format: ManifestFormat) -> String {
    let mut out = String::new();
    for u in &m.entries {
        if format == ManifestFormat::IdPathText {
            out.push_str(&u.id);
            out.push('|');
        }
        out.push_str(&u.audio_path.to_string_lossy());
        out.push('|');
        out.push_str(&u.text);
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    min_words: usize,
    max_words: usize,
}

impl FilterPolicy {
    pub fn new(min_words: usize, max_words: usize) -> Result<Self> {
        if min_words == 0 || max_words < min_words {
            return Err(CorpusError::Policy {
                min: min_words,
                max: max_words,
            });
        }
        Ok(Self {
            min_words,
            max_words,
        })
    }

    pub fn min_words(&self) -> usize {
        self.min_words
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn accepts(&self, text: &str) -> bool {
        (self.min_words..=self.max_words).contains(&word_count(text))
    }
}

impl Default for FilterPolicy {
    /// Keeps sentences of 5 to 40 words inclusive.
    fn default() -> Self {
        Self {
            min_words: 5,
            max_words: 40,
        }
    }
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtered {
    pub manifest: Manifest,
    pub discarded: Vec<String>,
}

pub fn filter_by_word_count(m: &Manifest, policy: &FilterPolicy) -> Filtered {
    let (kept, dropped): (Vec<&Utterance>, Vec<&Utterance>) =
        m.entries.iter().partition(|u| policy.accepts(&u.text));
    Filtered {
        manifest: Manifest {
            entries: kept.into_iter().cloned().collect(),
            variant: m.variant,
        },
        discarded: dropped.into_iter().map(|u| u.id.clone()).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AudioPlacement {
    #[default]
    Copy,
    /// Hard link, falling back to a copy across filesystems.
    Link,
}

#[derive(Clone, Debug, Default)]
pub struct VariantOptions {
    /// Base directory for relative audio paths.
    pub audio_root: Option<PathBuf>,
    pub placement: AudioPlacement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    pub id: String,
    pub message: String,
}

impl EntryError {
    /// Flattens `err` and its causes into one `a: b: c` message.
    pub fn from_error(id: impl Into<String>, err: &dyn std::error::Error) -> Self {
        let mut message = err.to_string();
        let mut cause = err.source();
        while let Some(c) = cause {
            message.push_str(": ");
            message.push_str(&c.to_string());
            cause = c.source();
        }
        Self { id: id.into(), message }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub input_count: usize,
    pub output_count: usize,
    pub discarded: Vec<String>,
    pub per_entry_errors: Vec<EntryError>,
}

#[derive(Clone, Debug)]
pub struct VariantOutcome {
    pub manifest: Manifest,
    pub report: VariantReport,
}

pub fn resolve_audio(path: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    }
}

/// File name used for an utterance's audio inside a variant directory.
pub fn audio_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    format!("{safe}.wav")
}

fn place_audio(src: &Path, dst: &Path, placement: AudioPlacement) -> std::io::Result<()> {
    if dst.exists() {
        std::fs::remove_file(dst)?;
    }
    match placement {
        AudioPlacement::Copy => std::fs::copy(src, dst).map(|_| ()),
        AudioPlacement::Link => std::fs::hard_link(src, dst).or_else(|_| std::fs::copy(src, dst).map(|_| ())),
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    let fail = |source| CorpusError::OutputDir {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".revtts-write-probe");
    std::fs::write(&probe, b"").map_err(fail)?;
    std::fs::remove_file(&probe).map_err(fail)
}

/// Applies the direction transform `applied` to every entry, writing audio
/// under `out_dir/wavs/`. Reversal composes: applying `rtrs` to an `rtrs`
/// manifest yields forward text and audio again. Unreadable audio is reported
/// per entry and the entry is left out of the result.
pub fn make_variant(
    m: &Manifest,
    applied: Variant,
    out_dir: &Path,
    opts: &VariantOptions,
) -> Result<VariantOutcome> {
    let text_dir = match applied.text_direction() {
        Direction::Forward => m.variant.text_direction(),
        Direction::Reverse => m.variant.text_direction().flip(),
    };
    let audio_dir = match applied.audio_direction() {
        Direction::Forward => m.variant.audio_direction(),
        Direction::Reverse => m.variant.audio_direction().flip(),
    };
    let target = Variant::from_directions(text_dir, audio_dir).ok_or(
        CorpusError::UnsupportedComposition {
            current: m.variant,
            applied,
        },
    )?;
    let wav_dir = out_dir.join("wavs");
    ensure_writable(&wav_dir)?;

    let results: Vec<std::result::Result<Utterance, EntryError>> = m
        .entries
        .par_iter()
        .map(|u| {
            let src = resolve_audio(&u.audio_path, opts.audio_root.as_deref());
            let dst = wav_dir.join(audio_file_name(&u.id));
            transform_entry(applied, &src, &dst, opts.placement)
                .map(|()| Utterance {
                    id: u.id.clone(),
                    audio_path: dst,
                    text: if applied.text_direction() == Direction::Reverse {
                        reverse_text(&u.text)
                    } else {
                        u.text.clone()
                    },
                    text_direction: text_dir,
                    audio_direction: audio_dir,
                })
                .map_err(|e| EntryError::from_error(&u.id, &e))
        })
        .collect();

    let mut entries = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(u) => entries.push(u),
            Err(e) => errors.push(e),
        }
    }
    let manifest = Manifest::new(entries, target)?;
    Ok(VariantOutcome {
        report: VariantReport {
            variant: target,
            input_count: m.len(),
            output_count: manifest.len(),
            discarded: Vec::new(),
            per_entry_errors: errors,
        },
        manifest,
    })
}

fn transform_entry(
    applied: Variant,
    src: &Path,
    dst: &Path,
    placement: AudioPlacement,
) -> std::result::Result<(), AudioError> {
    if applied.audio_direction() == Direction::Reverse {
        let buf = audio::read_wav(src)?;
        let tmp = dst.with_extension("wav.tmp");
        audio::write_wav(&audio::reverse_audio(&buf), &tmp)?;
        std::fs::rename(&tmp, dst).map_err(|source| AudioError::Io {
            path: dst.to_path_buf(),
            source,
        })
    } else {
        // validates the header before placing the file
        audio::wav_duration(src)?;
        place_audio(src, dst, placement).map_err(|source| AudioError::Io {
            path: dst.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{read_wav, write_wav, AudioBuffer};
    use proptest::prelude::*;

    fn manifest(texts: &[&str]) -> Manifest {
        Manifest::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Utterance::new(i.to_string(), format!("{i}.wav"), *t))
                .collect(),
            Variant::Ftfs,
        )
        .unwrap()
    }

    #[test]
    fn parses_pipe_filelist() {
        let m = parse_manifest("a.wav|hello world\n".as_bytes(), ManifestFormat::PathText).unwrap();
        assert_eq!(m.len(), 1);
        let u = &m.entries()[0];
        assert_eq!((u.id.as_str(), u.audio_path.to_str().unwrap(), u.text.as_str()), ("0", "a.wav", "hello world"));
        assert_eq!(u.text_direction, Direction::Forward);
        assert_eq!(m.variant(), Variant::Ftfs);

        assert!(parse_manifest("".as_bytes(), ManifestFormat::PathText).unwrap().is_empty());
    }

    #[test]
    fn text_keeps_later_separators() {
        let line = "a.wav|it is 10 a.m.|extra";
        let m = parse_manifest(line.as_bytes(), ManifestFormat::PathText).unwrap();
        let (_, oracle) = line.split_once('|').unwrap();
        assert_eq!(m.entries()[0].text, oracle);
        assert_eq!(oracle, "it is 10 a.m.|extra");
    }

    #[test]
    fn three_field_mode_and_line_ids() {
        let m = parse_manifest("x1|a.wav|hi there\n\nx2|b.wav|yo\n".as_bytes(), ManifestFormat::IdPathText).unwrap();
        assert_eq!(m.entries()[1].id, "x2");
        let m = parse_manifest("a.wav|one\n\nb.wav|two\n".as_bytes(), ManifestFormat::PathText).unwrap();
        assert_eq!(m.entries()[1].id, "2");
        assert_eq!(
            format_manifest(&m, ManifestFormat::IdPathText),
            "0|a.wav|one\n2|b.wav|two\n"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (input, line) in [
            ("a.wav|ok\n|no path\n", 2),
            ("a.wav|   \n", 1),
            ("a.wav|ok\nb.wav|ok\nmissing separator\n", 3),
        ] {
            match parse_manifest(input.as_bytes(), ManifestFormat::PathText) {
                Err(CorpusError::Parse { line: l, .. }) => assert_eq!(l, line, "{input:?}"),
                other => panic!("{input:?}: {other:?}"),
            }
        }
        assert!(matches!(
            parse_manifest("d|a.wav|x\nd|b.wav|y\n".as_bytes(), ManifestFormat::IdPathText),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn crlf_is_tolerated() {
        let m = parse_manifest("a.wav|hi\r\n".as_bytes(), ManifestFormat::PathText).unwrap();
        assert_eq!(m.entries()[0].text, "hi");
    }

    #[test]
    fn word_count_boundaries() {
        let p = FilterPolicy::default();
        let out = filter_by_word_count(&manifest(&["a b c d", "a b c d e", &["w"; 40].join(" "), &["w"; 41].join(" ")]), &p);
        assert_eq!(out.discarded, vec!["0".to_string(), "3".to_string()]);
        assert_eq!(out.manifest.len(), 2);
        assert!(FilterPolicy::new(0, 3).is_err());
        assert!(FilterPolicy::new(6, 5).is_err());
    }

    #[test]
    fn filter_matches_brute_force_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2500);
        let texts: Vec<String> = (0..2500)
            .map(|_| {
                let n = rng.random_range(1..60);
                (0..n).map(|_| "w").collect::<Vec<_>>().join(if rng.random_bool(0.5) { " " } else { "  \t" })
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let m = manifest(&refs);
        let out = filter_by_word_count(&m, &FilterPolicy::default());
        let mut oracle = 0;
        for t in &texts {
            let mut words = 0;
            let mut in_word = false;
            for c in t.chars() {
                if c.is_whitespace() {
                    in_word = false;
                } else if !in_word {
                    in_word = true;
                    words += 1;
                }
            }
            if (5..=40).contains(&words) {
                oracle += 1;
            }
        }
        assert_eq!(out.manifest.len(), oracle);
        assert_eq!(out.manifest.len() + out.discarded.len(), 2500);
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(texts in proptest::collection::vec("[a-z]{1,3}( [a-z]{1,3}){0,12}", 0..30), lo in 1usize..6, span in 0usize..6) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let p = FilterPolicy::new(lo, lo + span).unwrap();
            let once = filter_by_word_count(&manifest(&refs), &p);
            let twice = filter_by_word_count(&once.manifest, &p);
            prop_assert_eq!(&twice.manifest, &once.manifest);
            prop_assert!(twice.discarded.is_empty());
            prop_assert_eq!(once.manifest.len() + once.discarded.len(), refs.len());
        }
    }

    fn fixture(dir: &Path) -> Manifest {
        let mut entries = Vec::new();
        for (i, text) in ["hello world", "the cat sat down"].iter().enumerate() {
            let path = dir.join(format!("src{i}.wav"));
            let samples: Vec<f32> = (0..50).map(|k| (k as f32 * 0.37 + i as f32).sin() * 0.5).collect();
            write_wav(&AudioBuffer::new(samples, 22050).unwrap(), &path).unwrap();
            entries.push(Utterance::new(format!("u{i}"), path, *text));
        }
        Manifest::new(entries, Variant::Ftfs).unwrap()
    }

    #[test]
    fn rtrs_reverses_text_and_audio() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let out = make_variant(&m, Variant::Rtrs, &dir.path().join("rtrs"), &VariantOptions::default()).unwrap();
        assert_eq!(out.manifest.variant(), Variant::Rtrs);
        assert_eq!(out.manifest.entries()[0].text, "dlrow olleh");
        assert_eq!(out.report.output_count, 2);
        for (a, b) in m.entries().iter().zip(out.manifest.entries()) {
            let mut want = read_wav(&a.audio_path).unwrap().into_samples();
            want.reverse();
            assert_eq!(read_wav(&b.audio_path).unwrap().into_samples(), want);
            assert_eq!(b.audio_direction, Direction::Reverse);
        }

        let back = make_variant(&out.manifest, Variant::Rtrs, &dir.path().join("back"), &VariantOptions::default()).unwrap();
        assert_eq!(back.manifest.variant(), Variant::Ftfs);
        for (a, b) in m.entries().iter().zip(back.manifest.entries()) {
            assert_eq!(a.text, b.text);
            let x = read_wav(&a.audio_path).unwrap();
            let y = read_wav(&b.audio_path).unwrap();
            assert!(x.samples().iter().zip(y.samples()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn ftfs_and_rtfs_keep_audio_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        for (variant, placement) in [(Variant::Ftfs, AudioPlacement::Copy), (Variant::Rtfs, AudioPlacement::Link)] {
            let opts = VariantOptions { audio_root: None, placement };
            let out = make_variant(&m, variant, &dir.path().join(variant.to_string()), &opts).unwrap();
            assert_eq!(out.manifest.variant(), variant);
            for (a, b) in m.entries().iter().zip(out.manifest.entries()) {
                assert_eq!(std::fs::read(&a.audio_path).unwrap(), std::fs::read(&b.audio_path).unwrap());
                if variant == Variant::Ftfs {
                    assert_eq!(a.text, b.text);
                } else {
                    assert_eq!(b.text, reverse_text(&a.text));
                }
            }
        }
        // a second run over the same output directory replaces the links
        let opts = VariantOptions { audio_root: None, placement: AudioPlacement::Link };
        make_variant(&m, Variant::Rtfs, &dir.path().join("rtfs"), &opts).unwrap();
    }

    #[test]
    fn missing_audio_is_a_per_entry_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = fixture(dir.path()).into_entries();
        entries.push(Utterance::new("gone", dir.path().join("nope.wav"), "where did it go"));
        let m = Manifest::new(entries, Variant::Ftfs).unwrap();
        let out = make_variant(&m, Variant::Rtrs, &dir.path().join("o"), &VariantOptions::default()).unwrap();
        assert_eq!(out.report.input_count, 3);
        assert_eq!(out.report.output_count, 2);
        assert_eq!(out.report.per_entry_errors.len(), 1);
        assert_eq!(out.report.per_entry_errors[0].id, "gone");
        let json = serde_json::to_value(&out.report).unwrap();
        assert_eq!(json["variant"], "rtrs");
    }

    #[test]
    fn unwritable_output_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = make_variant(&m, Variant::Ftfs, &blocker.join("out"), &VariantOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::OutputDir { .. }));
    }

    #[test]
    fn rtfs_on_rtrs_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let r = make_variant(&m, Variant::Rtrs, &dir.path().join("r"), &VariantOptions::default()).unwrap();
        assert!(matches!(
            make_variant(&r.manifest, Variant::Rtfs, &dir.path().join("x"), &VariantOptions::default()),
            Err(CorpusError::UnsupportedComposition { .. })
        ));
    }

    #[test]
    fn relative_paths_resolve_against_root() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let m = Manifest::new(vec![Utterance::new("a", "src0.wav", "hi")], Variant::Ftfs).unwrap();
        let opts = VariantOptions { audio_root: Some(dir.path().to_path_buf()), placement: AudioPlacement::Copy };
        let out = make_variant(&m, Variant::Ftfs, &dir.path().join("o"), &opts).unwrap();
        assert!(out.report.per_entry_errors.is_empty());
    }
}
