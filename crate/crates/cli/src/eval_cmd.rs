use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use revtts::corpus::{read_manifest, resolve_audio, EntryError, ManifestFormat};
use revtts::eval::{
    analyze_alignment, detect_eos_failures, duration_stats, improvement, join_transcripts, load_alignment,
    measure_durations, parse_transcripts, scatter_tsv, score, transcribe_with_command, AlignmentDiagnostics,
    DurationItem, DurationStats, EvalReport, Improvement,
};
use serde::{Deserialize, Serialize};

use crate::{usage, write_atomic, Globals};

fn read_transcripts(path: &Path) -> Result<Vec<(String, String)>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_transcripts(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn format_of(ids: bool) -> ManifestFormat {
    if ids {
        ManifestFormat::IdPathText
    } else {
        ManifestFormat::PathText
    }
}

fn root_for(manifest: &Path, root: Option<PathBuf>) -> Option<PathBuf> {
    root.or_else(|| manifest.parent().map(Path::to_path_buf))
}

#[derive(Args, Debug)]
pub struct AsrArgs {
    /// Reference transcripts, `id|text` lines
    #[arg(long)]
    refs: PathBuf,
    /// Hypothesis transcripts, `id|text` lines
    #[arg(long, conflicts_with = "asr_command")]
    hyps: Option<PathBuf>,
    /// Recognizer command run per file; `{audio}` is replaced by the path
    #[arg(long, requires = "audio")]
    asr_command: Option<String>,
    /// Filelist of the synthesized audio to transcribe
    #[arg(long)]
    audio: Option<PathBuf>,
    /// The audio filelist has `id|path|text` lines
    #[arg(long)]
    ids: bool,
    #[arg(long)]
    audio_root: Option<PathBuf>,
    /// Save the recognizer output as `id|text` lines
    #[arg(long)]
    hyps_out: Option<PathBuf>,
    #[arg(long)]
    no_lowercase: bool,
    #[arg(long)]
    no_strip_punctuation: bool,
    #[arg(long)]
    no_expand_numbers: bool,
    /// An earlier eval-asr report to compute the improvement against
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Serialize)]
struct AsrOutput {
    #[serde(flatten)]
    report: EvalReport,
    missing: Vec<String>,
    asr_errors: Vec<EntryError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    improvement: Option<BTreeMap<&'static str, Improvement>>,
}

#[derive(Deserialize)]
struct Baseline {
    wer: f64,
    cer: f64,
}

pub fn asr(a: AsrArgs, g: &Globals) -> Result<()> {
    let mut policy = g.config.eval.scoring;
    policy.lowercase &= !a.no_lowercase;
    policy.strip_punctuation &= !a.no_strip_punctuation;
    policy.expand_numbers &= !a.no_expand_numbers;
    let refs = read_transcripts(&a.refs)?;

    let command = a.asr_command.or_else(|| g.config.eval.asr_command.clone());
    let (hyps, asr_errors) = match (&a.hyps, command) {
        (Some(h), _) => (read_transcripts(h)?, Vec::new()),
        (None, Some(template)) => {
            let audio = a
                .audio
                .as_ref()
                .ok_or_else(|| usage("--asr-command needs --audio"))?;
            let m = read_manifest(audio, format_of(a.ids))?;
            let root = root_for(audio, a.audio_root.clone());
            let items: Vec<(String, PathBuf)> = m
                .entries()
                .iter()
                .map(|u| (u.id.clone(), resolve_audio(&u.audio_path, root.as_deref())))
                .collect();
            let (hyps, errors) = transcribe_with_command(&template, &items, g.jobs);
            if let Some(path) = &a.hyps_out {
                let text: String = hyps.iter().map(|(id, t)| format!("{id}|{t}\n")).collect();
                write_atomic(path, text.as_bytes())?;
            }
            (hyps, errors)
        }
        (None, None) => return Err(usage("eval-asr needs --hyps or --asr-command")),
    };
    for e in &asr_errors {
        log::warn!("{}: {}", e.id, e.message);
    }

    let (pairs, missing) = join_transcripts(&refs, &hyps);
    if !missing.is_empty() {
        log::warn!("{} references have no hypothesis", missing.len());
    }
    let report = score(&pairs, &policy);
    let improvement = match &a.baseline {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let base: Baseline = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Some(BTreeMap::from([
                ("wer", improvement(base.wer, report.wer)?),
                ("cer", improvement(base.cer, report.cer)?),
            ]))
        }
        None => None,
    };
    g.output.emit(&AsrOutput {
        report,
        missing,
        asr_errors,
        improvement,
    })
}

#[derive(Args, Debug)]
pub struct DurationArgs {
    /// Filelist of the reference system's audio (x axis)
    #[arg(long)]
    a: PathBuf,
    /// Filelist of the compared system's audio (y axis)
    #[arg(long)]
    b: Option<PathBuf>,
    /// Filelists have `id|path|text` lines
    #[arg(long)]
    ids: bool,
    #[arg(long)]
    audio_root_a: Option<PathBuf>,
    #[arg(long)]
    audio_root_b: Option<PathBuf>,
    /// Maximum synthesis duration (seconds); enables end-of-sentence failure detection
    #[arg(long)]
    max_duration: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Write scatter rows here as TSV
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SideEos {
    max_duration: f64,
    epsilon: f64,
    count: usize,
    failures: Vec<String>,
}

#[derive(Serialize)]
struct DurationOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<DurationStats>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    eos: BTreeMap<&'static str, SideEos>,
    unreadable: Vec<EntryError>,
}

pub fn duration(a: DurationArgs, g: &Globals) -> Result<()> {
    let format = format_of(a.ids);
    let load = |path: &Path, root: Option<PathBuf>| -> Result<(Vec<DurationItem>, Vec<EntryError>)> {
        let m = read_manifest(path, format)?;
        Ok(measure_durations(&m, root_for(path, root).as_deref()))
    };
    let (items_a, mut unreadable) = load(&a.a, a.audio_root_a.clone())?;
    let side_b = match &a.b {
        Some(b) => {
            let (items, errors) = load(b, a.audio_root_b.clone())?;
            unreadable.extend(errors);
            Some(items)
        }
        None => None,
    };
    for e in &unreadable {
        log::warn!("{}: {}", e.id, e.message);
    }

    let stats = side_b.as_ref().map(|b| duration_stats(&items_a, b)).transpose()?;
    if let (Some(path), Some(s)) = (&a.tsv, &stats) {
        write_atomic(path, scatter_tsv(&s.rows).as_bytes())?;
    }

    let mut eos = BTreeMap::new();
    if let Some(max_duration) = a.max_duration.or(g.config.eval.max_duration) {
        let epsilon = a.epsilon.unwrap_or(g.config.eval.epsilon);
        let sides = std::iter::once(("a", &items_a)).chain(side_b.as_ref().map(|b| ("b", b)));
        for (name, items) in sides {
            let failures = detect_eos_failures(items, max_duration, epsilon)?;
            eos.insert(
                name,
                SideEos {
                    max_duration,
                    epsilon,
                    count: failures.len(),
                    failures,
                },
            );
        }
    } else if stats.is_none() {
        return Err(usage("eval-duration needs --b, --max-duration, or both"));
    }
    g.output.emit(&DurationOutput { stats, eos, unreadable })
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// ALGN binary or dense CSV matrices (decoder steps × encoder steps)
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Minimum R² for a forward/reverse verdict
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Serialize)]
struct AlignOutput<'a> {
    path: &'a Path,
    #[serde(flatten)]
    diagnostics: AlignmentDiagnostics,
}

pub fn align(a: AlignArgs, g: &Globals) -> Result<()> {
    let threshold = a.threshold.unwrap_or(g.config.eval.confidence);
    let mut out = Vec::new();
    for path in &a.paths {
        let m = load_alignment(path)?;
        let diagnostics = analyze_alignment(&m, threshold).with_context(|| format!("analyzing {}", path.display()))?;
        out.push(AlignOutput { path, diagnostics });
    }
    if out.len() == 1 {
        g.output.emit(&out[0].diagnostics)
    } else {
        g.output.emit(&out)
    }
}
