use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use revtts::audio::{mel_spectrogram, read_wav, resample, write_mels, write_wav, MelConfig};
use revtts::corpus::{
    audio_file_name, filter_by_word_count, format_manifest, make_variant, read_manifest, AudioPlacement,
    EntryError, Manifest, ManifestFormat, Utterance, Variant, VariantOptions, VariantReport,
};
use revtts::textnorm::{normalize_text, NormPolicy};
use serde::Serialize;

use crate::{usage, write_atomic, Globals};

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Input filelist (`path|text` lines)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Input lines are `id|path|text`
    #[arg(long)]
    ids: bool,
    /// Base directory for relative audio paths (default: the manifest's directory)
    #[arg(long)]
    audio_root: Option<PathBuf>,
    /// Directory receiving manifest.txt, report.json, wavs/ and mels/
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// ftfs, rtrs or rtfs
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    max_words: Option<usize>,
    /// Count words after normalization rather than on the raw text
    #[arg(long)]
    filter_after_normalize: bool,
    /// Hard-link unmodified audio instead of copying it
    #[arg(long)]
    link: bool,
    /// Keep the input sample rate
    #[arg(long)]
    no_resample: bool,
    /// Target sample rate (also the mel front-end rate)
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Also write log-mel spectrograms
    #[arg(long)]
    mels: bool,
}

#[derive(Serialize)]
struct PrepareReport {
    #[serde(flatten)]
    variant: VariantReport,
    filtered_on: &'static str,
    normalization_warnings: Vec<EntryError>,
    sample_rate: Option<u32>,
    resampled: usize,
    mel_files: usize,
    manifest: PathBuf,
}

fn normalize(m: &Manifest, policy: &NormPolicy, warnings: &mut Vec<EntryError>) -> Result<Manifest> {
    let entries = m
        .entries()
        .iter()
        .map(|u| {
            let n = normalize_text(&u.text, policy);
            warnings.extend(n.warnings.into_iter().map(|message| EntryError {
                id: u.id.clone(),
                message,
            }));
            Utterance { text: n.text, ..u.clone() }
        })
        .collect();
    Ok(Manifest::new(entries, m.variant())?)
}

enum Post {
    Kept { utt: Utterance, resampled: bool, mel: bool },
    Failed(EntryError),
}

fn post_process(u: &Utterance, target: Option<u32>, mel: Option<(&MelConfig, &Path)>) -> Post {
    let attempt = || -> Result<(bool, bool)> {
        let needs_audio = target.is_some() || mel.is_some();
        if !needs_audio {
            return Ok((false, false));
        }
        let mut buf = read_wav(&u.audio_path)?;
        let mut resampled = false;
        if let Some(rate) = target.filter(|&r| r != buf.sample_rate()) {
            buf = resample(&buf, rate)?;
            let mut tmp = u.audio_path.as_os_str().to_owned();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            write_wav(&buf, &tmp)?;
            std::fs::rename(&tmp, &u.audio_path)?;
            resampled = true;
        }
        if let Some((cfg, dir)) = mel {
            let spec = mel_spectrogram(&buf, cfg)?;
            let name = audio_file_name(&u.id).replace(".wav", ".mels");
            write_mels(&spec, dir.join(name))?;
        }
        Ok((resampled, mel.is_some()))
    };
    match attempt() {
        Ok((resampled, mel)) => Post::Kept {
            utt: u.clone(),
            resampled,
            mel,
        },
        Err(e) => Post::Failed(EntryError {
            id: u.id.clone(),
            message: format!("{e:#}"),
        }),
    }
}

pub fn run(a: PrepareArgs, g: &Globals) -> Result<()> {
    let cfg = &g.config;
    let manifest_path = a
        .manifest
        .or_else(|| cfg.paths.manifest.clone())
        .ok_or_else(|| usage("prepare needs --manifest (or paths.manifest in the config)"))?;
    let out_dir = a
        .output_dir
        .or_else(|| cfg.paths.output.clone())
        .ok_or_else(|| usage("prepare needs --output-dir (or paths.output in the config)"))?;
    let audio_root = a
        .audio_root
        .or_else(|| cfg.paths.audio_root.clone())
        .or_else(|| manifest_path.parent().map(Path::to_path_buf));
    let format = if a.ids {
        ManifestFormat::IdPathText
    } else {
        cfg.prepare.manifest_format
    };
    let variant = a.variant.unwrap_or(cfg.prepare.variant);
    let mut filter = cfg.filter;
    filter.min_words = a.min_words.unwrap_or(filter.min_words);
    filter.max_words = a.max_words.unwrap_or(filter.max_words);
    let policy = filter.policy().map_err(|e| usage(e.to_string()))?;
    let after_normalize = a.filter_after_normalize || cfg.prepare.filter_after_normalize;
    let placement = if a.link { AudioPlacement::Link } else { cfg.prepare.placement };
    let mut mel_cfg = cfg.mel.clone();
    if let Some(rate) = a.sample_rate {
        mel_cfg.sample_rate = rate;
    }
    let target_rate = (!a.no_resample && cfg.prepare.resample).then_some(mel_cfg.sample_rate);
    let want_mels = a.mels || cfg.prepare.extract_mels;
    if want_mels {
        mel_cfg.validate()?;
    }

    let input = read_manifest(&manifest_path, format)?;
    let input_count = input.len();
    log::info!("{} entries read from {}", input_count, manifest_path.display());

    let mut warnings = Vec::new();
    let (kept, discarded) = if after_normalize {
        let normalized = normalize(&input, &cfg.normalize, &mut warnings)?;
        let f = filter_by_word_count(&normalized, &policy);
        (f.manifest, f.discarded)
    } else {
        let f = filter_by_word_count(&input, &policy);
        (normalize(&f.manifest, &cfg.normalize, &mut warnings)?, f.discarded)
    };
    log::info!("{} kept, {} discarded by word count", kept.len(), discarded.len());

    let outcome = make_variant(
        &kept,
        variant,
        &out_dir,
        &VariantOptions {
            audio_root,
            placement,
        },
    )?;
    let mut report = outcome.report;

    let mel_dir = out_dir.join("mels");
    if want_mels {
        std::fs::create_dir_all(&mel_dir).with_context(|| format!("creating {}", mel_dir.display()))?;
    }
    let mel = want_mels.then_some((&mel_cfg, mel_dir.as_path()));
    let results: Vec<Post> = outcome
        .manifest
        .entries()
        .par_iter()
        .map(|u| post_process(u, target_rate, mel))
        .collect();

    let (mut entries, mut resampled, mut mel_files) = (Vec::new(), 0, 0);
    for r in results {
        match r {
            Post::Kept { utt, resampled: rs, mel } => {
                resampled += usize::from(rs);
                mel_files += usize::from(mel);
                // paths in the written manifest are relative to the output directory
                let rel = utt.audio_path.strip_prefix(&out_dir).map(Path::to_path_buf).unwrap_or(utt.audio_path.clone());
                entries.push(Utterance { audio_path: rel, ..utt });
            }
            Post::Failed(e) => report.per_entry_errors.push(e),
        }
    }
    let result = Manifest::new(entries, outcome.manifest.variant())?;
    let manifest_file = out_dir.join("manifest.txt");
    write_atomic(&manifest_file, format_manifest(&result, ManifestFormat::IdPathText).as_bytes())?;

    report.input_count = input_count;
    report.output_count = result.len();
    report.discarded = discarded;
    for e in &report.per_entry_errors {
        log::warn!("{}: {}", e.id, e.message);
    }
    let report = PrepareReport {
        variant: report,
        filtered_on: if after_normalize { "normalized" } else { "raw" },
        normalization_warnings: warnings,
        sample_rate: target_rate,
        resampled,
        mel_files,
        manifest: PathBuf::from("manifest.txt"),
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    write_atomic(&out_dir.join("report.json"), json.as_bytes())?;
    g.output.emit(&report)
}
