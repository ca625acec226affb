use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::audio::wav_duration;
use crate::corpus::{resolve_audio, EntryError, Manifest};

pub const DEFAULT_EOS_EPSILON: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationItem {
    pub id: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub id: String,
    pub seconds_a: f64,
    pub seconds_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    pub per_item: Vec<DurationItem>,
    pub total_seconds: f64,
    pub mean_seconds: f64,
}

impl SideStats {
    fn from_items(per_item: Vec<DurationItem>) -> Self {
        let total_seconds: f64 = per_item.iter().map(|d| d.seconds).sum();
        let mean_seconds = total_seconds / per_item.len() as f64;
        Self {
            per_item,
            total_seconds,
            mean_seconds,
        }
    }
}

/// Pairwise comparison of two syntheses of the same utterances. On the
/// scatter plot side a is the x axis, so "below the diagonal" means b is
/// shorter than a.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub n: usize,
    pub a: SideStats,
    pub b: SideStats,
    pub shorter_by_percent: f64,
    pub below_diagonal: usize,
    pub above_diagonal: usize,
    pub on_diagonal: usize,
    pub rows: Vec<ScatterRow>,
    /// Ids present on only one side.
    pub dropped: Vec<String>,
}

/// 100·(total_a − total_b)/total_a.
pub fn shorter_by_percent(total_a: f64, total_b: f64) -> Result<f64> {
    if !(total_a > 0.0 && total_a.is_finite() && total_b.is_finite()) {
        return Err(EvalError::Invalid(format!(
            "shorter-by needs a positive finite reference total, got {total_a}"
        )));
    }
    Ok(100.0 * (total_a - total_b) / total_a)
}

/// Joins the two sides by id (in the order of `a`).
pub fn duration_stats(a: &[DurationItem], b: &[DurationItem]) -> Result<DurationStats> {
    let b_by_id: HashMap<&str, f64> = b.iter().map(|d| (d.id.as_str(), d.seconds)).collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let mut joined = std::collections::HashSet::new();
    for item in a {
        match b_by_id.get(item.id.as_str()) {
            Some(&seconds_b) => {
                joined.insert(item.id.as_str());
                rows.push(ScatterRow {
                    id: item.id.clone(),
                    seconds_a: item.seconds,
                    seconds_b,
                });
            }
            None => dropped.push(item.id.clone()),
        }
    }
    dropped.extend(b.iter().filter(|d| !joined.contains(d.id.as_str())).map(|d| d.id.clone()));
    if rows.is_empty() {
        return Err(EvalError::Invalid("no ids in common between the two sides".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.seconds_a >= 0.0 && r.seconds_b >= 0.0)) {
        return Err(EvalError::Invalid(format!("bad duration for {}", r.id)));
    }

    let side = |f: fn(&ScatterRow) -> f64| {
        SideStats::from_items(rows.iter().map(|r| DurationItem { id: r.id.clone(), seconds: f(r) }).collect())
    };
    let (sa, sb) = (side(|r| r.seconds_a), side(|r| r.seconds_b));
    Ok(DurationStats {
        n: rows.len(),
        shorter_by_percent: shorter_by_percent(sa.total_seconds, sb.total_seconds)?,
        below_diagonal: rows.iter().filter(|r| r.seconds_b < r.seconds_a).count(),
        above_diagonal: rows.iter().filter(|r| r.seconds_b > r.seconds_a).count(),
        on_diagonal: rows.iter().filter(|r| r.seconds_b == r.seconds_a).count(),
        a: sa,
        b: sb,
        rows,
        dropped,
    })
}

pub fn scatter_tsv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("id\tseconds_a\tseconds_b\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\n", r.id, r.seconds_a, r.seconds_b));
    }
    out
}

/// Ids with `seconds >= max_duration - epsilon`, sorted.
pub fn detect_eos_failures(items: &[DurationItem], max_duration: f64, epsilon: f64) -> Result<Vec<String>> {
    if max_duration.is_nan() || max_duration <= 0.0 || !epsilon.is_finite() {
        return Err(EvalError::Invalid(format!(
            "max_duration must be positive, got {max_duration}"
        )));
    }
    let cut = max_duration - epsilon;
    let mut ids: Vec<String> = items
        .iter()
        .filter(|d| d.seconds >= cut)
        .map(|d| d.id.clone())
        .collect();
    ids.sort();
    Ok(ids)
}

/// Reads every entry's WAV header. Unreadable files are reported, not fatal.
pub fn measure_durations(manifest: &Manifest, audio_root: Option<&Path>) -> (Vec<DurationItem>, Vec<EntryError>) {
    let results: Vec<_> = manifest
        .entries()
        .par_iter()
        .map(|u| {
            let path = resolve_audio(&u.audio_path, audio_root);
            wav_duration(&path)
                .map(|seconds| DurationItem { id: u.id.clone(), seconds })
                .map_err(|e| EntryError::from_error(&u.id, &e))
        })
        .collect();
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(d) => items.push(d),
            Err(e) => errors.push(e),
        }
    }
    (items, errors)
}
