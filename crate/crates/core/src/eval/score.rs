use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{edit_distance, EvalError, Result};
use crate::textnorm::{normalize_text, NormPolicy};

/// Normalization applied to both reference and hypothesis before scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringPolicy {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub expand_numbers: bool,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            expand_numbers: true,
        }
    }
}

impl ScoringPolicy {
    pub fn verbatim() -> Self {
        Self {
            lowercase: false,
            strip_punctuation: false,
            expand_numbers: false,
        }
    }
}

/// Numerals expanded first (so "1,000" survives), then lowercasing, then
/// every character other than letters, digits, apostrophes and whitespace
/// becomes a space. Whitespace is collapsed to single spaces.
pub fn normalize_for_scoring(s: &str, policy: &ScoringPolicy) -> String {
    let text = normalize_text(
        s,
        &NormPolicy {
            lowercase: policy.lowercase,
            expand_numbers: policy.expand_numbers,
            ..NormPolicy::default()
        },
    )
    .text;
    let text: String = if policy.strip_punctuation {
        text.chars()
            .map(|c| if c.is_alphanumeric() || c == '\'' || c.is_whitespace() { c } else { ' ' })
            .collect()
    } else {
        text
    };
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptPair {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub wer: f64,
    pub cer: f64,
}

/// Micro-averaged error rates in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_items: usize,
    pub wer: f64,
    pub cer: f64,
    pub ref_words: usize,
    pub word_edits: usize,
    pub ref_chars: usize,
    pub char_edits: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub per_item: Vec<ItemScore>,
    pub skipped: Vec<String>,
}

fn percent(edits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * edits as f64 / total as f64
    }
}

struct Scored {
    id: String,
    ref_words: usize,
    ref_chars: usize,
    words: super::EditOps,
    chars: usize,
}

/// Word error rate over whitespace words and character error rate over
/// codepoints (spaces included). Items whose reference normalizes to nothing
/// are skipped and listed.
pub fn score(pairs: &[TranscriptPair], policy: &ScoringPolicy) -> EvalReport {
    let scored: Vec<std::result::Result<Scored, String>> = pairs
        .par_iter()
        .map(|p| {
            let r = normalize_for_scoring(&p.reference, policy);
            if r.is_empty() {
                return Err(p.id.clone());
            }
            let h = normalize_for_scoring(&p.hypothesis, policy);
            let rw: Vec<&str> = r.split_whitespace().collect();
            let hw: Vec<&str> = h.split_whitespace().collect();
            let rc: Vec<char> = r.chars().collect();
            let hc: Vec<char> = h.chars().collect();
            Ok(Scored {
                id: p.id.clone(),
                ref_words: rw.len(),
                ref_chars: rc.len(),
                words: edit_distance(&rw, &hw),
                chars: edit_distance(&rc, &hc).distance,
            })
        })
        .collect();

    let mut report = EvalReport {
        n_items: 0,
        wer: 0.0,
        cer: 0.0,
        ref_words: 0,
        word_edits: 0,
        ref_chars: 0,
        char_edits: 0,
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        per_item: Vec::new(),
        skipped: Vec::new(),
    };
    for s in scored {
        match s {
            Err(id) => report.skipped.push(id),
            Ok(s) => {
                report.n_items += 1;
                report.ref_words += s.ref_words;
                report.word_edits += s.words.distance;
                report.ref_chars += s.ref_chars;
                report.char_edits += s.chars;
                report.substitutions += s.words.substitutions;
                report.insertions += s.words.insertions;
                report.deletions += s.words.deletions;
                report.per_item.push(ItemScore {
                    wer: percent(s.words.distance, s.ref_words),
                    cer: percent(s.chars, s.ref_chars),
                    id: s.id,
                });
            }
        }
    }
    report.wer = percent(report.word_edits, report.ref_words);
    report.cer = percent(report.char_edits, report.ref_chars);
    report
}

/// Reads `id|text` lines. Empty texts are allowed (an ASR engine may return
/// nothing); duplicate ids are not.
pub fn parse_transcripts(reader: impl BufRead) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: "<transcripts>".into(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('|').ok_or_else(|| EvalError::Parse {
            line: i + 1,
            message: "expected id|text".into(),
        })?;
        if id.is_empty() || !seen.insert(id.to_string()) {
            return Err(EvalError::Parse {
                line: i + 1,
                message: format!("empty or duplicate id {id:?}"),
            });
        }
        out.push((id.to_string(), text.to_string()));
    }
    Ok(out)
}

/// Pairs references with hypotheses by id, in reference order. Returns the
/// ids of references that have no hypothesis.
pub fn join_transcripts(
    refs: &[(String, String)],
    hyps: &[(String, String)],
) -> (Vec<TranscriptPair>, Vec<String>) {
    let by_id: HashMap<&str, &str> = hyps.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for (id, reference) in refs {
        match by_id.get(id.as_str()) {
            Some(h) => pairs.push(TranscriptPair {
                id: id.clone(),
                reference: reference.clone(),
                hypothesis: h.to_string(),
            }),
            None => missing.push(id.clone()),
        }
    }
    (pairs, missing)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub absolute: f64,
    pub relative: f64,
}

/// Absolute and relative (percent of `base`) reduction from `base` to `new`.
pub fn improvement(base: f64, new: f64) -> Result<Improvement> {
    if !(base > 0.0 && base.is_finite() && new.is_finite()) {
        return Err(EvalError::Invalid(format!(
            "improvement needs a positive finite base, got {base}"
        )));
    }
    Ok(Improvement {
        absolute: base - new,
        relative: 100.0 * (base - new) / base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(id: &str, r: &str, h: &str) -> TranscriptPair {
        TranscriptPair {
            id: id.into(),
            reference: r.into(),
            hypothesis: h.into(),
        }
    }

    #[test]
    fn perfect_hypotheses_score_zero() {
        let pairs = vec![pair("1", "Hello there.", "hello there"), pair("2", "It is 10", "it is ten")];
        let r = score(&pairs, &ScoringPolicy::default());
        assert_eq!((r.wer, r.cer, r.n_items), (0.0, 0.0, 2));
    }

    #[test]
    fn one_substitution_in_four_words() {
        let r = score(&[pair("x", "a b c d", "a b x d")], &ScoringPolicy::default());
        assert_eq!(r.wer, 25.0);
        assert_eq!(r.substitutions, 1);
        // "a b c d" has 7 codepoints, one changed
        assert!((r.cer - 100.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_is_skipped() {
        let r = score(&[pair("a", "?!", "x"), pair("b", "ok", "ok")], &ScoringPolicy::default());
        assert_eq!(r.skipped, vec!["a".to_string()]);
        assert_eq!(r.n_items, 1);
    }

    #[test]
    fn verbatim_policy_counts_case_and_punctuation() {
        let r = score(&[pair("a", "Hello, world", "hello world")], &ScoringPolicy::verbatim());
        assert_eq!(r.wer, 50.0);
        assert_eq!(normalize_for_scoring("It's 2 PM!", &ScoringPolicy::default()), "it's two pm");
    }

    #[test]
    fn micro_average_matches_independent_reaggregation() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let words = ["a", "b", "c", "d", "e"];
        let sentence = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(1..12);
            (0..n).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
        };
        let pairs: Vec<TranscriptPair> = (0..100)
            .map(|i| TranscriptPair {
                id: i.to_string(),
                reference: sentence(&mut rng),
                hypothesis: sentence(&mut rng),
            })
            .collect();
        let report = score(&pairs, &ScoringPolicy::default());
        let (mut edits, mut total) = (0usize, 0usize);
        for p in &pairs {
            let r: Vec<&str> = p.reference.split(' ').collect();
            let h: Vec<&str> = p.hypothesis.split(' ').collect();
            edits += edit_distance(&r, &h).distance;
            total += r.len();
        }
        assert_eq!(report.word_edits, edits);
        assert!((report.wer - 100.0 * edits as f64 / total as f64).abs() < 1e-12);

        let mut shuffled = pairs.clone();
        shuffled.reverse();
        shuffled.swap(3, 40);
        let again = score(&shuffled, &ScoringPolicy::default());
        assert_eq!(again.wer, report.wer);
        assert_eq!(again.cer, report.cer);
    }

    #[test]
    fn improvement_arithmetic() {
        let i = improvement(17.3, 10.8).unwrap();
        assert!((i.absolute - 6.5).abs() < 1e-9);
        assert!((i.relative - 37.57).abs() <= 0.01);
        let i = improvement(16.3, 10.7).unwrap();
        assert!((i.absolute - 5.6).abs() < 1e-9);
        assert!((i.relative - 34.36).abs() <= 0.01);
        assert_eq!(improvement(4.2, 4.2).unwrap(), Improvement { absolute: 0.0, relative: 0.0 });
        assert!(improvement(0.0, 1.0).is_err());
        assert!(improvement(-3.0, 1.0).is_err());
        for k in [0.1, 2.0, 1000.0] {
            assert!((improvement(17.3 * k, 10.8 * k).unwrap().relative - improvement(17.3, 10.8).unwrap().relative).abs() < 1e-9);
        }
    }

    #[test]
    fn transcripts_parse_and_join() {
        let refs = parse_transcripts("1|hello\n2|world\n".as_bytes()).unwrap();
        let hyps = parse_transcripts("2|word\n".as_bytes()).unwrap();
        let (pairs, missing) = join_transcripts(&refs, &hyps);
        assert_eq!(pairs.len(), 1);
        assert_eq!(missing, vec!["1".to_string()]);
        assert!(parse_transcripts("1|a\n1|b\n".as_bytes()).is_err());
        assert!(parse_transcripts("nobar\n".as_bytes()).is_err());
        assert_eq!(parse_transcripts("3|\n".as_bytes()).unwrap()[0].1, "");
    }
}
