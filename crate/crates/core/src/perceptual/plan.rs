use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PerceptualError, Result};

/// Generated clips per system, keyed by utterance id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioIndex {
    pub systems: BTreeMap<String, BTreeMap<String, PathBuf>>,
}

impl AudioIndex {
    pub fn insert(&mut self, system: impl Into<String>, utt_id: impl Into<String>, path: impl Into<PathBuf>) {
        self.systems
            .entry(system.into())
            .or_default()
            .insert(utt_id.into(), path.into());
    }

    pub fn count(&self, system: &str) -> usize {
        self.systems.get(system).map_or(0, BTreeMap::len)
    }
}

/// Reads `system|utt_id|path` lines.
pub fn parse_audio_index(reader: impl BufRead) -> Result<AudioIndex> {
    let mut index = AudioIndex::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| PerceptualError::Io {
            path: "<audio index>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '|');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(u), Some(p)) if !s.is_empty() && !u.is_empty() && !p.is_empty() => {
                if index.systems.get(s).is_some_and(|m| m.contains_key(u)) {
                    return Err(PerceptualError::Parse {
                        line: i + 1,
                        message: format!("duplicate clip {s}|{u}"),
                    });
                }
                index.insert(s, u, p);
            }
            _ => {
                return Err(PerceptualError::Parse {
                    line: i + 1,
                    message: "expected system|utt_id|path".into(),
                })
            }
        }
    }
    Ok(index)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_id: String,
    pub systems: Vec<String>,
    pub items_per_system: usize,
    /// Paired comparisons between the first two systems.
    pub pairs: usize,
}

/// A clip to be rated. `system` is operator-only and never sent to raters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingItem {
    pub item_id: String,
    pub audio_ref: String,
    pub utt_id: String,
    pub system: String,
}

/// Two renderings of the same utterance. The first/second order is the
/// coin flip of a generator seeded with `presentation_seed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairItem {
    pub pair_id: String,
    pub utt_id: String,
    pub first: String,
    pub second: String,
    pub first_system: String,
    pub second_system: String,
    pub presentation_seed: u64,
}

impl PairItem {
    pub fn system_for(&self, choice: super::Choice) -> &str {
        match choice {
            super::Choice::First => &self.first_system,
            super::Choice::Second => &self.second_system,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub seed: u64,
    pub systems: Vec<String>,
    pub mos: Vec<RatingItem>,
    pub pairs: Vec<PairItem>,
    /// Opaque audio reference → file.
    pub audio: BTreeMap<String, PathBuf>,
}

impl SessionPlan {
    pub fn total_items(&self) -> usize {
        self.mos.len() + self.pairs.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s).map_err(|e| PerceptualError::Invalid(e.to_string()))?;
        plan.check()?;
        Ok(plan)
    }

    fn check(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for id in self.mos.iter().map(|m| &m.item_id).chain(self.pairs.iter().map(|p| &p.pair_id)) {
            if !ids.insert(id) {
                return Err(PerceptualError::Invalid(format!("duplicate item id {id}")));
            }
        }
        let refs = self
            .mos
            .iter()
            .map(|m| &m.audio_ref)
            .chain(self.pairs.iter().flat_map(|p| [&p.first, &p.second]));
        for r in refs {
            if !self.audio.contains_key(r) {
                return Err(PerceptualError::Invalid(format!("audio ref {r} has no file")));
            }
        }
        Ok(())
    }

    /// Pair presentation as recomputed from the recorded seed: true when the
    /// second listed system of the plan is played first.
    pub fn flip(presentation_seed: u64) -> bool {
        ChaCha8Rng::seed_from_u64(presentation_seed).random_bool(0.5)
    }
}

fn pick(rng: &mut ChaCha8Rng, mut ids: Vec<String>, n: usize) -> Vec<String> {
    ids.shuffle(rng);
    ids.truncate(n);
    ids
}

/// Builds a reproducible session. MOS items are a shuffled flat list of
/// `items_per_system` clips per system; pairs compare the first two systems
/// on utterances both have rendered.
pub fn build_session(spec: &SessionSpec, index: &AudioIndex, seed: u64) -> Result<SessionPlan> {
    if spec.systems.is_empty() {
        return Err(PerceptualError::Invalid("no systems".into()));
    }
    if spec.systems.iter().collect::<BTreeSet<_>>().len() != spec.systems.len() {
        return Err(PerceptualError::Invalid("systems listed twice".into()));
    }
    if spec.pairs > 0 && spec.systems.len() < 2 {
        return Err(PerceptualError::Invalid("paired test needs two systems".into()));
    }
    for s in &spec.systems {
        let available = index.count(s);
        if available < spec.items_per_system {
            return Err(PerceptualError::InsufficientAudio {
                system: s.clone(),
                available,
                required: spec.items_per_system,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clips = |s: &str| &index.systems[s];

    let mut mos: Vec<(String, String)> = Vec::new();
    for s in &spec.systems {
        let chosen = pick(&mut rng, clips(s).keys().cloned().collect(), spec.items_per_system);
        mos.extend(chosen.into_iter().map(|u| (s.clone(), u)));
    }
    mos.shuffle(&mut rng);

    let mut pairs = Vec::new();
    if spec.pairs > 0 {
        let (a, b) = (&spec.systems[0], &spec.systems[1]);
        let common: Vec<String> = clips(a).keys().filter(|u| clips(b).contains_key(*u)).cloned().collect();
        if common.len() < spec.pairs {
            return Err(PerceptualError::InsufficientAudio {
                system: format!("{a}+{b}"),
                available: common.len(),
                required: spec.pairs,
            });
        }
        for u in pick(&mut rng, common, spec.pairs) {
            let presentation_seed = rng.next_u64();
            pairs.push((u, presentation_seed));
        }
    }

    // opaque refs are handed out only after shuffling so they carry no order
    let mut audio = BTreeMap::new();
    let mut next_ref = |system: &str, utt: &str| {
        let r = format!("c{:04}", audio.len());
        audio.insert(r.clone(), clips(system)[utt].clone());
        r
    };
    let mos: Vec<RatingItem> = mos
        .into_iter()
        .enumerate()
        .map(|(i, (system, utt_id))| RatingItem {
            item_id: format!("m{i:03}"),
            audio_ref: next_ref(&system, &utt_id),
            utt_id,
            system,
        })
        .collect();
    let pairs: Vec<PairItem> = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (utt_id, presentation_seed))| {
            let (mut x, mut y) = (spec.systems[0].clone(), spec.systems[1].clone());
            if SessionPlan::flip(presentation_seed) {
                std::mem::swap(&mut x, &mut y);
            }
            PairItem {
                pair_id: format!("p{i:03}"),
                first: next_ref(&x, &utt_id),
                second: next_ref(&y, &utt_id),
                utt_id,
                first_system: x,
                second_system: y,
                presentation_seed,
            }
        })
        .collect();

    Ok(SessionPlan {
        session_id: spec.session_id.clone(),
        seed,
        systems: spec.systems.clone(),
        mos,
        pairs,
        audio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn index(systems: &[&str], n: usize) -> AudioIndex {
        let mut idx = AudioIndex::default();
        for s in systems {
            for u in 0..n {
                idx.insert(*s, format!("u{u:02}"), format!("/audio/{s}/u{u:02}.wav"));
            }
        }
        idx
    }

    fn spec(items: usize, pairs: usize) -> SessionSpec {
        SessionSpec {
            session_id: "s1".into(),
            systems: vec!["fwd".into(), "rev".into()],
            items_per_system: items,
            pairs,
        }
    }

    #[test]
    fn eight_per_system_gives_sixteen_items() {
        let plan = build_session(&spec(8, 5), &index(&["fwd", "rev"], 20), 42).unwrap();
        assert_eq!(plan.mos.len(), 16);
        for s in ["fwd", "rev"] {
            assert_eq!(plan.mos.iter().filter(|m| m.system == s).count(), 8);
        }
        assert_eq!(plan.pairs.len(), 5);
        for p in &plan.pairs {
            assert_ne!(p.first_system, p.second_system);
            assert_eq!(SessionPlan::flip(p.presentation_seed), p.first_system == "rev");
        }
        assert_eq!(plan.audio.len(), 26);
    }

    #[test]
    fn same_seed_same_bytes() {
        let idx = index(&["fwd", "rev"], 20);
        let a = build_session(&spec(8, 5), &idx, 7).unwrap().to_json();
        assert_eq!(a, build_session(&spec(8, 5), &idx, 7).unwrap().to_json());
        assert_ne!(a, build_session(&spec(8, 5), &idx, 8).unwrap().to_json());
        assert_eq!(SessionPlan::from_json(&a).unwrap().to_json(), a);
    }

    #[test]
    fn insufficient_audio_reports_counts() {
        let mut idx = index(&["fwd"], 20);
        for u in 0..3 {
            idx.insert("rev", format!("u{u:02}"), "x.wav");
        }
        let err = build_session(&spec(8, 0), &idx, 1).unwrap_err();
        assert!(matches!(err, PerceptualError::InsufficientAudio { available: 3, required: 8, .. }), "{err}");
        let err = build_session(&spec(3, 5), &idx, 1).unwrap_err();
        assert!(matches!(err, PerceptualError::InsufficientAudio { available: 3, required: 5, .. }), "{err}");
    }

    #[test]
    fn seeded_flips_are_balanced() {
        let first_is_a = (0..10_000u64)
            .filter(|&i| !SessionPlan::flip(i.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
            .count();
        let share = first_is_a as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&share), "{share}");
    }

    #[test]
    fn audio_index_parsing() {
        let idx = parse_audio_index("a|1|x.wav\na|2|y.wav\nb|1|z.wav\n".as_bytes()).unwrap();
        assert_eq!((idx.count("a"), idx.count("b")), (2, 1));
        assert!(parse_audio_index("a|1\n".as_bytes()).is_err());
        assert!(parse_audio_index("a|1|x\na|1|y\n".as_bytes()).is_err());
    }
}
