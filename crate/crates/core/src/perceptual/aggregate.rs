use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use super::{MosResponse, PairItem, PerceptualError, PreferenceResponse, Result, SessionPlan};

/// Mean and sample (n−1) standard deviation. With one rating the deviation
/// is reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

impl Serialize for MeanStd {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("MeanStd", 3)?;
        st.serialize_field("mean", &self.mean)?;
        st.serialize_field("std", &self.std)?;
        st.serialize_field("text", &self.to_string())?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemMos {
    pub system: String,
    pub n: usize,
    pub naturalness: MeanStd,
    pub intelligibility: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosAggregate {
    pub systems: Vec<SystemMos>,
    pub warnings: Vec<String>,
}

/// Per-system MOS over every individual rating. Responses for unknown items,
/// out-of-range scores and repeated (rater, item) pairs are skipped with a
/// warning; systems without ratings are omitted with a warning.
pub fn aggregate_mos(plan: &SessionPlan, responses: &[MosResponse]) -> MosAggregate {
    let system_of: HashMap<&str, &str> = plan
        .mos
        .iter()
        .map(|m| (m.item_id.as_str(), m.system.as_str()))
        .collect();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut scores: HashMap<&str, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for r in responses {
        let Some(&system) = system_of.get(r.item_id.as_str()) else {
            warnings.push(format!("{}: unknown item {}", r.rater_id, r.item_id));
            continue;
        };
        if let Err(e) = r.validate() {
            warnings.push(format!("{}/{}: {e}", r.rater_id, r.item_id));
            continue;
        }
        if !seen.insert((r.rater_id.as_str(), r.item_id.as_str())) {
            warnings.push(format!("{}/{}: repeated response ignored", r.rater_id, r.item_id));
            continue;
        }
        let e = scores.entry(system).or_default();
        e.0.push(f64::from(r.naturalness));
        e.1.push(f64::from(r.intelligibility));
    }
    let mut systems = Vec::new();
    for s in &plan.systems {
        match scores.get(s.as_str()) {
            Some((nat, int)) => systems.push(SystemMos {
                system: s.clone(),
                n: nat.len(),
                naturalness: MeanStd::of(nat).expect("non-empty"),
                intelligibility: MeanStd::of(int).expect("non-empty"),
            }),
            None => warnings.push(format!("system {s}: no ratings, omitted")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    MosAggregate { systems, warnings }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceAggregate {
    pub focus_system: String,
    pub pairs: Vec<String>,
    pub raters: Vec<String>,
    /// pairs × raters; 1 where the rater preferred `focus_system`.
    pub matrix: Vec<Vec<Option<u8>>>,
    pub wins_by_system: BTreeMap<String, usize>,
    pub wins: usize,
    pub total: usize,
    pub percent: f64,
    pub rejected: Vec<String>,
}

/// Maps each choice back to the system that was played in that position and
/// tallies how often `focus_system` won. Raters appear in order of first
/// response. Responses naming unknown pairs, or repeating a (rater, pair),
/// are rejected and listed.
pub fn aggregate_preferences(
    pairs: &[PairItem],
    responses: &[PreferenceResponse],
    focus_system: &str,
) -> Result<PreferenceAggregate> {
    let mut wins_by_system: BTreeMap<String, usize> = BTreeMap::new();
    for p in pairs {
        wins_by_system.entry(p.first_system.clone()).or_default();
        wins_by_system.entry(p.second_system.clone()).or_default();
    }
    if !wins_by_system.contains_key(focus_system) {
        return Err(PerceptualError::Invalid(format!(
            "focus system {focus_system:?} is not in any pair"
        )));
    }
    let row_of: HashMap<&str, usize> = pairs.iter().enumerate().map(|(i, p)| (p.pair_id.as_str(), i)).collect();
    let mut raters: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, usize), u8> = HashMap::new();
    let mut rejected = Vec::new();
    let (mut wins, mut total) = (0, 0);

    for r in responses {
        let Some(&row) = row_of.get(r.pair_id.as_str()) else {
            log::warn!("{}: unknown pair {}", r.rater_id, r.pair_id);
            rejected.push(format!("{}/{}: unknown pair", r.rater_id, r.pair_id));
            continue;
        };
        let col = match raters.iter().position(|x| *x == r.rater_id) {
            Some(c) => c,
            None => {
                raters.push(r.rater_id.clone());
                raters.len() - 1
            }
        };
        if cells.contains_key(&(row, col)) {
            log::warn!("{}: repeated answer for {}", r.rater_id, r.pair_id);
            rejected.push(format!("{}/{}: repeated", r.rater_id, r.pair_id));
            continue;
        }
        let chosen = pairs[row].system_for(r.choice);
        *wins_by_system.get_mut(chosen).expect("registered above") += 1;
        let hit = u8::from(chosen == focus_system);
        cells.insert((row, col), hit);
        wins += usize::from(hit);
        total += 1;
    }

    let matrix = (0..pairs.len())
        .map(|row| (0..raters.len()).map(|col| cells.get(&(row, col)).copied()).collect())
        .collect();
    Ok(PreferenceAggregate {
        focus_system: focus_system.to_string(),
        pairs: pairs.iter().map(|p| p.pair_id.clone()).collect(),
        raters,
        matrix,
        wins_by_system,
        wins,
        total,
        percent: if total == 0 { 0.0 } else { 100.0 * wins as f64 / total as f64 },
        rejected,
    })
}
