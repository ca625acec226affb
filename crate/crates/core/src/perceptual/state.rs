use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{JournalRecord, MosResponse, PerceptualError, PreferenceResponse, Result, SessionPlan};

/// What a rater sees next. Carries opaque ids only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NextItem {
    Mos { item_id: String, audio_ref: String },
    Pair { pair_id: String, first: String, second: String },
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SubmitError {
    #[error("unknown rater {0:?}")]
    UnknownRater(String),
    #[error("rater token does not match")]
    BadToken,
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} already answered")]
    Duplicate(String),
    #[error("item {got:?} is not the current item {expected:?}")]
    OutOfOrder { expected: String, got: String },
    #[error("{0}")]
    Invalid(String),
}

/// Per-session bookkeeping: rater tokens and which items each rater has
/// answered. Items are presented in plan order (MOS first, then pairs) and
/// each may be answered once.
#[derive(Clone, Debug)]
pub struct SessionState {
    plan: SessionPlan,
    order: Vec<String>,
    tokens: HashMap<String, String>,
    answered: HashMap<String, HashSet<String>>,
}

impl SessionState {
    pub fn new(plan: SessionPlan) -> Self {
        let order = plan
            .mos
            .iter()
            .map(|m| m.item_id.clone())
            .chain(plan.pairs.iter().map(|p| p.pair_id.clone()))
            .collect();
        Self {
            plan,
            order,
            tokens: HashMap::new(),
            answered: HashMap::new(),
        }
    }

    /// Rebuilds state from journal records of this session.
    pub fn replay(plan: SessionPlan, records: &[JournalRecord]) -> Result<Self> {
        let mut state = Self::new(plan);
        for r in records {
            if let JournalRecord::Session { session_id, .. } = r {
                if *session_id != state.plan.session_id {
                    return Err(PerceptualError::Invalid(format!(
                        "journal belongs to session {session_id}, plan is {}",
                        state.plan.session_id
                    )));
                }
            }
            state.apply(r);
        }
        Ok(state)
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn token(&self, rater: &str) -> Option<&str> {
        self.tokens.get(rater).map(String::as_str)
    }

    pub fn raters(&self) -> impl Iterator<Item = &str> {
        self.tokens.keys().map(String::as_str)
    }

    pub fn progress(&self, rater: &str) -> Progress {
        Progress {
            answered: self.answered.get(rater).map_or(0, HashSet::len),
            total: self.order.len(),
        }
    }

    pub fn next_for(&self, rater: &str) -> NextItem {
        let done = self.answered.get(rater);
        let next = self
            .order
            .iter()
            .position(|id| !done.is_some_and(|d| d.contains(id)));
        let Some(k) = next else {
            return NextItem::Complete;
        };
        if k < self.plan.mos.len() {
            let m = &self.plan.mos[k];
            NextItem::Mos {
                item_id: m.item_id.clone(),
                audio_ref: m.audio_ref.clone(),
            }
        } else {
            let p = &self.plan.pairs[k - self.plan.mos.len()];
            NextItem::Pair {
                pair_id: p.pair_id.clone(),
                first: p.first.clone(),
                second: p.second.clone(),
            }
        }
    }

    fn check_item(&self, rater: &str, token: &str, item: &str, is_pair: bool) -> std::result::Result<(), SubmitError> {
        match self.tokens.get(rater) {
            None => return Err(SubmitError::UnknownRater(rater.to_string())),
            Some(t) if t != token => return Err(SubmitError::BadToken),
            Some(_) => {}
        }
        let known = if is_pair {
            self.plan.pairs.iter().any(|p| p.pair_id == item)
        } else {
            self.plan.mos.iter().any(|m| m.item_id == item)
        };
        if !known {
            return Err(SubmitError::UnknownItem(item.to_string()));
        }
        if self.answered.get(rater).is_some_and(|d| d.contains(item)) {
            return Err(SubmitError::Duplicate(item.to_string()));
        }
        let expected = match self.next_for(rater) {
            NextItem::Mos { item_id, .. } => item_id,
            NextItem::Pair { pair_id, .. } => pair_id,
            NextItem::Complete => unreachable!("an unanswered item exists"),
        };
        if expected != item {
            return Err(SubmitError::OutOfOrder {
                expected,
                got: item.to_string(),
            });
        }
        Ok(())
    }

    pub fn check_mos(&self, r: &MosResponse, token: &str) -> std::result::Result<(), SubmitError> {
        r.validate().map_err(SubmitError::Invalid)?;
        self.check_item(&r.rater_id, token, &r.item_id, false)
    }

    pub fn check_preference(&self, r: &PreferenceResponse, token: &str) -> std::result::Result<(), SubmitError> {
        self.check_item(&r.rater_id, token, &r.pair_id, true)
    }

    pub fn apply(&mut self, record: &JournalRecord) {
        match record {
            JournalRecord::Session { .. } => {}
            JournalRecord::Rater { rater_id, token, .. } => {
                self.tokens.insert(rater_id.clone(), token.clone());
            }
            JournalRecord::Mos(m) => {
                self.answered.entry(m.rater_id.clone()).or_default().insert(m.item_id.clone());
            }
            JournalRecord::Preference(p) => {
                self.answered.entry(p.rater_id.clone()).or_default().insert(p.pair_id.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptual::{build_session, AudioIndex, Choice, SessionSpec};

    fn plan() -> SessionPlan {
        let mut idx = AudioIndex::default();
        for s in ["a", "b"] {
            for u in 0..3 {
                idx.insert(s, format!("u{u}"), format!("{s}{u}.wav"));
            }
        }
        let spec = SessionSpec {
            session_id: "s".into(),
            systems: vec!["a".into(), "b".into()],
            items_per_system: 1,
            pairs: 1,
        };
        build_session(&spec, &idx, 3).unwrap()
    }

    fn rater(name: &str) -> JournalRecord {
        JournalRecord::Rater {
            rater_id: name.into(),
            token: "t".into(),
            timestamp: 0,
        }
    }

    #[test]
    fn walks_items_in_order_then_completes() {
        let mut st = SessionState::new(plan());
        st.apply(&rater("r"));
        for k in 0..2 {
            let NextItem::Mos { item_id, .. } = st.next_for("r") else { panic!() };
            assert_eq!(item_id, format!("m{k:03}"));
            let resp = MosResponse {
                rater_id: "r".into(),
                item_id,
                naturalness: 3,
                intelligibility: 4,
                timestamp: 0,
            };
            st.check_mos(&resp, "t").unwrap();
            assert_eq!(st.check_mos(&resp, "x"), Err(SubmitError::BadToken));
            st.apply(&JournalRecord::Mos(resp.clone()));
            assert!(matches!(st.check_mos(&resp, "t"), Err(SubmitError::Duplicate(_))));
        }
        let NextItem::Pair { pair_id, .. } = st.next_for("r") else { panic!() };
        let p = PreferenceResponse {
            rater_id: "r".into(),
            pair_id,
            choice: Choice::First,
            timestamp: 0,
        };
        st.check_preference(&p, "t").unwrap();
        st.apply(&JournalRecord::Preference(p));
        assert_eq!(st.next_for("r"), NextItem::Complete);
        assert_eq!(st.progress("r"), Progress { answered: 3, total: 3 });
    }

    #[test]
    fn rejects_unknown_and_out_of_order() {
        let mut st = SessionState::new(plan());
        let mut resp = MosResponse {
            rater_id: "r".into(),
            item_id: "m001".into(),
            naturalness: 3,
            intelligibility: 3,
            timestamp: 0,
        };
        assert!(matches!(st.check_mos(&resp, "t"), Err(SubmitError::UnknownRater(_))));
        st.apply(&rater("r"));
        assert!(matches!(st.check_mos(&resp, "t"), Err(SubmitError::OutOfOrder { .. })));
        resp.item_id = "m999".into();
        assert!(matches!(st.check_mos(&resp, "t"), Err(SubmitError::UnknownItem(_))));
        resp.item_id = "m000".into();
        resp.intelligibility = 6;
        assert!(matches!(st.check_mos(&resp, "t"), Err(SubmitError::Invalid(_))));
    }

    #[test]
    fn replay_refuses_foreign_journal() {
        let rec = JournalRecord::Session {
            session_id: "other".into(),
            seed: 0,
            items: 0,
            timestamp: 0,
        };
        assert!(SessionState::replay(plan(), &[rec]).is_err());
    }
}
