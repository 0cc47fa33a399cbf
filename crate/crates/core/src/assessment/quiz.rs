//! Quiz instruments and their scoring.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AssessmentError;
use crate::model::{ItemId, PhishItem, TrickTag, Verdict};

/// Verdict-only items probe procedural knowledge; trick-identification items
/// also ask which tricks are present and probe conceptual knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuizMode {
    VerdictOnly,
    TrickIdentification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuizPhase {
    PostTutorial,
    PostGameReview,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub item: PhishItem,
    pub mode: QuizMode,
}

impl QuizItem {
    pub fn correct_verdict(&self) -> Verdict {
        self.item.verdict()
    }

    pub fn correct_tricks(&self) -> Option<&[TrickTag]> {
        match self.mode {
            QuizMode::TrickIdentification => Some(self.item.tricks()),
            QuizMode::VerdictOnly => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizInstrument {
    pub phase: QuizPhase,
    pub items: Vec<QuizItem>,
}

/// One answer. `tricks` is read only for trick-identification items and for
/// review answers, where it holds the structural cues the player cites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizResponse {
    pub item_id: ItemId,
    pub verdict: Verdict,
    #[serde(default)]
    pub tricks: Vec<TrickTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: ItemId,
    pub mode: QuizMode,
    pub verdict_correct: bool,
    /// 0/1 for verdict-only items; Jaccard overlap of trick sets (zero on a
    /// wrong verdict) for trick-identification items.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizScore {
    pub fraction: f64,
    pub items: Vec<ItemScore>,
}

impl QuizScore {
    /// Mean item score over one mode, `None` if the mode has no items.
    pub fn mode_fraction(&self, mode: QuizMode) -> Option<f64> {
        let scores: Vec<f64> = self
            .items
            .iter()
            .filter(|s| s.mode == mode)
            .map(|s| s.score)
            .collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

pub fn jaccard(a: &[TrickTag], b: &[TrickTag]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Scores one response per instrument item, matched by item id.
pub fn score_quiz(
    instrument: &QuizInstrument,
    responses: &[QuizResponse],
) -> Result<QuizScore, AssessmentError> {
    let mut by_id: HashMap<&ItemId, &QuizResponse> = HashMap::new();
    for r in responses {
        if !instrument.items.iter().any(|q| q.item.id() == &r.item_id) {
            return Err(AssessmentError::UnknownItem(r.item_id.clone()));
        }
        if by_id.insert(&r.item_id, r).is_some() {
            return Err(AssessmentError::DuplicateResponse(r.item_id.clone()));
        }
    }
    let missing = instrument
        .items
        .iter()
        .filter(|q| !by_id.contains_key(q.item.id()))
        .count();
    if missing > 0 {
        return Err(AssessmentError::IncompleteResponses { missing });
    }

    let items: Vec<ItemScore> = instrument
        .items
        .iter()
        .map(|q| {
            let r = by_id[q.item.id()];
            let verdict_correct = r.verdict == q.correct_verdict();
            let score = match q.correct_tricks() {
                None => f64::from(u8::from(verdict_correct)),
                Some(_) if !verdict_correct => 0.0,
                Some(truth) => jaccard(&r.tricks, truth),
            };
            ItemScore {
                item_id: q.item.id().clone(),
                mode: q.mode,
                verdict_correct,
                score,
            }
        })
        .collect();
    let fraction = if items.is_empty() {
        0.0
    } else {
        items.iter().map(|s| s.score).sum::<f64>() / items.len() as f64
    };
    Ok(QuizScore { fraction, items })
}
