//! Per-session knowledge metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AssessmentError, QuizMode};
use crate::model::ItemId;
use crate::session::{BalloonOutcome, Phase, PlayerId, SessionId, SessionState, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeMetrics {
    /// Fraction correct on the post-tutorial quiz.
    pub observational_score: Option<f64>,
    /// Quiz items answered with a verdict only.
    pub procedural_score: Option<f64>,
    /// Quiz items that also ask for the trick set.
    pub conceptual_score: Option<f64>,
    /// In `[-1, 1]`.
    pub heuristic_delta: Option<f64>,
    pub structural_score: Option<f64>,
    pub in_game_accuracy: Option<f64>,
    /// Fakes left alone, among unassisted fake balloons.
    pub avoidance_behavior: Option<f64>,
}

fn rate<'a>(outcomes: impl Iterator<Item = &'a BalloonOutcome>) -> Option<f64> {
    let (mut n, mut ok) = (0usize, 0usize);
    for o in outcomes {
        n += 1;
        ok += usize::from(o.correct);
    }
    (n > 0).then(|| ok as f64 / n as f64)
}

/// Accuracy on repeated fakes minus accuracy on the same fakes one stage
/// earlier, pooled over both repetition links. A pair counts only when both
/// encounters were unassisted.
pub fn heuristic_delta(state: &SessionState) -> Result<f64, AssessmentError> {
    let mut diffs = Vec::new();
    for stage in [Stage::Medium, Stage::Advance] {
        let (Some(run), Some(prev)) = (
            state.stage_run(stage),
            stage.previous().and_then(|p| state.stage_run(p)),
        ) else {
            continue;
        };
        let earlier: HashMap<&ItemId, &BalloonOutcome> = prev
            .outcomes
            .iter()
            .filter(|o| !o.assisted)
            .map(|o| (&o.item_id, o))
            .collect();
        for later in run.outcomes.iter().filter(|o| o.is_repeat && !o.assisted) {
            if let Some(first) = earlier.get(&later.item_id) {
                diffs.push(f64::from(u8::from(later.correct)) - f64::from(u8::from(first.correct)));
            }
        }
    }
    if diffs.is_empty() {
        return Err(AssessmentError::NoRepeatedItemsEncountered);
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Fraction of reviewed fakes whose cited cues include at least one of the
/// item's tricks.
pub fn structural_score(state: &SessionState) -> Result<f64, AssessmentError> {
    if state.phase.rank() < Phase::Review.rank() || !state.review_completed() {
        return Err(AssessmentError::ReviewNotCompleted);
    }
    let items = state.review_items();
    if items.is_empty() {
        return Err(AssessmentError::ReviewNotCompleted);
    }
    let hits = items
        .iter()
        .filter(|item| {
            state
                .review
                .iter()
                .find(|r| r.item_id == *item.id())
                .is_some_and(|r| r.cues.iter().any(|c| item.tricks().contains(c)))
        })
        .count();
    Ok(hits as f64 / items.len() as f64)
}

pub fn knowledge_metrics(state: &SessionState) -> KnowledgeMetrics {
    let quiz = state.quiz.as_ref().map(|q| &q.score);
    let unassisted = || state.outcomes().filter(|o| !o.assisted);
    KnowledgeMetrics {
        observational_score: quiz.map(|q| q.fraction),
        procedural_score: quiz.and_then(|q| q.mode_fraction(QuizMode::VerdictOnly)),
        conceptual_score: quiz.and_then(|q| q.mode_fraction(QuizMode::TrickIdentification)),
        heuristic_delta: heuristic_delta(state).ok(),
        structural_score: structural_score(state).ok(),
        in_game_accuracy: rate(unassisted()),
        avoidance_behavior: rate(unassisted().filter(|o| !o.legitimate)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub session_id: SessionId,
    pub player_id: PlayerId,
    pub metrics: KnowledgeMetrics,
    /// Self-efficacy totals, `10..=50`.
    pub pre_self_efficacy: Option<u32>,
    pub post_self_efficacy: Option<u32>,
    /// Mean of the post-session motivation items, `1..=5`.
    pub motivation_questionnaire: Option<f64>,
    /// Behavioural motivation in `[0, 1]`: mean of optional-stage
    /// participation, review completion and the rescaled questionnaire mean.
    pub motivation_proxy: f64,
    pub stage_scores: [Option<i32>; 3],
    pub total_score: i32,
    pub help_uses: u32,
    pub review_completed: bool,
}

impl AssessmentRecord {
    /// A record that can enter the hypothesis tests.
    pub fn is_complete(&self) -> bool {
        self.pre_self_efficacy.is_some() && self.post_self_efficacy.is_some()
    }
}

pub fn assessment_record(state: &SessionState) -> AssessmentRecord {
    let optional = [Stage::Medium, Stage::Advance];
    let joined = optional
        .iter()
        .filter(|s| state.stage_run(**s).is_some_and(|r| r.started_ms.is_some()))
        .count();
    let review_items = state.review_items().len();
    let review_fraction = if review_items == 0 {
        0.0
    } else {
        state.review.len() as f64 / review_items as f64
    };
    let motivation_questionnaire = state.post_questionnaire.as_ref().map(|q| q.motivation_mean());
    let mut parts = vec![joined as f64 / optional.len() as f64, review_fraction];
    if let Some(m) = motivation_questionnaire {
        parts.push((m - 1.0) / 4.0);
    }
    AssessmentRecord {
        session_id: state.session_id.clone(),
        player_id: state.player_id.clone(),
        metrics: knowledge_metrics(state),
        pre_self_efficacy: state.pre_questionnaire.as_ref().map(|q| q.self_efficacy_total()),
        post_self_efficacy: state.post_questionnaire.as_ref().map(|q| q.self_efficacy_total()),
        motivation_questionnaire,
        motivation_proxy: parts.iter().sum::<f64>() / parts.len() as f64,
        stage_scores: state.stage_scores(),
        total_score: state.total_score,
        help_uses: state.help_uses,
        review_completed: state.review_completed() && state.phase.rank() >= Phase::Review.rank(),
    }
}
