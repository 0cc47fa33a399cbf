//! The client-facing view of a session. It never carries the legitimacy or
//! tricks of an item whose balloon is still pending, nor of quiz or review
//! items.

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::feedback::{FactAndAdvice, Hint};
use super::state::{BalloonOutcome, Phase, SessionState, StageEndReason};
use super::{PlayerId, SessionId};
use crate::assessment::QuizMode;
use crate::model::{Explanation, ItemId, Payload};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialStepView {
    pub step: usize,
    pub caption: String,
    pub item_id: Option<ItemId>,
    pub payload: Option<Payload>,
    pub annotations: Vec<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItemView {
    pub item_id: ItemId,
    pub mode: QuizMode,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalloonView {
    pub index: usize,
    pub item_id: ItemId,
    pub presented_ms: u64,
    /// Present once the balloon has been aimed at.
    pub payload: Option<Payload>,
    pub deadline_ms: Option<u64>,
    pub hint: Option<Hint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageView {
    pub stage: Stage,
    pub balloon_count: usize,
    pub lives: u8,
    pub score: i32,
    pub started_ms: Option<u64>,
    pub deadline_ms: Option<u64>,
    pub current: Option<BalloonView>,
    pub outcomes: Vec<BalloonOutcome>,
    pub ended: Option<StageEndReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItemView {
    pub item_id: ItemId,
    pub payload: Payload,
    pub answered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub player_id: PlayerId,
    pub seq: u64,
    pub time_ms: u64,
    pub phase: Phase,
    pub pre_questionnaire_done: bool,
    pub post_questionnaire_done: bool,
    pub tutorial_total: usize,
    pub tutorial: Vec<TutorialStepView>,
    pub quiz: Vec<QuizItemView>,
    pub quiz_score: Option<f64>,
    pub stages: Vec<StageView>,
    pub total_score: i32,
    pub help_uses: u32,
    pub feedback: Vec<FactAndAdvice>,
    pub review: Vec<ReviewItemView>,
}

impl SessionState {
    pub fn tutorial_step_view(&self, step: usize) -> Option<TutorialStepView> {
        self.blueprint.tutorial.get(step).map(|s| TutorialStepView {
            step,
            caption: s.caption.clone(),
            item_id: s.item.as_ref().map(|i| i.id().clone()),
            payload: s.item.as_ref().map(|i| i.payload().clone()),
            annotations: s.annotations.clone(),
        })
    }

    pub fn view(&self) -> SessionView {
        let stages = self
            .stages
            .iter()
            .map(|r| StageView {
                stage: r.stage,
                balloon_count: r.stage.config().balloon_count,
                lives: r.lives,
                score: r.score,
                started_ms: r.started_ms,
                deadline_ms: r.deadline_ms,
                current: r.current.as_ref().map(|c| BalloonView {
                    index: c.index,
                    item_id: c.item_id.clone(),
                    presented_ms: c.presented_ms,
                    payload: c
                        .revealed()
                        .then(|| self.planned(r.stage, c.index))
                        .flatten()
                        .map(|b| b.item.payload().clone()),
                    deadline_ms: r.balloon_deadline_ms(),
                    hint: c.hint.clone(),
                }),
                outcomes: r.outcomes.clone(),
                ended: r.ended,
            })
            .collect();
        let review = if self.phase.rank() >= Phase::Review.rank() {
            self.review_items()
                .into_iter()
                .map(|i| ReviewItemView {
                    item_id: i.id().clone(),
                    payload: i.payload().clone(),
                    answered: self.review.iter().any(|r| &r.item_id == i.id()),
                })
                .collect()
        } else {
            Vec::new()
        };
        SessionView {
            session_id: self.session_id.clone(),
            player_id: self.player_id.clone(),
            seq: self.last_seq,
            time_ms: self.last_time_ms,
            phase: self.phase,
            pre_questionnaire_done: self.pre_questionnaire.is_some(),
            post_questionnaire_done: self.post_questionnaire.is_some(),
            tutorial_total: self.blueprint.tutorial.len(),
            tutorial: (0..self.tutorial_seen)
                .filter_map(|s| self.tutorial_step_view(s))
                .collect(),
            quiz: self
                .blueprint
                .quiz
                .items
                .iter()
                .map(|q| QuizItemView {
                    item_id: q.item.id().clone(),
                    mode: q.mode,
                    payload: q.item.payload().clone(),
                })
                .collect(),
            quiz_score: self.quiz.as_ref().map(|q| q.score.fraction),
            stages,
            total_score: self.total_score,
            help_uses: self.help_uses,
            feedback: self.feedback.clone(),
            review,
        }
    }
}

impl SessionView {
    pub fn running_stage(&self) -> Option<&StageView> {
        self.stages
            .last()
            .filter(|s| s.started_ms.is_some() && s.ended.is_none())
    }

    pub fn current_balloon(&self) -> Option<&BalloonView> {
        self.running_stage()?.current.as_ref()
    }
}
