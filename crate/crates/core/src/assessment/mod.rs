//! Knowledge metrics, questionnaires and hypothesis statistics.
//!
//! Every metric is a pure function of a session's replayed state, so a
//! report can be recomputed from the event logs alone.

mod metrics;
mod questionnaire;
mod quiz;
pub mod stats;
mod hypotheses;

use crate::model::ItemId;

pub use hypotheses::{test_hypotheses, HypothesisId, HypothesisReport, HypothesisResult};
pub use metrics::{
    assessment_record, heuristic_delta, knowledge_metrics, structural_score, AssessmentRecord,
    KnowledgeMetrics,
};
pub use questionnaire::{
    Questionnaire, QuestionnaireResponse, QuestionnaireTiming, Scale, MOTIVATION_ITEMS,
    SELF_EFFICACY_ITEMS,
};
pub use quiz::{
    jaccard, score_quiz, ItemScore, QuizInstrument, QuizItem, QuizMode, QuizPhase, QuizResponse,
    QuizScore,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssessmentError {
    #[error("{missing} quiz item(s) have no response")]
    IncompleteResponses { missing: usize },
    #[error("more than one response for item {}", .0 .0)]
    DuplicateResponse(ItemId),
    #[error("response for item {} which is not on the instrument", .0 .0)]
    UnknownItem(ItemId),
    #[error("no repeated fake item was encountered unassisted in consecutive stages")]
    NoRepeatedItemsEncountered,
    #[error("the review phase has not been completed")]
    ReviewNotCompleted,
    #[error("insufficient data: {have} complete records, {need} required")]
    InsufficientData { have: usize, need: usize },
    #[error("invalid questionnaire instrument: {0}")]
    InvalidInstrument(String),
    #[error("invalid questionnaire response: {0}")]
    InvalidResponse(String),
    #[error("statistics: {0}")]
    Stats(String),
}
