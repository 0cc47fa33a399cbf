use crate::assessment::{QuestionnaireResponse, QuestionnaireTiming, QuizResponse, QuizScore};
use crate::model::{ItemId, Payload, PhishItem, TrickTag};
use crate::session::{
    ActOutcome, Hint, PlayerAction, PlayerId, Session, SessionView, Stage, TutorialStepView,
};

use super::SimError;

/// Start of the virtual clock for in-process bot sessions.
pub const BOT_EPOCH_MS: u64 = 1_700_000_000_000;

/// The operations a client can perform on one session.
pub trait GameDriver {
    fn view(&mut self) -> Result<SessionView, SimError>;
    fn submit_questionnaire(
        &mut self,
        timing: QuestionnaireTiming,
        response: QuestionnaireResponse,
    ) -> Result<(), SimError>;
    fn next_tutorial_step(&mut self) -> Result<TutorialStepView, SimError>;
    fn submit_quiz(&mut self, responses: Vec<QuizResponse>) -> Result<QuizScore, SimError>;
    fn start_stage(&mut self) -> Result<Stage, SimError>;
    fn decline_stage(&mut self) -> Result<Stage, SimError>;
    fn aim(&mut self, balloon: usize) -> Result<Payload, SimError>;
    fn request_help(&mut self, balloon: usize) -> Result<Hint, SimError>;
    fn act(&mut self, balloon: usize, action: PlayerAction) -> Result<ActOutcome, SimError>;
    fn answer_review(&mut self, item_id: ItemId, cues: Vec<TrickTag>) -> Result<(), SimError>;
    /// Lets `ms` of game time pass.
    fn wait(&mut self, ms: u64) -> Result<(), SimError>;
}

/// Drives a [`Session`] directly on a virtual clock.
pub struct InProcessDriver {
    session: Session,
    now_ms: u64,
}

impl InProcessDriver {
    pub fn create(
        player: PlayerId,
        corpus: &[PhishItem],
        master_seed: u64,
        start_ms: u64,
    ) -> Result<Self, SimError> {
        Ok(Self {
            session: Session::create(player, corpus, master_seed, start_ms)?,
            now_ms: start_ms,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }
}

impl GameDriver for InProcessDriver {
    fn view(&mut self) -> Result<SessionView, SimError> {
        Ok(self.session.view(self.now_ms)?)
    }

    fn submit_questionnaire(
        &mut self,
        timing: QuestionnaireTiming,
        response: QuestionnaireResponse,
    ) -> Result<(), SimError> {
        match timing {
            QuestionnaireTiming::Pre => self.session.submit_pre_questionnaire(response, self.now_ms)?,
            QuestionnaireTiming::Post => self.session.submit_post_questionnaire(response, self.now_ms)?,
        }
        Ok(())
    }

    fn next_tutorial_step(&mut self) -> Result<TutorialStepView, SimError> {
        Ok(self.session.next_tutorial_step(self.now_ms)?)
    }

    fn submit_quiz(&mut self, responses: Vec<QuizResponse>) -> Result<QuizScore, SimError> {
        Ok(self.session.submit_quiz(responses, self.now_ms)?)
    }

    fn start_stage(&mut self) -> Result<Stage, SimError> {
        Ok(self.session.start_stage(self.now_ms)?)
    }

    fn decline_stage(&mut self) -> Result<Stage, SimError> {
        Ok(self.session.decline_stage(self.now_ms)?)
    }

    fn aim(&mut self, balloon: usize) -> Result<Payload, SimError> {
        Ok(self.session.aim(balloon, self.now_ms)?)
    }

    fn request_help(&mut self, balloon: usize) -> Result<Hint, SimError> {
        Ok(self.session.request_help(balloon, self.now_ms)?)
    }

    fn act(&mut self, balloon: usize, action: PlayerAction) -> Result<ActOutcome, SimError> {
        Ok(self.session.act(balloon, action, self.now_ms)?)
    }

    fn answer_review(&mut self, item_id: ItemId, cues: Vec<TrickTag>) -> Result<(), SimError> {
        Ok(self.session.answer_review(item_id, cues, self.now_ms)?)
    }

    fn wait(&mut self, ms: u64) -> Result<(), SimError> {
        self.now_ms += ms;
        Ok(())
    }
}
