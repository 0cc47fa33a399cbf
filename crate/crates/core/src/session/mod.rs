//! Event-sourced game sessions.
//!
//! A [`Session`] pairs the append-only event log with the state folded from
//! it. Every operation validates its request, emits events, and applies them
//! through [`SessionState::apply`], the same function [`replay`] uses, so a
//! live session and the replay of its log cannot drift apart.
//!
//! Time is passed in by the caller as UTC milliseconds. A `now` earlier than
//! the last event is clamped forward. Timers are checked lazily: every
//! operation first emits the timeouts that fell due before `now`, stamped
//! with their deadline, which keeps logs independent of how often a caller
//! polls.

mod config;
mod event;
mod feedback;
mod plan;
mod state;
mod view;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assessment::{AssessmentError, QuestionnaireResponse, QuestionnaireTiming, QuizResponse, QuizScore};
use crate::model::{ItemId, Payload, PhishItem, TrickTag, SCHEMA_VERSION};

pub use config::{
    Stage, StageConfig, ADVANCE, EASY, LIVES, MEDIUM, PER_BALLOON_SECONDS, POINTS_CORRECT,
    POINTS_WRONG,
};
pub use event::{parse_event, read_log, write_event, write_log, EventKind, LogError, SessionEvent};
pub use feedback::{hint_for, FactAndAdvice, Hint, HintComponent};
pub use plan::{
    draw_blueprint, required_fakes, required_reals, stage_seed, PlannedBalloon, SessionBlueprint,
    StagePlan, TutorialStep, QUIZ_FAKES, QUIZ_REALS, QUIZ_TRICK_ITEMS, TUTORIAL_FAKES,
};
pub use state::{
    points_for, ApplyError, BalloonAction, BalloonOutcome, CurrentBalloon, Phase, QuizRecord,
    ReviewRecord, SessionState, StageEndReason, StageRun,
};
pub use view::{
    BalloonView, QuizItemView, ReviewItemView, SessionView, StageView, TutorialStepView,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl SessionId {
    /// Digest of everything that determines a session's content.
    pub fn derive(player: &PlayerId, master_seed: u64, corpus: &[PhishItem]) -> Self {
        let mut h = Sha256::new();
        h.update(player.0.as_bytes());
        h.update([0]);
        h.update(master_seed.to_le_bytes());
        for item in corpus {
            h.update(item.id().0.as_bytes());
            h.update([0]);
        }
        SessionId(format!("s-{}", hex::encode(&h.finalize()[..8])))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error(
        "corpus has {reals} legitimate and {fakes} fake items; a session needs {need_reals} and {need_fakes}"
    )]
    InsufficientCorpus {
        reals: usize,
        fakes: usize,
        need_reals: usize,
        need_fakes: usize,
    },
    #[error("{operation} is not allowed in phase {phase:?}")]
    WrongPhase { operation: &'static str, phase: Phase },
    #[error("the pre-session questionnaire must be submitted first")]
    PreQuestionnaireMissing,
    #[error("questionnaire already submitted")]
    QuestionnaireAlreadySubmitted,
    #[error("stage {0} has already started")]
    StageAlreadyStarted(Stage),
    #[error("stage {0} cannot be declined")]
    CannotDecline(Stage),
    #[error("balloon {requested} is not the current balloon ({current:?})")]
    WrongBalloon {
        requested: usize,
        current: Option<usize>,
    },
    #[error("balloon {0} is already resolved")]
    BalloonAlreadyResolved(usize),
    #[error("balloon {0} has not been revealed")]
    NotRevealed(usize),
    #[error("item {} is not up for review", .0 .0)]
    NotUnderReview(ItemId),
    #[error("item {} was already reviewed", .0 .0)]
    AlreadyReviewed(ItemId),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error("internal rule violation: {0}")]
    Internal(#[from] ApplyError),
}

impl SessionError {
    /// Stable name of the variant, for wire protocols.
    pub fn code(&self) -> &'static str {
        match self {
            Self::InsufficientCorpus { .. } => "InsufficientCorpus",
            Self::WrongPhase { .. } => "WrongPhase",
            Self::PreQuestionnaireMissing => "PreQuestionnaireMissing",
            Self::QuestionnaireAlreadySubmitted => "QuestionnaireAlreadySubmitted",
            Self::StageAlreadyStarted(_) => "StageAlreadyStarted",
            Self::CannotDecline(_) => "CannotDecline",
            Self::WrongBalloon { .. } => "WrongBalloon",
            Self::BalloonAlreadyResolved(_) => "BalloonAlreadyResolved",
            Self::NotRevealed(_) => "NotRevealed",
            Self::NotUnderReview(_) => "NotUnderReview",
            Self::AlreadyReviewed(_) => "AlreadyReviewed",
            Self::Assessment(_) => "InvalidSubmission",
            Self::Internal(_) => "Internal",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log is empty")]
    EmptyLog,
    #[error("seq gap: expected {expected}, found {found}")]
    GapInLog { expected: u64, found: u64 },
    #[error("divergence at seq {seq}: {reason}")]
    Divergence { seq: u64, reason: ApplyError },
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Folds a complete log into its state.
pub fn replay(events: &[SessionEvent]) -> Result<SessionState, ReplayError> {
    let first = events.first().ok_or(ReplayError::EmptyLog)?;
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 {
            return Err(ReplayError::GapInLog {
                expected: i as u64,
                found: e.seq,
            });
        }
    }
    let mut state = SessionState::from_created(first)
        .map_err(|reason| ReplayError::Divergence { seq: 0, reason })?;
    for e in &events[1..] {
        state
            .apply(e)
            .map_err(|reason| ReplayError::Divergence { seq: e.seq, reason })?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerAction {
    Shoot,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActOutcome {
    pub outcome: BalloonOutcome,
    pub feedback: Option<FactAndAdvice>,
    /// Set when this action ended the stage.
    pub stage_ended: Option<StageEndReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    state: SessionState,
    log: Vec<SessionEvent>,
}

impl Session {
    pub fn create(
        player_id: PlayerId,
        corpus: &[PhishItem],
        master_seed: u64,
        now_ms: u64,
    ) -> Result<Self, SessionError> {
        let id = SessionId::derive(&player_id, master_seed, corpus);
        Self::create_with_id(id, player_id, corpus, master_seed, now_ms)
    }

    pub fn create_with_id(
        session_id: SessionId,
        player_id: PlayerId,
        corpus: &[PhishItem],
        master_seed: u64,
        now_ms: u64,
    ) -> Result<Self, SessionError> {
        let blueprint = draw_blueprint(corpus, master_seed)?;
        let event = SessionEvent {
            v: SCHEMA_VERSION,
            seq: 0,
            wall_time_ms: now_ms,
            kind: EventKind::SessionCreated {
                session_id,
                player_id,
                master_seed,
                blueprint: Box::new(blueprint),
            },
        };
        let state = SessionState::from_created(&event)?;
        Ok(Self {
            state,
            log: vec![event],
        })
    }

    pub fn from_log(events: Vec<SessionEvent>) -> Result<Self, ReplayError> {
        let state = replay(&events)?;
        Ok(Self { state, log: events })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    pub fn into_parts(self) -> (SessionState, Vec<SessionEvent>) {
        (self.state, self.log)
    }

    /// The client view after applying any timeouts due by `now_ms`.
    pub fn view(&mut self, now_ms: u64) -> Result<SessionView, SessionError> {
        self.tick(now_ms)?;
        Ok(self.state.view())
    }

    fn emit(&mut self, at_ms: u64, kind: EventKind) -> Result<(), SessionError> {
        let event = SessionEvent {
            v: SCHEMA_VERSION,
            seq: self.state.last_seq + 1,
            wall_time_ms: at_ms.max(self.state.last_time_ms),
            kind,
        };
        self.state.apply(&event)?;
        self.log.push(event);
        Ok(())
    }

    fn clamp(&self, now_ms: u64) -> u64 {
        now_ms.max(self.state.last_time_ms)
    }

    fn wrong_phase(&self, operation: &'static str) -> SessionError {
        SessionError::WrongPhase {
            operation,
            phase: self.state.phase,
        }
    }

    pub fn submit_pre_questionnaire(
        &mut self,
        response: QuestionnaireResponse,
        now_ms: u64,
    ) -> Result<(), SessionError> {
        if self.state.phase != Phase::Tutorial || self.state.tutorial_seen > 0 {
            return Err(self.wrong_phase("pre-session questionnaire"));
        }
        if self.state.pre_questionnaire.is_some() {
            return Err(SessionError::QuestionnaireAlreadySubmitted);
        }
        state::instrument().validate(&response)?;
        self.emit(
            now_ms,
            EventKind::QuestionnaireSubmitted {
                timing: QuestionnaireTiming::Pre,
                response,
            },
        )
    }

    /// Shows the next tutorial step. Steps cannot be skipped; the quiz opens
    /// after the last one.
    pub fn next_tutorial_step(&mut self, now_ms: u64) -> Result<TutorialStepView, SessionError> {
        if self.state.phase != Phase::Tutorial {
            return Err(self.wrong_phase("tutorial step"));
        }
        if self.state.pre_questionnaire.is_none() {
            return Err(SessionError::PreQuestionnaireMissing);
        }
        let step = self.state.tutorial_seen;
        self.emit(now_ms, EventKind::TutorialStep { step })?;
        Ok(self.state.tutorial_step_view(step).expect("step exists"))
    }

    pub fn submit_quiz(
        &mut self,
        responses: Vec<QuizResponse>,
        now_ms: u64,
    ) -> Result<QuizScore, SessionError> {
        if self.state.phase != Phase::Quiz {
            return Err(self.wrong_phase("quiz"));
        }
        let score = crate::assessment::score_quiz(&self.state.blueprint.quiz, &responses)?;
        self.emit(
            now_ms,
            EventKind::QuizAnswer {
                responses,
                score: score.fraction,
            },
        )?;
        Ok(score)
    }

    fn pending_stage(&self, operation: &'static str) -> Result<Stage, SessionError> {
        match self.state.phase {
            Phase::Stage(s) if self.state.stage_run(s).is_none() => Ok(s),
            Phase::Stage(s) => Err(SessionError::StageAlreadyStarted(s)),
            _ => Err(self.wrong_phase(operation)),
        }
    }

    /// Starts the pending stage and presents its first balloon.
    pub fn start_stage(&mut self, now_ms: u64) -> Result<Stage, SessionError> {
        let stage = self.pending_stage("start stage")?;
        let now = self.clamp(now_ms);
        let cfg = stage.config();
        self.emit(
            now,
            EventKind::StageStarted {
                stage,
                lives: cfg.lives,
                deadline_ms: now + cfg.total_ms(),
            },
        )?;
        self.present_next(stage, now)?;
        Ok(stage)
    }

    /// Opts out of the pending stage. The easy stage is mandatory.
    pub fn decline_stage(&mut self, now_ms: u64) -> Result<Stage, SessionError> {
        let stage = self.pending_stage("decline stage")?;
        if stage == Stage::Easy {
            return Err(SessionError::CannotDecline(stage));
        }
        self.emit(
            now_ms,
            EventKind::StageEnded {
                stage,
                reason: StageEndReason::Declined,
                stage_score: 0,
                total_score: self.state.total_score,
            },
        )?;
        Ok(stage)
    }

    /// Presents the next balloon or ends the stage, whichever the rules call for.
    fn present_next(&mut self, stage: Stage, at_ms: u64) -> Result<Option<StageEndReason>, SessionError> {
        let run = self.state.running_stage().expect("stage is running");
        let reason = if run.lives == 0 {
            Some(StageEndReason::LivesExhausted)
        } else if run.next_index() == stage.config().balloon_count {
            Some(StageEndReason::Completed)
        } else if at_ms >= run.deadline_ms.unwrap_or(u64::MAX) {
            Some(StageEndReason::TimeUp)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                let stage_score = run.score;
                self.emit(
                    at_ms,
                    EventKind::StageEnded {
                        stage,
                        reason,
                        stage_score,
                        total_score: self.state.total_score,
                    },
                )?;
            }
            None => {
                let balloon = run.next_index();
                let item_id = self.state.planned(stage, balloon).expect("in plan").item.id().clone();
                self.emit(
                    at_ms,
                    EventKind::BalloonPresented {
                        stage,
                        balloon,
                        item_id,
                    },
                )?;
            }
        }
        Ok(reason)
    }

    /// Emits every timeout due at or before `now_ms`. Returns how many events
    /// were appended.
    pub fn tick(&mut self, now_ms: u64) -> Result<usize, SessionError> {
        let before = self.log.len();
        let now = self.clamp(now_ms);
        while let Some(run) = self.state.running_stage() {
            let stage = run.stage;
            let stage_deadline = run.deadline_ms.unwrap_or(u64::MAX);
            if let (Some(bd), Some(cur)) = (run.balloon_deadline_ms(), run.current.as_ref()) {
                if bd <= now {
                    let balloon = cur.index;
                    let item_id = cur.item_id.clone();
                    let legit = self.state.planned(stage, balloon).expect("in plan").item.is_legitimate();
                    self.emit(
                        bd,
                        EventKind::BalloonTimedOut {
                            stage,
                            balloon,
                            item_id,
                            correct: !legit,
                        },
                    )?;
                    self.present_next(stage, bd)?;
                    continue;
                }
                break;
            }
            if stage_deadline <= now {
                let stage_score = run.score;
                self.emit(
                    stage_deadline,
                    EventKind::StageEnded {
                        stage,
                        reason: StageEndReason::TimeUp,
                        stage_score,
                        total_score: self.state.total_score,
                    },
                )?;
                continue;
            }
            break;
        }
        Ok(self.log.len() - before)
    }

    /// The earliest pending deadline, for callers that schedule ticks.
    pub fn next_deadline_ms(&self) -> Option<u64> {
        let run = self.state.running_stage()?;
        run.balloon_deadline_ms().or(run.deadline_ms)
    }

    fn current_balloon(&self, requested: usize, operation: &'static str) -> Result<&CurrentBalloon, SessionError> {
        let Some(run) = self.state.running_stage() else {
            return Err(self.wrong_phase(operation));
        };
        match run.current.as_ref() {
            Some(c) if c.index == requested => Ok(c),
            _ if requested < run.next_index() => Err(SessionError::BalloonAlreadyResolved(requested)),
            current => Err(SessionError::WrongBalloon {
                requested,
                current: current.map(|c| c.index),
            }),
        }
    }

    /// Reveals the current balloon's payload. The first aim starts the
    /// balloon's window; later aims are recorded but change nothing.
    pub fn aim(&mut self, balloon: usize, now_ms: u64) -> Result<Payload, SessionError> {
        self.tick(now_ms)?;
        let first = !self.current_balloon(balloon, "aim")?.revealed();
        let stage = self.state.running_stage().expect("checked").stage;
        self.emit(now_ms, EventKind::Aimed { stage, balloon, first })?;
        Ok(self.state.planned(stage, balloon).expect("in plan").item.payload().clone())
    }

    /// Hint for the revealed current balloon. Asking again returns the same
    /// hint without a new event.
    pub fn request_help(&mut self, balloon: usize, now_ms: u64) -> Result<Hint, SessionError> {
        self.tick(now_ms)?;
        let cur = self.current_balloon(balloon, "help")?;
        if !cur.revealed() {
            return Err(SessionError::NotRevealed(balloon));
        }
        if let Some(h) = &cur.hint {
            return Ok(h.clone());
        }
        let stage = self.state.running_stage().expect("checked").stage;
        let hint = hint_for(&self.state.planned(stage, balloon).expect("in plan").item);
        self.emit(
            now_ms,
            EventKind::HelpRequested {
                stage,
                balloon,
                hint: hint.clone(),
            },
        )?;
        Ok(hint)
    }

    /// Shoots or skips the current balloon. An action on a balloon whose
    /// window already ran out is answered with the recorded timeout.
    pub fn act(
        &mut self,
        balloon: usize,
        action: PlayerAction,
        now_ms: u64,
    ) -> Result<ActOutcome, SessionError> {
        self.tick(now_ms)?;
        if let Some(run) = self.state.stages.last() {
            let resolved_by_timer = run.current.as_ref().map(|c| c.index) != Some(balloon)
                && run
                    .outcomes
                    .get(balloon)
                    .is_some_and(|o| o.action == BalloonAction::TimedOut);
            if resolved_by_timer {
                return Ok(ActOutcome {
                    outcome: run.outcomes[balloon].clone(),
                    feedback: None,
                    stage_ended: run.ended,
                });
            }
        }

        let cur = self.current_balloon(balloon, "act")?;
        if !cur.revealed() {
            return Err(SessionError::NotRevealed(balloon));
        }
        let item_id = cur.item_id.clone();
        let run = self.state.running_stage().expect("checked");
        let stage = run.stage;
        let item = self.state.planned(stage, balloon).expect("in plan").item.clone();
        let legit = item.is_legitimate();
        let mut feedback = None;
        match action {
            PlayerAction::Shoot => {
                let points = points_for(stage, legit);
                let lives = if legit { run.lives } else { run.lives.saturating_sub(1) };
                let stage_score = run.score + points;
                self.emit(
                    now_ms,
                    EventKind::Shot {
                        stage,
                        balloon,
                        item_id,
                        correct: legit,
                        points,
                        stage_score,
                        lives,
                    },
                )?;
                if let Some(f) = FactAndAdvice::for_wrong_shot(&item) {
                    self.emit(
                        now_ms,
                        EventKind::FeedbackShown {
                            stage,
                            balloon,
                            feedback: f.clone(),
                        },
                    )?;
                    feedback = Some(f);
                }
            }
            PlayerAction::Skip => {
                self.emit(
                    now_ms,
                    EventKind::Skipped {
                        stage,
                        balloon,
                        item_id,
                        correct: !legit,
                    },
                )?;
            }
        }
        let outcome = self
            .state
            .stage_run(stage)
            .expect("stage exists")
            .outcomes[balloon]
            .clone();
        let at = self.state.last_time_ms;
        let stage_ended = self.present_next(stage, at)?;
        Ok(ActOutcome {
            outcome,
            feedback,
            stage_ended,
        })
    }

    /// Records the structural cues a player cites for one reviewed fake.
    pub fn answer_review(
        &mut self,
        item_id: ItemId,
        mut cues: Vec<TrickTag>,
        now_ms: u64,
    ) -> Result<(), SessionError> {
        if self.state.phase != Phase::Review {
            return Err(self.wrong_phase("review"));
        }
        if !self.state.review_items().iter().any(|i| i.id() == &item_id) {
            return Err(SessionError::NotUnderReview(item_id));
        }
        if self.state.review.iter().any(|r| r.item_id == item_id) {
            return Err(SessionError::AlreadyReviewed(item_id));
        }
        cues.sort();
        cues.dedup();
        self.emit(now_ms, EventKind::ReviewAnswer { item_id, cues })
    }

    /// Closes the session. The review may be left incomplete.
    pub fn submit_post_questionnaire(
        &mut self,
        response: QuestionnaireResponse,
        now_ms: u64,
    ) -> Result<(), SessionError> {
        if self.state.phase != Phase::Review {
            return Err(self.wrong_phase("post-session questionnaire"));
        }
        state::instrument().validate(&response)?;
        self.emit(
            now_ms,
            EventKind::QuestionnaireSubmitted {
                timing: QuestionnaireTiming::Post,
                response,
            },
        )
    }

    /// Every Fact-and-Advice shown so far, in order: the end-of-game summary
    /// of mistakes.
    pub fn mistake_summary(&self) -> &[FactAndAdvice] {
        &self.state.feedback
    }
}
