//! Session state as a fold over the event log.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::event::{EventKind, SessionEvent};
use super::feedback::{hint_for, FactAndAdvice, Hint};
use super::plan::{PlannedBalloon, SessionBlueprint};
use super::{PlayerId, SessionId};
use crate::assessment::{
    score_quiz, Questionnaire, QuestionnaireResponse, QuestionnaireTiming, QuizResponse, QuizScore,
};
use crate::model::{ItemId, PhishItem, TrickTag, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Tutorial,
    Quiz,
    Stage(Stage),
    Review,
    Done,
}

impl Phase {
    /// Position in the fixed progression; phases never move backwards.
    pub fn rank(self) -> u8 {
        match self {
            Phase::Tutorial => 0,
            Phase::Quiz => 1,
            Phase::Stage(s) => 2 + s.index() as u8,
            Phase::Review => 5,
            Phase::Done => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageEndReason {
    Completed,
    TimeUp,
    LivesExhausted,
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalloonAction {
    Shoot,
    Skip,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalloonOutcome {
    pub stage: Stage,
    pub balloon: usize,
    pub item_id: ItemId,
    pub is_repeat: bool,
    pub legitimate: bool,
    pub action: BalloonAction,
    pub correct: bool,
    pub points: i32,
    pub assisted: bool,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrentBalloon {
    pub index: usize,
    pub item_id: ItemId,
    pub presented_ms: u64,
    pub aimed_ms: Option<u64>,
    pub hint: Option<Hint>,
}

impl CurrentBalloon {
    pub fn revealed(&self) -> bool {
        self.aimed_ms.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRun {
    pub stage: Stage,
    pub started_ms: Option<u64>,
    pub deadline_ms: Option<u64>,
    pub lives: u8,
    pub score: i32,
    pub correct_shots: u32,
    pub wrong_shots: u32,
    pub current: Option<CurrentBalloon>,
    pub outcomes: Vec<BalloonOutcome>,
    /// Balloon whose wrong shot still owes a FeedbackShown event.
    pub pending_feedback: Option<usize>,
    pub ended: Option<StageEndReason>,
}

impl StageRun {
    pub fn is_running(&self) -> bool {
        self.started_ms.is_some() && self.ended.is_none()
    }

    /// Index of the next balloon to present.
    pub fn next_index(&self) -> usize {
        self.outcomes.len()
    }

    /// When the revealed current balloon times out: its own window or the
    /// stage clock, whichever is first.
    pub fn balloon_deadline_ms(&self) -> Option<u64> {
        let aimed = self.current.as_ref()?.aimed_ms?;
        let own = aimed + self.stage.config().per_balloon_ms();
        Some(self.deadline_ms.map_or(own, |d| d.min(own)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizRecord {
    pub responses: Vec<QuizResponse>,
    pub score: QuizScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub item_id: ItemId,
    pub cues: Vec<TrickTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: SessionId,
    pub player_id: PlayerId,
    pub master_seed: u64,
    pub blueprint: SessionBlueprint,
    pub phase: Phase,
    pub pre_questionnaire: Option<QuestionnaireResponse>,
    pub post_questionnaire: Option<QuestionnaireResponse>,
    pub tutorial_seen: usize,
    pub quiz: Option<QuizRecord>,
    pub stages: Vec<StageRun>,
    pub total_score: i32,
    pub help_uses: u32,
    pub feedback: Vec<FactAndAdvice>,
    pub review: Vec<ReviewRecord>,
    pub last_seq: u64,
    pub last_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("expected seq {expected}, found {found}")]
    Seq { expected: u64, found: u64 },
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("wall time {found} precedes previous event at {previous}")]
    ClockBackwards { previous: u64, found: u64 },
    #[error("{event} is not valid in phase {phase:?}")]
    WrongPhase { event: &'static str, phase: Phase },
    #[error("{0}")]
    Rejected(String),
    #[error("recorded {field} = {recorded} but the rules give {expected}")]
    Mismatch {
        field: &'static str,
        expected: String,
        recorded: String,
    },
}

fn check<T: PartialEq + std::fmt::Debug>(
    field: &'static str,
    expected: T,
    recorded: T,
) -> Result<(), ApplyError> {
    if expected == recorded {
        Ok(())
    } else {
        Err(ApplyError::Mismatch {
            field,
            expected: format!("{expected:?}"),
            recorded: format!("{recorded:?}"),
        })
    }
}

fn reject<T>(msg: impl Into<String>) -> Result<T, ApplyError> {
    Err(ApplyError::Rejected(msg.into()))
}

pub(crate) fn instrument() -> &'static Questionnaire {
    static Q: OnceLock<Questionnaire> = OnceLock::new();
    Q.get_or_init(Questionnaire::bundled)
}

pub fn points_for(stage: Stage, legitimate: bool) -> i32 {
    let cfg = stage.config();
    if legitimate {
        cfg.points_correct
    } else {
        cfg.points_wrong
    }
}

impl SessionState {
    /// The state right after a SessionCreated event.
    pub fn from_created(event: &SessionEvent) -> Result<Self, ApplyError> {
        if event.v != SCHEMA_VERSION {
            return Err(ApplyError::SchemaVersion(event.v));
        }
        check("seq", 0, event.seq)?;
        let EventKind::SessionCreated {
            session_id,
            player_id,
            master_seed,
            blueprint,
        } = &event.kind
        else {
            return reject(format!("log must open with SessionCreated, not {}", event.kind.name()));
        };
        if blueprint.plans.len() != Stage::ALL.len()
            || blueprint.plans.iter().zip(Stage::ALL).any(|(p, s)| {
                p.stage != s || p.balloons.len() != s.config().balloon_count
            })
        {
            return reject("blueprint stage plans do not match the stage tables");
        }
        if blueprint.tutorial.is_empty() {
            return reject("blueprint has an empty tutorial");
        }
        Ok(Self {
            session_id: session_id.clone(),
            player_id: player_id.clone(),
            master_seed: *master_seed,
            blueprint: (**blueprint).clone(),
            phase: Phase::Tutorial,
            pre_questionnaire: None,
            post_questionnaire: None,
            tutorial_seen: 0,
            quiz: None,
            stages: Vec::new(),
            total_score: 0,
            help_uses: 0,
            feedback: Vec::new(),
            review: Vec::new(),
            last_seq: 0,
            last_time_ms: event.wall_time_ms,
        })
    }

    pub fn stage_run(&self, stage: Stage) -> Option<&StageRun> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    /// The stage currently being played, if one is running.
    pub fn running_stage(&self) -> Option<&StageRun> {
        self.stages.last().filter(|r| r.is_running())
    }

    pub fn planned(&self, stage: Stage, balloon: usize) -> Option<&PlannedBalloon> {
        self.blueprint.plan(stage).balloons.get(balloon)
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &BalloonOutcome> {
        self.stages.iter().flat_map(|r| r.outcomes.iter())
    }

    /// Fake items the player resolved during the stages, first encounter
    /// order, each once. These are the items of the post-game review.
    pub fn review_items(&self) -> Vec<&PhishItem> {
        let mut seen = std::collections::HashSet::new();
        self.outcomes()
            .filter(|o| !o.legitimate && seen.insert(&o.item_id))
            .filter_map(|o| self.planned(o.stage, o.balloon).map(|b| &b.item))
            .collect()
    }

    pub fn review_completed(&self) -> bool {
        self.review.len() == self.review_items().len()
    }

    pub fn stage_scores(&self) -> [Option<i32>; 3] {
        let mut out = [None; 3];
        for r in &self.stages {
            if r.started_ms.is_some() {
                out[r.stage.index()] = Some(r.score);
            }
        }
        out
    }

    fn run_mut(&mut self, event: &'static str) -> Result<&mut StageRun, ApplyError> {
        let phase = self.phase;
        match self.stages.last_mut() {
            Some(r) if r.is_running() && phase == Phase::Stage(r.stage) => Ok(r),
            _ => Err(ApplyError::WrongPhase { event, phase }),
        }
    }

    /// Applies one event after checking it against the rules. On error the
    /// state is left unchanged.
    pub fn apply(&mut self, e: &SessionEvent) -> Result<(), ApplyError> {
        if e.v != SCHEMA_VERSION {
            return Err(ApplyError::SchemaVersion(e.v));
        }
        if e.seq != self.last_seq + 1 {
            return Err(ApplyError::Seq {
                expected: self.last_seq + 1,
                found: e.seq,
            });
        }
        if e.wall_time_ms < self.last_time_ms {
            return Err(ApplyError::ClockBackwards {
                previous: self.last_time_ms,
                found: e.wall_time_ms,
            });
        }
        let now = e.wall_time_ms;
        let name = e.kind.name();
        let phase = self.phase;
        let wrong_phase = || ApplyError::WrongPhase { event: name, phase };

        match &e.kind {
            EventKind::SessionCreated { .. } => return reject("SessionCreated may only open a log"),
            EventKind::QuestionnaireSubmitted { timing, response } => {
                instrument()
                    .validate(response)
                    .map_err(|err| ApplyError::Rejected(err.to_string()))?;
                match timing {
                    QuestionnaireTiming::Pre => {
                        if phase != Phase::Tutorial || self.tutorial_seen > 0 {
                            return Err(wrong_phase());
                        }
                        if self.pre_questionnaire.is_some() {
                            return reject("pre-session questionnaire already submitted");
                        }
                        self.pre_questionnaire = Some(response.clone());
                    }
                    QuestionnaireTiming::Post => {
                        if phase != Phase::Review {
                            return Err(wrong_phase());
                        }
                        self.post_questionnaire = Some(response.clone());
                        self.phase = Phase::Done;
                    }
                }
            }
            EventKind::TutorialStep { step } => {
                if phase != Phase::Tutorial {
                    return Err(wrong_phase());
                }
                if self.pre_questionnaire.is_none() {
                    return reject("tutorial started before the pre-session questionnaire");
                }
                check("tutorial step", self.tutorial_seen, *step)?;
                self.tutorial_seen += 1;
                if self.tutorial_seen == self.blueprint.tutorial.len() {
                    self.phase = Phase::Quiz;
                }
            }
            EventKind::QuizAnswer { responses, score } => {
                if phase != Phase::Quiz {
                    return Err(wrong_phase());
                }
                let scored = score_quiz(&self.blueprint.quiz, responses)
                    .map_err(|err| ApplyError::Rejected(err.to_string()))?;
                check("quiz score", scored.fraction, *score)?;
                self.quiz = Some(QuizRecord {
                    responses: responses.clone(),
                    score: scored,
                });
                self.phase = Phase::Stage(Stage::Easy);
            }
            EventKind::StageStarted {
                stage,
                lives,
                deadline_ms,
            } => {
                if phase != Phase::Stage(*stage) || self.stage_run(*stage).is_some() {
                    return Err(wrong_phase());
                }
                let cfg = stage.config();
                check("lives", cfg.lives, *lives)?;
                check("stage deadline", now + cfg.total_ms(), *deadline_ms)?;
                self.stages.push(StageRun {
                    stage: *stage,
                    started_ms: Some(now),
                    deadline_ms: Some(*deadline_ms),
                    lives: cfg.lives,
                    score: 0,
                    correct_shots: 0,
                    wrong_shots: 0,
                    current: None,
                    outcomes: Vec::new(),
                    pending_feedback: None,
                    ended: None,
                });
            }
            EventKind::BalloonPresented {
                stage,
                balloon,
                item_id,
            } => {
                let planned_id = self.planned(*stage, *balloon).map(|b| b.item.id().clone());
                let run = self.run_mut(name)?;
                check("stage", run.stage, *stage)?;
                if run.current.is_some() || run.pending_feedback.is_some() {
                    return reject("a balloon is still in play");
                }
                if run.lives == 0 {
                    return reject("no lives left");
                }
                if now >= run.deadline_ms.unwrap_or(u64::MAX) {
                    return reject("stage clock has expired");
                }
                check("balloon index", run.next_index(), *balloon)?;
                let Some(planned_id) = planned_id else {
                    return reject("stage has no balloons left");
                };
                check("item id", &planned_id, item_id)?;
                run.current = Some(CurrentBalloon {
                    index: *balloon,
                    item_id: item_id.clone(),
                    presented_ms: now,
                    aimed_ms: None,
                    hint: None,
                });
            }
            EventKind::Aimed {
                stage,
                balloon,
                first,
            } => {
                let run = self.run_mut(name)?;
                check("stage", run.stage, *stage)?;
                let deadline = run.balloon_deadline_ms().or(run.deadline_ms);
                let Some(cur) = run.current.as_mut().filter(|c| c.index == *balloon) else {
                    return reject(format!("balloon {balloon} is not in play"));
                };
                check("first aim", cur.aimed_ms.is_none(), *first)?;
                if now >= deadline.unwrap_or(u64::MAX) {
                    return reject("aim after the deadline");
                }
                if *first {
                    cur.aimed_ms = Some(now);
                }
            }
            EventKind::HelpRequested {
                stage,
                balloon,
                hint,
            } => {
                let item = self.planned(*stage, *balloon).map(|b| b.item.clone());
                let run = self.run_mut(name)?;
                check("stage", run.stage, *stage)?;
                let deadline = run.balloon_deadline_ms();
                let Some(cur) = run.current.as_mut().filter(|c| c.index == *balloon) else {
                    return reject(format!("balloon {balloon} is not in play"));
                };
                let (Some(deadline), Some(item)) = (deadline, item) else {
                    return reject("help requested before the balloon was revealed");
                };
                if now >= deadline {
                    return reject("help after the deadline");
                }
                if cur.hint.is_some() {
                    return reject("help already given for this balloon");
                }
                check("hint", &hint_for(&item), hint)?;
                cur.hint = Some(hint.clone());
                self.help_uses += 1;
            }
            EventKind::Shot {
                stage,
                balloon,
                item_id,
                correct,
                points,
                stage_score,
                lives,
            } => {
                let (planned, mut outcome) = self.resolve(*stage, *balloon, item_id, now, false)?;
                let legitimate = planned.item.is_legitimate();
                let expected_points = points_for(*stage, legitimate);
                check("correct", legitimate, *correct)?;
                check("points", expected_points, *points)?;
                let run = self.run_mut(name)?;
                let new_score = run.score + expected_points;
                let new_lives = if legitimate {
                    run.lives
                } else {
                    run.lives.saturating_sub(1)
                };
                check("stage score", new_score, *stage_score)?;
                check("lives", new_lives, *lives)?;
                outcome.action = BalloonAction::Shoot;
                outcome.correct = legitimate;
                outcome.points = expected_points;
                run.score = new_score;
                run.lives = new_lives;
                if legitimate {
                    run.correct_shots += 1;
                } else {
                    run.wrong_shots += 1;
                    run.pending_feedback = Some(*balloon);
                }
                run.current = None;
                run.outcomes.push(outcome);
                self.total_score += expected_points;
            }
            EventKind::Skipped {
                stage,
                balloon,
                item_id,
                correct,
            } => {
                let (planned, mut outcome) = self.resolve(*stage, *balloon, item_id, now, false)?;
                check("correct", !planned.item.is_legitimate(), *correct)?;
                outcome.action = BalloonAction::Skip;
                outcome.correct = *correct;
                let run = self.run_mut(name)?;
                run.current = None;
                run.outcomes.push(outcome);
            }
            EventKind::BalloonTimedOut {
                stage,
                balloon,
                item_id,
                correct,
            } => {
                let (planned, mut outcome) = self.resolve(*stage, *balloon, item_id, now, true)?;
                check("correct", !planned.item.is_legitimate(), *correct)?;
                outcome.action = BalloonAction::TimedOut;
                outcome.correct = *correct;
                let run = self.run_mut(name)?;
                run.current = None;
                run.outcomes.push(outcome);
            }
            EventKind::FeedbackShown {
                stage,
                balloon,
                feedback,
            } => {
                let item = self.planned(*stage, *balloon).map(|b| b.item.clone());
                let run = self.run_mut(name)?;
                check("stage", run.stage, *stage)?;
                check("feedback balloon", run.pending_feedback, Some(*balloon))?;
                let expected = item.as_ref().and_then(FactAndAdvice::for_wrong_shot);
                check("feedback", expected.as_ref(), Some(feedback))?;
                run.pending_feedback = None;
                self.feedback.push(feedback.clone());
            }
            EventKind::StageEnded {
                stage,
                reason,
                stage_score,
                total_score,
            } => {
                if phase != Phase::Stage(*stage) {
                    return Err(wrong_phase());
                }
                let balloon_count = stage.config().balloon_count;
                match self.stages.last_mut().filter(|r| r.stage == *stage) {
                    None => {
                        if *stage == Stage::Easy {
                            return reject("the easy stage cannot be declined");
                        }
                        check("end reason", StageEndReason::Declined, *reason)?;
                        check("stage score", 0, *stage_score)?;
                        check("total score", self.total_score, *total_score)?;
                        self.stages.push(StageRun {
                            stage: *stage,
                            started_ms: None,
                            deadline_ms: None,
                            lives: stage.config().lives,
                            score: 0,
                            correct_shots: 0,
                            wrong_shots: 0,
                            current: None,
                            outcomes: Vec::new(),
                            pending_feedback: None,
                            ended: Some(StageEndReason::Declined),
                        });
                    }
                    Some(run) => {
                        if !run.is_running() {
                            return Err(wrong_phase());
                        }
                        if run.pending_feedback.is_some() {
                            return reject("feedback still owed for a wrong shot");
                        }
                        let deadline = run.deadline_ms.unwrap_or(u64::MAX);
                        let expected = if run.lives == 0 {
                            StageEndReason::LivesExhausted
                        } else if run.outcomes.len() == balloon_count {
                            StageEndReason::Completed
                        } else if now >= deadline {
                            StageEndReason::TimeUp
                        } else {
                            return reject("stage is still in play");
                        };
                        if expected == StageEndReason::TimeUp {
                            check("stage end time", deadline, now)?;
                            if run.current.as_ref().is_some_and(CurrentBalloon::revealed) {
                                return reject("revealed balloon must time out first");
                            }
                        } else if run.current.is_some() {
                            return reject("a balloon is still in play");
                        }
                        check("end reason", expected, *reason)?;
                        check("stage score", run.score, *stage_score)?;
                        check("total score", self.total_score, *total_score)?;
                        run.current = None;
                        run.ended = Some(expected);
                    }
                }
                self.phase = stage.next().map_or(Phase::Review, Phase::Stage);
            }
            EventKind::ReviewAnswer { item_id, cues } => {
                if phase != Phase::Review {
                    return Err(wrong_phase());
                }
                if !self.review_items().iter().any(|i| i.id() == item_id) {
                    return reject(format!("item {item_id} is not up for review"));
                }
                if self.review.iter().any(|r| &r.item_id == item_id) {
                    return reject(format!("item {item_id} already reviewed"));
                }
                if cues.windows(2).any(|w| w[0] >= w[1]) {
                    return reject("review cues must be sorted and unique");
                }
                self.review.push(ReviewRecord {
                    item_id: item_id.clone(),
                    cues: cues.clone(),
                });
            }
        }
        self.last_seq = e.seq;
        self.last_time_ms = now;
        Ok(())
    }

    /// Shared checks for the three ways a revealed balloon resolves. Returns
    /// the planned balloon and a partly filled outcome; mutates nothing.
    fn resolve(
        &self,
        stage: Stage,
        balloon: usize,
        item_id: &ItemId,
        now: u64,
        timeout: bool,
    ) -> Result<(PlannedBalloon, BalloonOutcome), ApplyError> {
        let phase = self.phase;
        let run = self
            .stages
            .last()
            .filter(|r| r.is_running() && phase == Phase::Stage(r.stage))
            .ok_or(ApplyError::WrongPhase {
                event: if timeout { "BalloonTimedOut" } else { "Shot/Skipped" },
                phase,
            })?;
        check("stage", run.stage, stage)?;
        let Some(cur) = run.current.as_ref().filter(|c| c.index == balloon) else {
            return reject(format!("balloon {balloon} is not in play"));
        };
        let Some(aimed) = cur.aimed_ms else {
            return reject(format!("balloon {balloon} was never revealed"));
        };
        check("item id", &cur.item_id, item_id)?;
        let deadline = run.balloon_deadline_ms().expect("revealed balloon has a deadline");
        if timeout {
            check("timeout time", deadline, now)?;
        } else if now >= deadline {
            return reject(format!("action at {now} after the deadline {deadline}"));
        }
        let planned = self
            .planned(stage, balloon)
            .cloned()
            .ok_or_else(|| ApplyError::Rejected("balloon outside the plan".into()))?;
        let outcome = BalloonOutcome {
            stage,
            balloon,
            item_id: item_id.clone(),
            is_repeat: planned.is_repeat,
            legitimate: planned.item.is_legitimate(),
            action: BalloonAction::Skip,
            correct: false,
            points: 0,
            assisted: cur.hint.is_some(),
            elapsed_ms: now - aimed,
        };
        Ok((planned, outcome))
    }
}
