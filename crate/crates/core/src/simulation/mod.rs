//! Simulated players.
//!
//! A bot plays a whole session through a [`GameDriver`], the same surface a
//! human client uses. It sees only the redacted [`SessionView`] and the
//! results of its own actions; to decide, it looks items up by id in the
//! corpus and perturbs the ground truth with Bernoulli noise. It never calls
//! the trick detector, so a detector bug cannot mask a pipeline bug.

mod driver;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assessment::{
    assessment_record, AssessmentRecord, QuestionnaireResponse, QuestionnaireTiming, QuizMode,
    QuizResponse, MOTIVATION_ITEMS, SELF_EFFICACY_ITEMS,
};
use crate::model::{ItemId, PhishItem, TrickTag, Verdict};
use crate::rng::SeededRng;
use crate::session::{Phase, PlayerAction, PlayerId, SessionError, SessionEvent, SessionState, Stage};

pub use driver::{GameDriver, InProcessDriver, BOT_EPOCH_MS};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid bot profile: {0}")]
    InvalidProfile(String),
    #[error("item {} is not in the corpus", .0 .0)]
    UnknownItem(ItemId),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("transport: {0}")]
    Transport(String),
    /// A remote session refused the request; `code` is [`SessionError::code`].
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
    #[error("bot made no progress in phase {0:?}")]
    Stuck(Phase),
}

impl SimError {
    /// The balloon or stage the request was aimed at is already over.
    pub fn is_overtaken_by_clock(&self) -> bool {
        let code = match self {
            SimError::Session(e) => e.code(),
            SimError::Rejected { code, .. } => code.as_str(),
            _ => return false,
        };
        matches!(code, "WrongPhase" | "WrongBalloon" | "BalloonAlreadyResolved")
    }
}

fn default_anchor() -> f64 {
    3.0
}

/// Traits of one simulated player. All probabilities are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BotProfile {
    #[serde(default)]
    pub name: Option<String>,
    /// Chance of the right action on an item it has no memory of.
    pub base_accuracy: f64,
    /// Remembers the ground truth of every item once its balloon resolves.
    #[serde(default)]
    pub memory: bool,
    /// Accuracy gain per Fact-and-Advice received for a trick, applied to
    /// later fakes carrying that trick.
    #[serde(default)]
    pub learning_rate: f64,
    #[serde(default)]
    pub help_propensity: f64,
    pub rng_seed: u64,
    /// Chance of a right answer on quiz items. Defaults to `base_accuracy`.
    #[serde(default)]
    pub observational_skill: Option<f64>,
    /// Centre of the bot's questionnaire ratings, in `[1, 5]`.
    #[serde(default = "default_anchor")]
    pub self_report_anchor: f64,
    /// How strongly post-session self-efficacy ratings follow
    /// `observational_skill`, in rating points per unit of skill.
    #[serde(default)]
    pub self_report_weight: f64,
    /// Chance of letting a revealed balloon run out of time.
    #[serde(default)]
    pub timeout_propensity: f64,
    /// Chance of opting out of each optional stage.
    #[serde(default)]
    pub decline_propensity: f64,
    /// Chance of answering each review item.
    #[serde(default = "one")]
    pub review_persistence: f64,
}

fn one() -> f64 {
    1.0
}

impl BotProfile {
    pub fn new(base_accuracy: f64, rng_seed: u64) -> Self {
        Self {
            name: None,
            base_accuracy,
            memory: false,
            learning_rate: 0.0,
            help_propensity: 0.0,
            rng_seed,
            observational_skill: None,
            self_report_anchor: default_anchor(),
            self_report_weight: 0.0,
            timeout_propensity: 0.0,
            decline_propensity: 0.0,
            review_persistence: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("base_accuracy", self.base_accuracy),
            ("learning_rate", self.learning_rate),
            ("help_propensity", self.help_propensity),
            ("observational_skill", self.observational()),
            ("timeout_propensity", self.timeout_propensity),
            ("decline_propensity", self.decline_propensity),
            ("review_persistence", self.review_persistence),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidProfile(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if !(1.0..=5.0).contains(&self.self_report_anchor) {
            return Err(SimError::InvalidProfile("self_report_anchor outside [1, 5]".into()));
        }
        if !self.self_report_weight.is_finite() {
            return Err(SimError::InvalidProfile("self_report_weight is not finite".into()));
        }
        Ok(())
    }

    pub fn observational(&self) -> f64 {
        self.observational_skill.unwrap_or(self.base_accuracy)
    }

    pub fn player_id(&self) -> PlayerId {
        PlayerId(
            self.name
                .clone()
                .unwrap_or_else(|| format!("bot-{}", self.rng_seed)),
        )
    }
}

/// A named group of bots sharing a profile; member `k` gets seed
/// `rng_seed + k` and name `{name}-{k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortGroup {
    pub name: String,
    pub count: usize,
    pub profile: BotProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub v: u32,
    pub groups: Vec<CohortGroup>,
}

impl CohortSpec {
    pub fn profiles(&self) -> Vec<BotProfile> {
        self.groups
            .iter()
            .flat_map(|g| {
                (0..g.count).map(move |k| BotProfile {
                    name: Some(format!("{}-{k}", g.name)),
                    rng_seed: g.profile.rng_seed.wrapping_add(k as u64),
                    ..g.profile.clone()
                })
            })
            .collect()
    }
}

/// Everything a finished bot run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct BotRun {
    pub state: SessionState,
    pub log: Vec<SessionEvent>,
    pub record: AssessmentRecord,
}

struct Bot<'a> {
    profile: &'a BotProfile,
    truth: HashMap<&'a ItemId, &'a PhishItem>,
    rng: SeededRng,
    remembered: HashSet<ItemId>,
    lessons: HashMap<TrickTag, u32>,
}

impl<'a> Bot<'a> {
    fn new(profile: &'a BotProfile, corpus: &'a [PhishItem]) -> Self {
        Self {
            profile,
            truth: corpus.iter().map(|i| (i.id(), i)).collect(),
            rng: SeededRng::new(profile.rng_seed),
            remembered: HashSet::new(),
            lessons: HashMap::new(),
        }
    }

    fn item(&self, id: &ItemId) -> Result<&'a PhishItem, SimError> {
        self.truth
            .get(id)
            .copied()
            .ok_or_else(|| SimError::UnknownItem(id.clone()))
    }

    fn rating(&mut self, centre: f64) -> u8 {
        let noisy = centre + self.rng.unit() - 0.5;
        noisy.round().clamp(1.0, 5.0) as u8
    }

    fn questionnaire(&mut self, timing: QuestionnaireTiming) -> QuestionnaireResponse {
        let p = self.profile;
        let se_centre = match timing {
            QuestionnaireTiming::Pre => p.self_report_anchor,
            QuestionnaireTiming::Post => {
                p.self_report_anchor + p.self_report_weight * (p.observational() - 0.5)
            }
        };
        QuestionnaireResponse {
            self_efficacy: (0..SELF_EFFICACY_ITEMS).map(|_| self.rating(se_centre)).collect(),
            motivation: (0..MOTIVATION_ITEMS)
                .map(|_| self.rating(p.self_report_anchor))
                .collect(),
        }
    }

    fn flip(v: Verdict) -> Verdict {
        match v {
            Verdict::Legitimate => Verdict::Phishing,
            Verdict::Phishing => Verdict::Legitimate,
        }
    }

    /// The true tricks, or a set with one error in it.
    fn cite_tricks(&mut self, item: &PhishItem, skill: f64) -> Vec<TrickTag> {
        if self.rng.chance(skill) {
            return item.tricks().to_vec();
        }
        let wrong: Vec<TrickTag> = TrickTag::ALL
            .into_iter()
            .filter(|t| t.applies_to(item.kind()) && !item.tricks().contains(t))
            .collect();
        let mut out = vec![*self.rng.pick(&wrong)];
        if item.tricks().len() > 1 {
            out.push(item.tricks()[0]);
        }
        out.sort();
        out
    }

    fn accuracy_for(&self, item: &PhishItem) -> f64 {
        let p = self.profile;
        let lessons: u32 = if item.is_legitimate() {
            0
        } else {
            item.tricks().iter().map(|t| self.lessons.get(t).copied().unwrap_or(0)).sum()
        };
        (p.base_accuracy + p.learning_rate * f64::from(lessons)).min(1.0)
    }

    fn choose(&mut self, item: &PhishItem, assisted: bool) -> PlayerAction {
        let right = if item.is_legitimate() {
            PlayerAction::Shoot
        } else {
            PlayerAction::Skip
        };
        let wrong = match right {
            PlayerAction::Shoot => PlayerAction::Skip,
            PlayerAction::Skip => PlayerAction::Shoot,
        };
        if self.profile.memory && self.remembered.contains(item.id()) {
            return right;
        }
        let mut p = self.accuracy_for(item);
        if assisted {
            p = p.max(0.9);
        }
        if self.rng.chance(p) {
            right
        } else {
            wrong
        }
    }

    fn play<D: GameDriver>(&mut self, driver: &mut D) -> Result<(), SimError> {
        let mut last_progress = (Phase::Tutorial, u64::MAX);
        loop {
            let view = driver.view()?;
            if (view.phase, view.seq) == last_progress {
                return Err(SimError::Stuck(view.phase));
            }
            last_progress = (view.phase, view.seq);
            match view.phase {
                Phase::Tutorial => {
                    if !view.pre_questionnaire_done {
                        let r = self.questionnaire(QuestionnaireTiming::Pre);
                        driver.submit_questionnaire(QuestionnaireTiming::Pre, r)?;
                    } else {
                        driver.wait(2_000 + self.rng.below(2_000))?;
                        driver.next_tutorial_step()?;
                    }
                }
                Phase::Quiz => {
                    let skill = self.profile.observational();
                    let mut responses = Vec::with_capacity(view.quiz.len());
                    for q in &view.quiz {
                        let item = self.item(&q.item_id)?;
                        let truth = item.verdict();
                        let verdict = if self.rng.chance(skill) { truth } else { Self::flip(truth) };
                        let tricks = match q.mode {
                            QuizMode::TrickIdentification if verdict == Verdict::Phishing => {
                                self.cite_tricks(item, skill)
                            }
                            _ => Vec::new(),
                        };
                        responses.push(QuizResponse {
                            item_id: q.item_id.clone(),
                            verdict,
                            tricks,
                        });
                    }
                    driver.wait(30_000)?;
                    driver.submit_quiz(responses)?;
                }
                Phase::Stage(stage) => match view.running_stage() {
                    None => {
                        if stage != Stage::Easy && self.rng.chance(self.profile.decline_propensity) {
                            driver.decline_stage()?;
                        } else {
                            driver.start_stage()?;
                        }
                    }
                    Some(run) => {
                        let Some(b) = run.current.clone() else {
                            return Err(SimError::Stuck(view.phase));
                        };
                        self.balloon(driver, b.index, &b.item_id)?;
                    }
                },
                Phase::Review => {
                    let items: Vec<ItemId> = view
                        .review
                        .iter()
                        .filter(|r| !r.answered)
                        .map(|r| r.item_id.clone())
                        .collect();
                    for id in items {
                        if !self.rng.chance(self.profile.review_persistence) {
                            continue;
                        }
                        let item = self.item(&id)?;
                        let cues = self.cite_tricks(item, self.profile.base_accuracy);
                        driver.wait(3_000)?;
                        driver.answer_review(id, cues)?;
                    }
                    let r = self.questionnaire(QuestionnaireTiming::Post);
                    driver.submit_questionnaire(QuestionnaireTiming::Post, r)?;
                }
                Phase::Done => return Ok(()),
            }
        }
    }

    fn balloon<D: GameDriver>(&mut self, driver: &mut D, index: usize, id: &ItemId) -> Result<(), SimError> {
        match self.try_balloon(driver, index, id) {
            // The stage clock ran out while the bot was thinking.
            Err(e) if e.is_overtaken_by_clock() => Ok(()),
            other => other,
        }
    }

    fn try_balloon<D: GameDriver>(&mut self, driver: &mut D, index: usize, id: &ItemId) -> Result<(), SimError> {
        let item = self.item(id)?;
        driver.wait(300 + self.rng.below(1_200))?;
        driver.aim(index)?;
        let assisted = self.rng.chance(self.profile.help_propensity);
        if assisted {
            driver.wait(500)?;
            driver.request_help(index)?;
        }
        let action = self.choose(item, assisted);
        if self.rng.chance(self.profile.timeout_propensity) {
            driver.wait(crate::session::PER_BALLOON_SECONDS * 1000)?;
        } else {
            driver.wait(1_000 + self.rng.below(5_000))?;
        }
        let result = driver.act(index, action)?;
        if let Some(f) = &result.feedback {
            for e in &f.advice {
                *self.lessons.entry(e.trick).or_insert(0) += 1;
            }
        }
        self.remembered.insert(result.outcome.item_id.clone());
        Ok(())
    }
}

/// Plays one bot through an arbitrary driver.
pub fn play_with<D: GameDriver>(
    driver: &mut D,
    profile: &BotProfile,
    corpus: &[PhishItem],
) -> Result<(), SimError> {
    profile.validate()?;
    Bot::new(profile, corpus).play(driver)
}

/// Plays one bot through an in-process session.
pub fn run_bot(profile: &BotProfile, corpus: &[PhishItem], master_seed: u64) -> Result<BotRun, SimError> {
    profile.validate()?;
    let mut driver = InProcessDriver::create(profile.player_id(), corpus, master_seed, BOT_EPOCH_MS)?;
    play_with(&mut driver, profile, corpus)?;
    let (state, log) = driver.into_session().into_parts();
    let record = assessment_record(&state);
    Ok(BotRun { state, log, record })
}

/// Runs bots in parallel; results keep the order of `profiles`.
pub fn run_cohort_full(
    profiles: &[BotProfile],
    corpus: &[PhishItem],
    master_seed: u64,
) -> Result<Vec<BotRun>, SimError> {
    profiles
        .par_iter()
        .map(|p| run_bot(p, corpus, master_seed))
        .collect()
}

pub fn run_cohort(
    profiles: &[BotProfile],
    corpus: &[PhishItem],
    master_seed: u64,
) -> Result<Vec<AssessmentRecord>, SimError> {
    Ok(run_cohort_full(profiles, corpus, master_seed)?
        .into_iter()
        .map(|r| r.record)
        .collect())
}
