//! Seeded stage plans, quiz and tutorial drawn from a corpus.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::SessionError;
use crate::assessment::{QuizInstrument, QuizItem, QuizMode, QuizPhase};
use crate::model::{Explanation, ItemId, PhishItem, TrickTag};
use crate::rng::{fnv1a64, SeededRng};

pub const QUIZ_REALS: usize = 5;
pub const QUIZ_FAKES: usize = 5;
/// Fakes on the post-tutorial quiz that also ask for the trick set.
pub const QUIZ_TRICK_ITEMS: usize = 3;
/// Upper bound on demonstration fakes in the tutorial.
pub const TUTORIAL_FAKES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedBalloon {
    pub index: usize,
    pub item: PhishItem,
    pub is_repeat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stage: Stage,
    /// Seed of the stream that picked and ordered this stage's balloons.
    pub seed: u64,
    pub balloons: Vec<PlannedBalloon>,
}

impl StagePlan {
    pub fn fake_ids(&self) -> impl Iterator<Item = &ItemId> {
        self.balloons
            .iter()
            .filter(|b| !b.item.is_legitimate())
            .map(|b| b.item.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorialStep {
    pub caption: String,
    pub item: Option<PhishItem>,
    pub annotations: Vec<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionBlueprint {
    pub plans: Vec<StagePlan>,
    pub quiz: QuizInstrument,
    pub tutorial: Vec<TutorialStep>,
}

impl SessionBlueprint {
    pub fn plan(&self, stage: Stage) -> &StagePlan {
        &self.plans[stage.index()]
    }
}

pub fn required_reals() -> usize {
    Stage::ALL.iter().map(|s| s.config().real_count).sum::<usize>() + QUIZ_REALS + 1
}

pub fn required_fakes() -> usize {
    Stage::ALL.iter().map(|s| s.config().fresh_fakes()).sum::<usize>() + QUIZ_FAKES + 1
}

pub fn stage_seed(master_seed: u64, stage: Stage) -> u64 {
    master_seed ^ fnv1a64(format!("session/stage/{stage}").as_bytes())
}

/// Draws everything a session will show. Items are deduplicated by id first;
/// stage plans, quiz and tutorial never share an item except for the
/// deliberate cross-stage repeats.
pub fn draw_blueprint(corpus: &[PhishItem], master_seed: u64) -> Result<SessionBlueprint, SessionError> {
    let mut seen = HashSet::new();
    let unique: Vec<&PhishItem> = corpus.iter().filter(|i| seen.insert(i.id())).collect();
    let mut reals: Vec<&PhishItem> = unique.iter().copied().filter(|i| i.is_legitimate()).collect();
    let mut fakes: Vec<&PhishItem> = unique.iter().copied().filter(|i| !i.is_legitimate()).collect();
    if reals.len() < required_reals() || fakes.len() < required_fakes() {
        return Err(SessionError::InsufficientCorpus {
            reals: reals.len(),
            fakes: fakes.len(),
            need_reals: required_reals(),
            need_fakes: required_fakes(),
        });
    }
    let mut rng = SeededRng::derive(master_seed, "session/plans");
    rng.shuffle(&mut reals);
    rng.shuffle(&mut fakes);
    let mut reals = reals.into_iter();
    let mut fakes = fakes.into_iter();

    let mut plans: Vec<StagePlan> = Vec::with_capacity(3);
    for stage in Stage::ALL {
        let cfg = stage.config();
        let seed = stage_seed(master_seed, stage);
        let mut stage_rng = SeededRng::new(seed);
        let mut picks: Vec<(&PhishItem, bool)> = Vec::with_capacity(cfg.balloon_count);
        picks.extend(reals.by_ref().take(cfg.real_count).map(|i| (i, false)));
        picks.extend(fakes.by_ref().take(cfg.fresh_fakes()).map(|i| (i, false)));
        if let Some(prev) = plans.last() {
            let mut carried: Vec<&PhishItem> = prev
                .balloons
                .iter()
                .filter(|b| !b.item.is_legitimate())
                .map(|b| &b.item)
                .collect();
            stage_rng.shuffle(&mut carried);
            picks.extend(
                carried
                    .into_iter()
                    .take(cfg.repeated_fakes_from_previous)
                    .map(|i| (i, true)),
            );
        }
        stage_rng.shuffle(&mut picks);
        plans.push(StagePlan {
            stage,
            seed,
            balloons: picks
                .into_iter()
                .enumerate()
                .map(|(index, (item, is_repeat))| PlannedBalloon {
                    index,
                    item: item.clone(),
                    is_repeat,
                })
                .collect(),
        });
    }

    let mut quiz_items: Vec<QuizItem> = Vec::with_capacity(QUIZ_REALS + QUIZ_FAKES);
    quiz_items.extend(reals.by_ref().take(QUIZ_REALS).map(|i| QuizItem {
        item: i.clone(),
        mode: QuizMode::VerdictOnly,
    }));
    quiz_items.extend(fakes.by_ref().take(QUIZ_FAKES).enumerate().map(|(n, i)| QuizItem {
        item: i.clone(),
        mode: if n < QUIZ_TRICK_ITEMS {
            QuizMode::TrickIdentification
        } else {
            QuizMode::VerdictOnly
        },
    }));
    SeededRng::derive(master_seed, "session/quiz").shuffle(&mut quiz_items);

    let demo_real = reals.next().expect("count checked above");
    let tutorial = tutorial_script(demo_real, &fakes.collect::<Vec<_>>());

    Ok(SessionBlueprint {
        plans,
        quiz: QuizInstrument {
            phase: QuizPhase::PostTutorial,
            items: quiz_items,
        },
        tutorial,
    })
}

/// A legitimate item, then fakes chosen greedily so each adds a trick not yet
/// demonstrated, then the rules of play.
fn tutorial_script(real: &PhishItem, spare_fakes: &[&PhishItem]) -> Vec<TutorialStep> {
    let mut steps = vec![TutorialStep {
        caption: "A legitimate address. The registrable domain, the name just left of the \
                  top-level domain, belongs to the brand, and the scheme is https."
            .into(),
        item: Some(real.clone()),
        annotations: Vec::new(),
    }];
    let mut shown: HashSet<TrickTag> = HashSet::new();
    for fake in spare_fakes {
        if steps.len() > TUTORIAL_FAKES {
            break;
        }
        if fake.tricks().iter().all(|t| shown.contains(t)) {
            continue;
        }
        shown.extend(fake.tricks().iter().copied());
        let names: Vec<&str> = fake.tricks().iter().map(|t| t.label()).collect();
        steps.push(TutorialStep {
            caption: format!("A fake imitating {}. Tricks used: {}.", fake.brand(), names.join(", ")),
            item: Some((*fake).clone()),
            annotations: fake.explanation().to_vec(),
        });
    }
    steps.push(TutorialStep {
        caption: "Aim at a balloon to reveal its address or email. Shoot real ones for 5 points; \
                  shooting a fake costs 1 point and 1 of your 3 lives. Let fakes drift away. \
                  Each balloon gives you 15 seconds once revealed. Press help to ask for a hint."
            .into(),
        item: None,
        annotations: Vec::new(),
    });
    steps
}
