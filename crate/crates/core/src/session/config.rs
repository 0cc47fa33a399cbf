//! Stage parameter tables.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Easy,
    Medium,
    Advance,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Easy, Stage::Medium, Stage::Advance];

    pub fn config(self) -> &'static StageConfig {
        match self {
            Stage::Easy => &EASY,
            Stage::Medium => &MEDIUM,
            Stage::Advance => &ADVANCE,
        }
    }

    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Easy => Some(Stage::Medium),
            Stage::Medium => Some(Stage::Advance),
            Stage::Advance => None,
        }
    }

    pub fn previous(self) -> Option<Stage> {
        match self {
            Stage::Easy => None,
            Stage::Medium => Some(Stage::Easy),
            Stage::Advance => Some(Stage::Medium),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Easy => "easy",
            Stage::Medium => "medium",
            Stage::Advance => "advance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub balloon_count: usize,
    pub real_count: usize,
    pub fake_count: usize,
    /// Fakes carried over from the immediately preceding stage.
    pub repeated_fakes_from_previous: usize,
    pub total_seconds: u64,
    pub per_balloon_seconds: u64,
    pub lives: u8,
    pub points_correct: i32,
    pub points_wrong: i32,
}

impl StageConfig {
    pub fn total_ms(&self) -> u64 {
        self.total_seconds * 1000
    }

    pub fn per_balloon_ms(&self) -> u64 {
        self.per_balloon_seconds * 1000
    }

    /// Fakes that have not appeared in an earlier stage.
    pub fn fresh_fakes(&self) -> usize {
        self.fake_count - self.repeated_fakes_from_previous
    }
}

pub const POINTS_CORRECT: i32 = 5;
pub const POINTS_WRONG: i32 = -1;
pub const LIVES: u8 = 3;
pub const PER_BALLOON_SECONDS: u64 = 15;

pub const EASY: StageConfig = StageConfig {
    stage: Stage::Easy,
    balloon_count: 10,
    real_count: 7,
    fake_count: 3,
    repeated_fakes_from_previous: 0,
    total_seconds: 150,
    per_balloon_seconds: PER_BALLOON_SECONDS,
    lives: LIVES,
    points_correct: POINTS_CORRECT,
    points_wrong: POINTS_WRONG,
};

pub const MEDIUM: StageConfig = StageConfig {
    stage: Stage::Medium,
    balloon_count: 15,
    real_count: 8,
    fake_count: 7,
    repeated_fakes_from_previous: 3,
    total_seconds: 225,
    per_balloon_seconds: PER_BALLOON_SECONDS,
    lives: LIVES,
    points_correct: POINTS_CORRECT,
    points_wrong: POINTS_WRONG,
};

pub const ADVANCE: StageConfig = StageConfig {
    stage: Stage::Advance,
    balloon_count: 20,
    real_count: 10,
    fake_count: 10,
    repeated_fakes_from_previous: 4,
    total_seconds: 300,
    per_balloon_seconds: PER_BALLOON_SECONDS,
    lives: LIVES,
    points_correct: POINTS_CORRECT,
    points_wrong: POINTS_WRONG,
};
