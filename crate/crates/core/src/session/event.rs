//! Session events and their JSONL log format.
//!
//! Each line is `{"v":1,"seq":N,"wall_time_ms":T,"kind":"...","payload":{...}}`.
//! Events that follow from a rule (points, lives, scores, quiz score) carry
//! the derived value so a replay can detect a tampered or divergent log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::feedback::{FactAndAdvice, Hint};
use super::plan::SessionBlueprint;
use super::state::StageEndReason;
use super::{PlayerId, SessionId};
use crate::assessment::{QuestionnaireResponse, QuestionnaireTiming, QuizResponse};
use crate::model::{ItemId, TrickTag, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub v: u32,
    pub seq: u64,
    pub wall_time_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    SessionCreated {
        session_id: SessionId,
        player_id: PlayerId,
        master_seed: u64,
        blueprint: Box<SessionBlueprint>,
    },
    QuestionnaireSubmitted {
        timing: QuestionnaireTiming,
        response: QuestionnaireResponse,
    },
    TutorialStep {
        step: usize,
    },
    QuizAnswer {
        responses: Vec<QuizResponse>,
        score: f64,
    },
    StageStarted {
        stage: Stage,
        lives: u8,
        deadline_ms: u64,
    },
    BalloonPresented {
        stage: Stage,
        balloon: usize,
        item_id: ItemId,
    },
    Aimed {
        stage: Stage,
        balloon: usize,
        first: bool,
    },
    HelpRequested {
        stage: Stage,
        balloon: usize,
        hint: Hint,
    },
    Shot {
        stage: Stage,
        balloon: usize,
        item_id: ItemId,
        correct: bool,
        points: i32,
        stage_score: i32,
        lives: u8,
    },
    Skipped {
        stage: Stage,
        balloon: usize,
        item_id: ItemId,
        correct: bool,
    },
    BalloonTimedOut {
        stage: Stage,
        balloon: usize,
        item_id: ItemId,
        correct: bool,
    },
    FeedbackShown {
        stage: Stage,
        balloon: usize,
        feedback: FactAndAdvice,
    },
    StageEnded {
        stage: Stage,
        reason: StageEndReason,
        stage_score: i32,
        total_score: i32,
    },
    ReviewAnswer {
        item_id: ItemId,
        cues: Vec<TrickTag>,
    },
}

impl EventKind {
    pub const NAMES: [&'static str; 14] = [
        "SessionCreated",
        "QuestionnaireSubmitted",
        "TutorialStep",
        "QuizAnswer",
        "StageStarted",
        "BalloonPresented",
        "Aimed",
        "HelpRequested",
        "Shot",
        "Skipped",
        "BalloonTimedOut",
        "FeedbackShown",
        "StageEnded",
        "ReviewAnswer",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionCreated { .. } => "SessionCreated",
            EventKind::QuestionnaireSubmitted { .. } => "QuestionnaireSubmitted",
            EventKind::TutorialStep { .. } => "TutorialStep",
            EventKind::QuizAnswer { .. } => "QuizAnswer",
            EventKind::StageStarted { .. } => "StageStarted",
            EventKind::BalloonPresented { .. } => "BalloonPresented",
            EventKind::Aimed { .. } => "Aimed",
            EventKind::HelpRequested { .. } => "HelpRequested",
            EventKind::Shot { .. } => "Shot",
            EventKind::Skipped { .. } => "Skipped",
            EventKind::BalloonTimedOut { .. } => "BalloonTimedOut",
            EventKind::FeedbackShown { .. } => "FeedbackShown",
            EventKind::StageEnded { .. } => "StageEnded",
            EventKind::ReviewAnswer { .. } => "ReviewAnswer",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: unsupported schema version {found}")]
    SchemaVersion { line: usize, found: u64 },
    #[error("line {line}: unknown event kind {kind:?}")]
    UnknownEventKind { line: usize, kind: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_log<W: Write>(events: &[SessionEvent], mut out: W) -> Result<(), LogError> {
    for e in events {
        write_event(e, &mut out)?;
    }
    Ok(())
}

pub fn write_event<W: Write>(event: &SessionEvent, mut out: W) -> Result<(), LogError> {
    let line = serde_json::to_string(event).map_err(|e| LogError::Parse {
        line: event.seq as usize + 1,
        message: e.to_string(),
    })?;
    writeln!(out, "{line}")?;
    Ok(())
}

/// Parses one log line; `line` is 1-based and used only for errors.
pub fn parse_event(text: &str, line: usize) -> Result<SessionEvent, LogError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LogError::Parse {
        line,
        message: e.to_string(),
    })?;
    match value.get("v").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(LogError::SchemaVersion { line, found }),
        None => {
            return Err(LogError::Parse {
                line,
                message: "missing schema version field \"v\"".into(),
            })
        }
    }
    if let Some(kind) = value.get("kind").and_then(serde_json::Value::as_str) {
        if !EventKind::NAMES.contains(&kind) {
            return Err(LogError::UnknownEventKind {
                line,
                kind: kind.to_owned(),
            });
        }
    }
    serde_json::from_value(value).map_err(|e| LogError::Parse {
        line,
        message: e.to_string(),
    })
}

/// Reads a JSONL log, skipping blank lines.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<SessionEvent>, LogError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_event(&line, n + 1)?);
    }
    Ok(out)
}
