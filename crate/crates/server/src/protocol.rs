//! Wire types. See `docs/protocol.md` for the full description.

use phishshoot::assessment::{
    AssessmentRecord, HypothesisReport, QuestionnaireResponse, QuestionnaireTiming, QuizResponse,
};
use phishshoot::session::{PlayerAction, PlayerId, SessionEvent, SessionId};
use phishshoot::{ItemId, TrickTag};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Body of every state-changing request on an existing session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<P> {
    /// The `seq` of the latest response or view the client has seen.
    pub seq_expected: u64,
    /// Client-chosen key; resending it returns the first result again.
    pub action_id: String,
    pub payload: P,
}

/// Payload of endpoints that take no parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub player_id: PlayerId,
    /// Name of a corpus file under the data directory's `corpora/`.
    pub corpus_ref: String,
    pub seed: u64,
    #[serde(default)]
    pub action_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: SessionId,
    pub player_id: PlayerId,
    pub corpus_ref: String,
    pub seed: u64,
    pub created_ms: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnairePayload {
    pub timing: QuestionnaireTiming,
    pub response: QuestionnaireResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizPayload {
    pub responses: Vec<QuizResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalloonPayload {
    pub balloon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActPayload {
    pub balloon: usize,
    pub action: PlayerAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewPayload {
    pub item_id: ItemId,
    pub cues: Vec<TrickTag>,
}

/// Successful answer to a state-changing request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResponse<R> {
    pub session_id: SessionId,
    pub action_id: String,
    /// Seq of the last event after the action; send it as the next
    /// `seq_expected`.
    pub seq: u64,
    pub result: R,
    /// Every event appended while handling the request, timer expiries
    /// included.
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub records: Vec<AssessmentRecord>,
    pub hypotheses: Option<HypothesisReport>,
    /// Why `hypotheses` is absent.
    pub hypotheses_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

/// Query of the long-poll endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitQuery {
    pub after_seq: u64,
    #[serde(default = "default_wait_ms")]
    pub timeout_ms: u64,
}

fn default_wait_ms() -> u64 {
    25_000
}

