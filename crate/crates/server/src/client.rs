//! Blocking client for the JSON protocol.

use std::time::Duration;

use phishshoot::assessment::{
    AssessmentRecord, QuestionnaireResponse, QuestionnaireTiming, QuizResponse, QuizScore,
};
use phishshoot::session::{
    ActOutcome, Hint, PlayerAction, PlayerId, SessionId, SessionView, Stage, TutorialStepView,
};
use phishshoot::simulation::{GameDriver, SimError};
use phishshoot::{ItemId, Payload, TrickTag};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::protocol::{
    ActPayload, ActionResponse, BalloonPayload, CohortReport, CreateSession, Empty, Envelope,
    ErrorBody, QuestionnairePayload, QuizPayload, ReviewPayload, SessionDescriptor,
};

/// How a driver lets game time pass.
pub type Waiter = Box<dyn FnMut(u64) + Send>;

/// Sleeps for real; for servers on the system clock.
pub fn sleeping_waiter() -> Waiter {
    Box::new(|ms| std::thread::sleep(Duration::from_millis(ms)))
}

const ATTEMPTS: usize = 3;

/// Thin JSON-over-HTTP helper. Every raw response body can be kept for
/// inspection.
pub struct ApiClient {
    agent: ureq::Agent,
    base: String,
    transcript: Option<Vec<String>>,
}

impl ApiClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(90)))
            .build()
            .into();
        Self {
            agent,
            base: base_url.into().trim_end_matches('/').to_owned(),
            transcript: None,
        }
    }

    /// Starts keeping every response body.
    pub fn record_transcript(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> &[String] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    fn finish<T: DeserializeOwned>(&mut self, status: u16, text: String) -> Result<T, SimError> {
        if let Some(t) = &mut self.transcript {
            t.push(text.clone());
        }
        if (200..300).contains(&status) {
            return serde_json::from_str(&text).map_err(|e| SimError::Transport(format!("bad response: {e}")));
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => Err(SimError::Rejected {
                code: b.error.reason.unwrap_or(b.error.code),
                message: b.error.message,
            }),
            Err(_) => Err(SimError::Transport(format!("HTTP {status}: {text}"))),
        }
    }

    /// GET, retried on transport failure.
    pub fn get<T: DeserializeOwned>(&mut self, path: &str) -> Result<T, SimError> {
        let url = format!("{}{path}", self.base);
        let mut last = String::new();
        for _ in 0..ATTEMPTS {
            match self.agent.get(&url).call() {
                Ok(mut r) => {
                    let status = r.status().as_u16();
                    let text = r.body_mut().read_to_string().map_err(|e| SimError::Transport(e.to_string()))?;
                    return self.finish(status, text);
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(SimError::Transport(last))
    }

    /// POST, resent unchanged on transport failure. Mutating requests carry
    /// an action id, so a resend is answered with the first result.
    pub fn post<B: Serialize, T: DeserializeOwned>(&mut self, path: &str, body: &B) -> Result<T, SimError> {
        let url = format!("{}{path}", self.base);
        let json = serde_json::to_string(body).map_err(|e| SimError::Transport(e.to_string()))?;
        let mut last = String::new();
        for _ in 0..ATTEMPTS {
            match self
                .agent
                .post(&url)
                .header("content-type", "application/json")
                .send(json.as_str())
            {
                Ok(mut r) => {
                    let status = r.status().as_u16();
                    let text = r.body_mut().read_to_string().map_err(|e| SimError::Transport(e.to_string()))?;
                    return self.finish(status, text);
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(SimError::Transport(last))
    }

    pub fn create_session(&mut self, req: &CreateSession) -> Result<SessionDescriptor, SimError> {
        self.post("/v1/sessions", req)
    }

    pub fn cohort_report(&mut self) -> Result<CohortReport, SimError> {
        self.get("/v1/report")
    }
}

/// Plays one session over HTTP. Tracks the latest seq it has seen and
/// numbers its actions `{prefix}-{n}`.
pub struct HttpDriver {
    client: ApiClient,
    session_id: SessionId,
    seq: u64,
    prefix: String,
    next_action: u64,
    waiter: Waiter,
}

impl HttpDriver {
    pub fn create(
        base_url: &str,
        player: PlayerId,
        corpus_ref: &str,
        seed: u64,
        waiter: Waiter,
    ) -> Result<Self, SimError> {
        let mut client = ApiClient::new(base_url);
        let d = client.create_session(&CreateSession {
            player_id: player.clone(),
            corpus_ref: corpus_ref.to_owned(),
            seed,
            action_id: Some(format!("create-{}-{seed}", player.0)),
        })?;
        Ok(Self::attach(client, d.session_id, d.seq, "a", waiter))
    }

    /// Drives an existing session. `prefix` must differ from any earlier
    /// driver's on the same session.
    pub fn attach(client: ApiClient, session_id: SessionId, seq: u64, prefix: &str, waiter: Waiter) -> Self {
        Self {
            client,
            session_id,
            seq,
            prefix: prefix.to_owned(),
            next_action: 0,
            waiter,
        }
    }

    pub fn session_id(&self) -> &SessionId {
        &self.session_id
    }

    pub fn client(&mut self) -> &mut ApiClient {
        &mut self.client
    }

    pub fn into_client(self) -> ApiClient {
        self.client
    }

    pub fn report(&mut self) -> Result<AssessmentRecord, SimError> {
        let path = format!("/v1/sessions/{}/report", self.session_id);
        self.client.get(&path)
    }

    /// Sends one action and returns its result.
    pub fn send<P: Serialize, R: DeserializeOwned>(&mut self, endpoint: &str, payload: P) -> Result<R, SimError> {
        let env = Envelope {
            seq_expected: self.seq,
            action_id: format!("{}-{}", self.prefix, self.next_action),
            payload,
        };
        self.next_action += 1;
        let path = format!("/v1/sessions/{}/{endpoint}", self.session_id);
        let resp: ActionResponse<Value> = self.client.post(&path, &env)?;
        self.seq = resp.seq;
        serde_json::from_value(resp.result).map_err(|e| SimError::Transport(format!("bad result: {e}")))
    }
}

impl GameDriver for HttpDriver {
    fn view(&mut self) -> Result<SessionView, SimError> {
        let path = format!("/v1/sessions/{}", self.session_id);
        let v: SessionView = self.client.get(&path)?;
        self.seq = v.seq;
        Ok(v)
    }

    fn submit_questionnaire(
        &mut self,
        timing: QuestionnaireTiming,
        response: QuestionnaireResponse,
    ) -> Result<(), SimError> {
        self.send("questionnaire", QuestionnairePayload { timing, response })
    }

    fn next_tutorial_step(&mut self) -> Result<TutorialStepView, SimError> {
        self.send("tutorial/next", Empty {})
    }

    fn submit_quiz(&mut self, responses: Vec<QuizResponse>) -> Result<QuizScore, SimError> {
        self.send("quiz", QuizPayload { responses })
    }

    fn start_stage(&mut self) -> Result<Stage, SimError> {
        self.send("stage/start", Empty {})
    }

    fn decline_stage(&mut self) -> Result<Stage, SimError> {
        self.send("stage/decline", Empty {})
    }

    fn aim(&mut self, balloon: usize) -> Result<Payload, SimError> {
        self.send("aim", BalloonPayload { balloon })
    }

    fn request_help(&mut self, balloon: usize) -> Result<Hint, SimError> {
        self.send("help", BalloonPayload { balloon })
    }

    fn act(&mut self, balloon: usize, action: PlayerAction) -> Result<ActOutcome, SimError> {
        self.send("act", ActPayload { balloon, action })
    }

    fn answer_review(&mut self, item_id: ItemId, cues: Vec<TrickTag>) -> Result<(), SimError> {
        self.send("review", ReviewPayload { item_id, cues })
    }

    fn wait(&mut self, ms: u64) -> Result<(), SimError> {
        (self.waiter)(ms);
        Ok(())
    }
}
