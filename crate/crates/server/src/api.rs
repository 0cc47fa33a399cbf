use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use phishshoot::assessment::{test_hypotheses, AssessmentRecord, QuestionnaireTiming};
use phishshoot::session::{Session, SessionError, SessionId, SessionView};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::ApiError;
use crate::protocol::{
    ActPayload, BalloonPayload, CohortReport, CreateSession, Empty, Envelope, ErrorBody,
    ErrorDetail, QuestionnairePayload, QuizPayload, ReviewPayload, SessionDescriptor, WaitQuery,
};
use crate::store::Store;

/// Longest a long-poll may hang, whatever the client asks for.
pub const MAX_WAIT_MS: u64 = 60_000;
const POLL_MS: u64 = 200;

type Shared = State<Arc<Store>>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(view))
        .route("/v1/sessions/{id}/descriptor", get(descriptor))
        .route("/v1/sessions/{id}/wait", get(wait))
        .route("/v1/sessions/{id}/questionnaire", post(questionnaire))
        .route("/v1/sessions/{id}/tutorial/next", post(tutorial_next))
        .route("/v1/sessions/{id}/quiz", post(quiz))
        .route("/v1/sessions/{id}/stage/start", post(stage_start))
        .route("/v1/sessions/{id}/stage/decline", post(stage_decline))
        .route("/v1/sessions/{id}/aim", post(aim))
        .route("/v1/sessions/{id}/help", post(help))
        .route("/v1/sessions/{id}/act", post(act))
        .route("/v1/sessions/{id}/review", post(review))
        .route("/v1/sessions/{id}/report", get(session_report))
        .route("/v1/report", get(cohort_report))
        .fallback(not_found)
        .with_state(store)
}

async fn not_found() -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            code: "NotFound".into(),
            reason: None,
            message: "no such endpoint".into(),
            current_seq: None,
        },
    };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Validation(e.to_string()))
}

/// Store calls touch the disk, so they run off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Storage(format!("worker failed: {e}")))?
}

async fn run<P, R>(
    store: Arc<Store>,
    id: String,
    endpoint: &'static str,
    body: Bytes,
    op: impl FnOnce(&mut Session, &P, u64) -> Result<R, SessionError> + Send + 'static,
) -> Result<Json<Value>, ApiError>
where
    P: DeserializeOwned + Serialize + Send + 'static,
    R: Serialize,
{
    let env: Envelope<P> = parse(&body)?;
    let id = SessionId(id);
    blocking(move || store.mutate(&id, endpoint, &env, |s, now| op(s, &env.payload, now)))
        .await
        .map(Json)
}

async fn create(State(store): Shared, body: Bytes) -> Result<Json<SessionDescriptor>, ApiError> {
    let req: CreateSession = parse(&body)?;
    blocking(move || store.create_session(&req)).await.map(Json)
}

async fn view(State(store): Shared, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    blocking(move || store.view(&SessionId(id))).await.map(Json)
}

async fn descriptor(
    State(store): Shared,
    Path(id): Path<String>,
) -> Result<Json<SessionDescriptor>, ApiError> {
    blocking(move || store.descriptor(&SessionId(id))).await.map(Json)
}

/// Long-poll: answers as soon as the session's seq passes `after_seq`, or
/// with the current view once `timeout_ms` has elapsed. Timer expiries are
/// detected by the server clock while waiting.
async fn wait(
    State(store): Shared,
    Path(id): Path<String>,
    query: Result<Query<WaitQuery>, QueryRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::Validation(e.body_text()))?;
    let id = SessionId(id);
    let deadline = tokio::time::Instant::now() + Duration::from_millis(q.timeout_ms.min(MAX_WAIT_MS));
    let notify = store.notifier(&id)?;
    loop {
        let notified = notify.notified();
        tokio::pin!(notified);
        notified.as_mut().enable();
        let (s, i) = (store.clone(), id.clone());
        let v = blocking(move || s.view(&i)).await?;
        let now = tokio::time::Instant::now();
        if v.seq > q.after_seq || now >= deadline {
            return Ok(Json(v));
        }
        let nap = deadline.min(now + Duration::from_millis(POLL_MS));
        tokio::select! {
            _ = &mut notified => {}
            _ = tokio::time::sleep_until(nap) => {}
        }
    }
}

async fn questionnaire(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "questionnaire", body, |sess, p: &QuestionnairePayload, now| {
        match p.timing {
            QuestionnaireTiming::Pre => sess.submit_pre_questionnaire(p.response.clone(), now),
            QuestionnaireTiming::Post => sess.submit_post_questionnaire(p.response.clone(), now),
        }
    })
    .await
}

async fn tutorial_next(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "tutorial/next", body, |sess, _: &Empty, now| sess.next_tutorial_step(now)).await
}

async fn quiz(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "quiz", body, |sess, p: &QuizPayload, now| {
        sess.submit_quiz(p.responses.clone(), now)
    })
    .await
}

async fn stage_start(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "stage/start", body, |sess, _: &Empty, now| sess.start_stage(now)).await
}

async fn stage_decline(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "stage/decline", body, |sess, _: &Empty, now| sess.decline_stage(now)).await
}

async fn aim(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "aim", body, |sess, p: &BalloonPayload, now| sess.aim(p.balloon, now)).await
}

async fn help(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "help", body, |sess, p: &BalloonPayload, now| sess.request_help(p.balloon, now)).await
}

async fn act(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "act", body, |sess, p: &ActPayload, now| sess.act(p.balloon, p.action, now)).await
}

async fn review(State(s): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    run(s, id, "review", body, |sess, p: &ReviewPayload, now| {
        sess.answer_review(p.item_id.clone(), p.cues.clone(), now)
    })
    .await
}

async fn session_report(
    State(store): Shared,
    Path(id): Path<String>,
) -> Result<Json<AssessmentRecord>, ApiError> {
    blocking(move || store.record(&SessionId(id))).await.map(Json)
}

async fn cohort_report(State(store): Shared) -> Result<Json<CohortReport>, ApiError> {
    blocking(move || {
        let records = store.records()?;
        let (hypotheses, hypotheses_error) = match test_hypotheses(&records) {
            Ok(h) => (Some(h), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(CohortReport {
            records,
            hypotheses,
            hypotheses_error,
        })
    })
    .await
    .map(Json)
}
