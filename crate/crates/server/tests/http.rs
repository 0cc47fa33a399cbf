use std::sync::Arc;
use std::time::{Duration, Instant};

use phishshoot::corpus::{default_brands, generate_corpus, GenerationSpec};
use phishshoot::session::{EventKind, PlayerAction, PlayerId, SessionId, SessionView, StageEndReason};
use phishshoot::simulation::{play_with, run_bot, BotProfile, GameDriver, SimError, BOT_EPOCH_MS};
use phishshoot::PhishItem;
use phishshoot_server::audit::{leaks, public_items};
use phishshoot_server::protocol::{ActionResponse, CreateSession, Envelope, ErrorBody};
use phishshoot_server::{ApiClient, HttpDriver, ManualClock, RunningServer, Store, Waiter};
use serde_json::Value;
use tempfile::TempDir;

const SEED: u64 = 77;

fn corpus() -> Vec<PhishItem> {
    generate_corpus(&default_brands(), &GenerationSpec::new(11, 240)).unwrap()
}

struct Harness {
    dir: TempDir,
    clock: Arc<ManualClock>,
    server: Option<RunningServer>,
    corpus: Vec<PhishItem>,
}

impl Harness {
    fn new(tick: Option<Duration>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(BOT_EPOCH_MS));
        let corpus = corpus();
        let store = Store::open(dir.path(), clock.clone()).unwrap();
        store.install_corpus("main", &corpus).unwrap();
        let server = RunningServer::spawn(Arc::new(store), "127.0.0.1:0", tick).unwrap();
        Self {
            dir,
            clock,
            server: Some(server),
            corpus,
        }
    }

    fn server(&self) -> &RunningServer {
        self.server.as_ref().unwrap()
    }

    fn url(&self) -> String {
        self.server().base_url()
    }

    fn waiter(&self) -> Waiter {
        let c = self.clock.clone();
        Box::new(move |ms| c.advance(ms))
    }

    fn driver(&self, player: &str) -> HttpDriver {
        HttpDriver::create(&self.url(), PlayerId(player.into()), "main", SEED, self.waiter()).unwrap()
    }

    fn restart(&mut self, tick: Option<Duration>) {
        self.server.take().unwrap().stop().unwrap();
        let store = Store::open(self.dir.path(), self.clock.clone()).unwrap();
        self.server = Some(RunningServer::spawn(Arc::new(store), "127.0.0.1:0", tick).unwrap());
    }
}

fn profiles() -> Vec<BotProfile> {
    let mut out = Vec::new();
    for s in 0..4u64 {
        let mut p = BotProfile::new(0.55 + 0.1 * s as f64, 40 + s);
        p.name = Some(format!("wire-{s}"));
        p.memory = s % 2 == 1;
        p.help_propensity = 0.25;
        p.timeout_propensity = 0.1;
        p.decline_propensity = 0.25;
        p.self_report_weight = 2.0;
        out.push(p);
    }
    out
}

#[test]
fn http_runs_match_in_process_runs() {
    let h = Harness::new(Some(Duration::from_millis(20)));
    for p in profiles() {
        h.clock.set(BOT_EPOCH_MS);
        let mut d = HttpDriver::create(&h.url(), p.player_id(), "main", SEED, h.waiter()).unwrap();
        play_with(&mut d, &p, &h.corpus).unwrap();
        let remote = d.report().unwrap();
        let local = run_bot(&p, &h.corpus, SEED).unwrap();
        assert_eq!(remote, local.record, "{:?}", p.name);
        assert_eq!(h.server().store().log(d.session_id()).unwrap(), local.log);
    }
}

#[test]
fn no_response_leaks_unresolved_ground_truth() {
    let h = Harness::new(None);
    let p = &profiles()[3];
    let mut d = HttpDriver::create(&h.url(), p.player_id(), "main", SEED, h.waiter()).unwrap();
    d.client().record_transcript();
    play_with(&mut d, p, &h.corpus).unwrap();
    let log = h.server().store().log(d.session_id()).unwrap();
    let bodies = d.client().transcript().to_vec();
    assert!(bodies.len() > 50, "{}", bodies.len());
    let mut seq = 0;
    for body in &bodies {
        let v: Value = serde_json::from_str(body).unwrap();
        if let Some(s) = v.get("seq").and_then(Value::as_u64) {
            seq = s;
        }
        let found = leaks(&v, &public_items(&log, seq));
        assert!(found.is_empty(), "{found:?} in {body}");
    }
}

#[test]
fn the_scan_catches_a_planted_leak() {
    let h = Harness::new(None);
    let mut d = h.driver("planted");
    let view = d.view().unwrap();
    let log = h.server().store().log(d.session_id()).unwrap();
    let mut v = serde_json::to_value(&view).unwrap();
    let quiz_item = view.quiz[0].item_id.clone();
    v["quiz"][0]["tricks"] = serde_json::json!(["WrongTld"]);
    let found = leaks(&v, &public_items(&log, view.seq));
    assert_eq!(found.len(), 1, "{found:?}");
    assert!(found[0].contains(&quiz_item.0));
}

fn first_balloon(d: &mut HttpDriver) -> usize {
    use phishshoot::assessment::{QuestionnaireResponse, QuestionnaireTiming, QuizResponse};
    d.submit_questionnaire(
        QuestionnaireTiming::Pre,
        QuestionnaireResponse {
            self_efficacy: vec![3; 10],
            motivation: vec![3; 3],
        },
    )
    .unwrap();
    let v = d.view().unwrap();
    for _ in 0..v.tutorial_total {
        d.next_tutorial_step().unwrap();
    }
    let v = d.view().unwrap();
    let responses = v
        .quiz
        .iter()
        .map(|q| QuizResponse {
            item_id: q.item_id.clone(),
            verdict: phishshoot::Verdict::Phishing,
            tricks: vec![],
        })
        .collect();
    d.submit_quiz(responses).unwrap();
    d.start_stage().unwrap();
    let b = d.view().unwrap().current_balloon().unwrap().index;
    d.aim(b).unwrap();
    b
}

fn raw_post(url: &str, body: &str) -> (u16, String) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut r = agent
        .post(url)
        .header("content-type", "application/json")
        .send(body)
        .unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

fn current_seq(h: &Harness, id: &SessionId) -> u64 {
    h.server().store().view(id).unwrap().seq
}

#[test]
fn a_resent_action_is_applied_once() {
    let h = Harness::new(None);
    let mut d = h.driver("resend");
    let b = first_balloon(&mut d);
    let id = d.session_id().clone();
    let body = serde_json::to_string(&Envelope {
        seq_expected: current_seq(&h, &id),
        action_id: "shoot-once".into(),
        payload: serde_json::json!({"balloon": b, "action": "shoot"}),
    })
    .unwrap();
    let url = format!("{}/v1/sessions/{id}/act", h.url());
    let first = raw_post(&url, &body);
    let second = raw_post(&url, &body);
    assert_eq!(first.0, 200);
    assert_eq!(first, second);
    let shots = h
        .server()
        .store()
        .log(&id)
        .unwrap()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Shot { .. }))
        .count();
    assert_eq!(shots, 1);

    // Same key, different request.
    let other = body.replace("\"shoot\"", "\"skip\"");
    let (status, text) = raw_post(&url, &other);
    assert_eq!(status, 409);
    let e: ErrorBody = serde_json::from_str(&text).unwrap();
    assert_eq!(e.error.code, "DuplicateActionId");
}

#[test]
fn stale_tokens_are_rejected() {
    let h = Harness::new(None);
    let mut d = h.driver("stale");
    let b = first_balloon(&mut d);
    let id = d.session_id().clone();
    let seq = current_seq(&h, &id);
    let url = format!("{}/v1/sessions/{id}", h.url());
    let help = |aid: &str, s: u64| {
        raw_post(
            &format!("{url}/help"),
            &serde_json::to_string(&Envelope {
                seq_expected: s,
                action_id: aid.into(),
                payload: serde_json::json!({"balloon": b}),
            })
            .unwrap(),
        )
    };
    assert_eq!(help("h1", seq).0, 200);
    let (status, text) = help("h2", seq);
    assert_eq!(status, 409);
    let e: ErrorBody = serde_json::from_str(&text).unwrap();
    assert_eq!(e.error.code, "StaleSeq");
    assert_eq!(e.error.current_seq, Some(seq + 1));
    // A token from the future is just as wrong.
    assert_eq!(help("h3", seq + 5).0, 409);
    assert_eq!(help("h4", seq + 1).0, 200);
}

#[test]
fn timer_events_do_not_make_a_token_stale() {
    let h = Harness::new(None);
    let mut d = h.driver("timers");
    let b = first_balloon(&mut d);
    let id = d.session_id().clone();
    let seq = current_seq(&h, &id);
    h.clock.advance(16_000);
    // The view ticks, appending a timeout the client has not seen.
    assert!(current_seq(&h, &id) > seq);
    let body = serde_json::to_string(&Envelope {
        seq_expected: seq,
        action_id: "late".into(),
        payload: serde_json::json!({"balloon": b, "action": "skip"}),
    })
    .unwrap();
    let (status, text) = raw_post(&format!("{}/v1/sessions/{id}/act", h.url()), &body);
    assert_eq!(status, 200, "{text}");
    let r: ActionResponse<phishshoot::session::ActOutcome> = serde_json::from_str(&text).unwrap();
    assert_eq!(r.result.outcome.action, phishshoot::session::BalloonAction::TimedOut);
}

#[test]
fn errors_are_json_with_codes() {
    let h = Harness::new(None);
    let url = h.url();
    let (s, t) = raw_post(&format!("{url}/v1/sessions/s-nope/aim"), r#"{"seq_expected":0,"action_id":"x","payload":{"balloon":0}}"#);
    assert_eq!(s, 404);
    assert_eq!(serde_json::from_str::<ErrorBody>(&t).unwrap().error.code, "UnknownSession");

    let mut d = h.driver("errors");
    let id = d.session_id().clone();
    let (s, t) = raw_post(&format!("{url}/v1/sessions/{id}/aim"), "{not json");
    assert_eq!(s, 400);
    assert_eq!(serde_json::from_str::<ErrorBody>(&t).unwrap().error.code, "ValidationError");

    let (s, t) = raw_post(
        &format!("{url}/v1/sessions/{id}/stage/start"),
        r#"{"seq_expected":0,"action_id":"early","payload":{}}"#,
    );
    assert_eq!(s, 422);
    let e = serde_json::from_str::<ErrorBody>(&t).unwrap().error;
    assert_eq!((e.code.as_str(), e.reason.as_deref()), ("ValidationError", Some("WrongPhase")));

    match d.start_stage() {
        Err(SimError::Rejected { code, .. }) => assert_eq!(code, "WrongPhase"),
        other => panic!("{other:?}"),
    }

    let (s, t) = raw_post(
        &format!("{url}/v1/sessions"),
        r#"{"player_id":"p","corpus_ref":"missing","seed":1}"#,
    );
    assert_eq!(s, 404);
    assert_eq!(serde_json::from_str::<ErrorBody>(&t).unwrap().error.code, "UnknownCorpus");
    let (s, _) = raw_post(&format!("{url}/v1/sessions"), r#"{"player_id":"p","corpus_ref":"../etc","seed":1}"#);
    assert_eq!(s, 400);
}

#[test]
fn creation_is_idempotent_and_ids_do_not_collide() {
    let h = Harness::new(None);
    let mut c = ApiClient::new(h.url());
    let req = |aid: &str| CreateSession {
        player_id: PlayerId("twin".into()),
        corpus_ref: "main".into(),
        seed: 5,
        action_id: Some(aid.into()),
    };
    let a = c.create_session(&req("one")).unwrap();
    let again = c.create_session(&req("one")).unwrap();
    let b = c.create_session(&req("two")).unwrap();
    assert_eq!(a, again);
    assert_eq!(b.session_id.0, format!("{}-2", a.session_id.0));
    assert_eq!(a.session_id, SessionId::derive(&PlayerId("twin".into()), 5, &h.corpus));
}

#[test]
fn restart_replays_every_session() {
    let mut h = Harness::new(None);
    let mut d = h.driver("durable");
    let b = first_balloon(&mut d);
    d.act(b, PlayerAction::Shoot).unwrap();
    let id = d.session_id().clone();
    let before: SessionView = h.server().store().view(&id).unwrap();
    let log_before = h.server().store().log(&id).unwrap();

    h.restart(None);
    assert_eq!(h.server().store().log(&id).unwrap(), log_before);
    assert_eq!(h.server().store().view(&id).unwrap(), before);

    // Idempotency records survive too: the first action is answered again.
    let mut c = ApiClient::new(h.url());
    let env = Envelope {
        seq_expected: 0,
        action_id: "a-0".to_owned(),
        payload: serde_json::to_value(serde_json::json!({
            "timing": "pre",
            "response": {"self_efficacy": vec![3; 10], "motivation": vec![3; 3]}
        }))
        .unwrap(),
    };
    let r: ActionResponse<Value> = c.post(&format!("/v1/sessions/{id}/questionnaire"), &env).unwrap();
    assert_eq!(r.seq, 1);

    // The client may carry on with its old token.
    let mut d2 = HttpDriver::attach(ApiClient::new(h.url()), id.clone(), before.seq, "b", h.waiter());
    let next = d2.view().unwrap().current_balloon().unwrap().index;
    d2.aim(next).unwrap();
}

#[test]
fn a_torn_final_line_is_dropped_on_restart() {
    use std::io::Write;
    let mut h = Harness::new(None);
    let d = h.driver("torn");
    let id = d.session_id().clone();
    let log_before = h.server().store().log(&id).unwrap();
    let path = h.dir.path().join(format!("sessions/{id}.jsonl"));
    std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(br#"{"v":1,"seq":1,"wall_ti"#)
        .unwrap();
    h.restart(None);
    assert_eq!(h.server().store().log(&id).unwrap(), log_before);
}

#[test]
fn long_poll_reports_a_timeout() {
    let h = Harness::new(None);
    let mut d = h.driver("poll");
    let b = first_balloon(&mut d);
    let id = d.session_id().clone();
    let seq = current_seq(&h, &id);
    let url = format!("{}/v1/sessions/{id}/wait?after_seq={seq}&timeout_ms=10000", h.url());
    let clock = h.clock.clone();
    let bump = std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(300));
        clock.advance(15_000);
    });
    let started = Instant::now();
    let mut c = ApiClient::new(url.clone());
    let v: SessionView = c.get("").unwrap();
    bump.join().unwrap();
    assert!(started.elapsed() < Duration::from_secs(5));
    assert!(v.seq > seq);
    let run = v.running_stage().unwrap();
    assert_eq!(run.outcomes[b].action, phishshoot::session::BalloonAction::TimedOut);

    // Nothing pending: the poll gives up after its timeout.
    let quiet = format!("{}/v1/sessions/{id}/wait?after_seq={}&timeout_ms=300", h.url(), v.seq);
    let v2: SessionView = ApiClient::new(quiet).get("").unwrap();
    assert_eq!(v2.seq, v.seq);
}

#[test]
fn the_ticker_expires_idle_stages() {
    let h = Harness::new(Some(Duration::from_millis(20)));
    let mut d = h.driver("idle");
    first_balloon(&mut d);
    let id = d.session_id().clone();
    h.clock.advance(200_000);
    let started = Instant::now();
    loop {
        let log = h.server().store().log(&id).unwrap();
        if log
            .iter()
            .any(|e| matches!(e.kind, EventKind::StageEnded { reason: StageEndReason::TimeUp, .. }))
        {
            break;
        }
        assert!(started.elapsed() < Duration::from_secs(5), "ticker never fired");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn cohort_report_covers_all_sessions() {
    let h = Harness::new(None);
    for i in 0..6u64 {
        h.clock.set(BOT_EPOCH_MS);
        let mut p = BotProfile::new(0.4 + 0.1 * i as f64, i);
        p.name = Some(format!("c{i}"));
        p.observational_skill = Some(0.1 * i as f64 + 0.2);
        p.self_report_weight = 4.0;
        let mut d = HttpDriver::create(&h.url(), p.player_id(), "main", SEED, h.waiter()).unwrap();
        play_with(&mut d, &p, &h.corpus).unwrap();
    }
    let report = ApiClient::new(h.url()).cohort_report().unwrap();
    assert_eq!(report.records.len(), 6);
    let hyp = report.hypotheses.expect("six complete records");
    assert_eq!(hyp.complete_records, 6);
}
