//! File-backed session storage.
//!
//! Layout under the data directory:
//!
//! ```text
//! index.json                      session id -> log path
//! sessions/<id>.jsonl             the event log, one event per line
//! sessions/<id>.actions.jsonl     idempotency records, one per action
//! corpora/<ref>.jsonl             corpora sessions may be created from
//! ```
//!
//! Every event is written and synced before the request that caused it is
//! acknowledged. Opening a store replays every indexed log.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use phishshoot::assessment::{assessment_record, AssessmentRecord};
use phishshoot::corpus::read_corpus;
use phishshoot::session::{
    read_log, write_event, Session, SessionError, SessionEvent, SessionId, SessionView,
};
use phishshoot::PhishItem;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Notify;

use crate::clock::Clock;
use crate::error::ApiError;
use crate::protocol::{ActionResponse, CreateSession, Envelope, SessionDescriptor, PROTOCOL_VERSION};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    v: u32,
    sessions: BTreeMap<SessionId, IndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    log: String,
    corpus_ref: String,
    seed: u64,
}

/// One handled request, kept so a resend can be answered identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionRecord {
    action_id: String,
    endpoint: String,
    request: Value,
    response: Value,
}

struct Entry {
    session: Session,
    log_file: BufWriter<File>,
    actions_file: BufWriter<File>,
    actions: HashMap<String, ActionRecord>,
    /// Seq after the last client action. Timer events appended since do not
    /// make a client's token stale.
    client_seq: u64,
    descriptor: SessionDescriptor,
    index_entry: IndexEntry,
    notify: Arc<Notify>,
}

impl Entry {
    fn append_events(&mut self, events: &[SessionEvent]) -> std::io::Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        for e in events {
            write_event(e, &mut self.log_file).map_err(std::io::Error::other)?;
        }
        self.log_file.flush()?;
        self.log_file.get_ref().sync_data()?;
        self.notify.notify_waiters();
        Ok(())
    }

    fn append_action(&mut self, record: ActionRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.actions_file, &record)?;
        self.actions_file.write_all(b"\n")?;
        self.actions_file.flush()?;
        self.actions_file.get_ref().sync_data()?;
        self.actions.insert(record.action_id.clone(), record);
        Ok(())
    }

    /// Applies timeouts due by `now` and persists them.
    fn tick(&mut self, now_ms: u64) -> Result<(), ApiError> {
        let mark = self.session.log().len();
        self.session.tick(now_ms)?;
        let new = self.session.log()[mark..].to_vec();
        self.append_events(&new)?;
        Ok(())
    }
}

pub struct Store {
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    sessions: RwLock<BTreeMap<SessionId, Arc<Mutex<Entry>>>>,
    index: Mutex<Index>,
    corpora: Mutex<HashMap<String, Arc<Vec<PhishItem>>>>,
}

fn lock(m: &Mutex<Entry>) -> MutexGuard<'_, Entry> {
    // A panic inside a handler leaves the entry as it was after its last
    // successful write, so the data is still usable.
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn valid_ref(r: &str) -> bool {
    !r.is_empty()
        && r.len() <= 128
        && r.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !r.starts_with('.')
}

fn open_append(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?))
}

impl Store {
    /// Opens (creating if needed) a data directory and replays every session
    /// listed in its index.
    pub fn open(dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self, ApiError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("sessions"))?;
        fs::create_dir_all(dir.join("corpora"))?;
        let index_path = dir.join(INDEX_FILE);
        let index: Index = if index_path.exists() {
            serde_json::from_slice(&fs::read(&index_path)?)
                .map_err(|e| ApiError::Storage(format!("{}: {e}", index_path.display())))?
        } else {
            Index {
                v: PROTOCOL_VERSION,
                sessions: BTreeMap::new(),
            }
        };
        let mut sessions = BTreeMap::new();
        for (id, ie) in &index.sessions {
            let entry = Self::load_entry(&dir, id, ie)?;
            sessions.insert(id.clone(), Arc::new(Mutex::new(entry)));
        }
        Ok(Self {
            dir,
            clock,
            sessions: RwLock::new(sessions),
            index: Mutex::new(index),
            corpora: Mutex::new(HashMap::new()),
        })
    }

    fn load_entry(dir: &Path, id: &SessionId, ie: &IndexEntry) -> Result<Entry, ApiError> {
        let log_path = dir.join(&ie.log);
        drop_torn_tail(&log_path)?;
        let events = read_log(BufReader::new(File::open(&log_path)?))
            .map_err(|e| ApiError::Storage(format!("{}: {e}", log_path.display())))?;
        let session = Session::from_log(events)
            .map_err(|e| ApiError::Storage(format!("{}: {e}", log_path.display())))?;
        if &session.state().session_id != id {
            return Err(ApiError::Storage(format!("{} holds another session", log_path.display())));
        }
        let actions_path = actions_path(&log_path);
        let mut actions = HashMap::new();
        let mut client_seq = 0;
        if actions_path.exists() {
            drop_torn_tail(&actions_path)?;
            for (n, line) in fs::read_to_string(&actions_path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ActionRecord = serde_json::from_str(line).map_err(|e| {
                    ApiError::Storage(format!("{} line {}: {e}", actions_path.display(), n + 1))
                })?;
                if let Some(seq) = rec.response.get("seq").and_then(Value::as_u64) {
                    client_seq = client_seq.max(seq);
                }
                actions.insert(rec.action_id.clone(), rec);
            }
        }
        let state = session.state();
        let descriptor = SessionDescriptor {
            session_id: id.clone(),
            player_id: state.player_id.clone(),
            corpus_ref: ie.corpus_ref.clone(),
            seed: ie.seed,
            created_ms: session.log()[0].wall_time_ms,
            seq: 0,
        };
        Ok(Entry {
            log_file: open_append(&log_path)?,
            actions_file: open_append(&actions_path)?,
            actions,
            client_seq,
            descriptor,
            index_entry: ie.clone(),
            notify: Arc::new(Notify::new()),
            session,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect()
    }

    fn entry(&self, id: &SessionId) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.clone()))
    }

    pub fn corpus(&self, corpus_ref: &str) -> Result<Arc<Vec<PhishItem>>, ApiError> {
        if !valid_ref(corpus_ref) {
            return Err(ApiError::Validation(format!("bad corpus_ref {corpus_ref:?}")));
        }
        let mut cache = self.corpora.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(c) = cache.get(corpus_ref) {
            return Ok(c.clone());
        }
        let path = self.dir.join("corpora").join(format!("{corpus_ref}.jsonl"));
        let file = File::open(&path).map_err(|_| ApiError::UnknownCorpus(corpus_ref.to_owned()))?;
        let items = read_corpus(BufReader::new(file))
            .map_err(|e| ApiError::Storage(format!("{}: {e}", path.display())))?;
        let items = Arc::new(items);
        cache.insert(corpus_ref.to_owned(), items.clone());
        Ok(items)
    }

    /// Installs a corpus file under `corpora/`.
    pub fn install_corpus(&self, corpus_ref: &str, items: &[PhishItem]) -> Result<(), ApiError> {
        if !valid_ref(corpus_ref) {
            return Err(ApiError::Validation(format!("bad corpus_ref {corpus_ref:?}")));
        }
        let path = self.dir.join("corpora").join(format!("{corpus_ref}.jsonl"));
        let mut out = BufWriter::new(File::create(&path)?);
        phishshoot::corpus::write_corpus(items, &mut out)
            .map_err(|e| ApiError::Storage(e.to_string()))?;
        out.flush()?;
        self.corpora
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .remove(corpus_ref);
        Ok(())
    }

    fn write_index(&self, index: &Index) -> Result<(), ApiError> {
        let tmp = self.dir.join("index.json.tmp");
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, index).map_err(|e| ApiError::Storage(e.to_string()))?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(INDEX_FILE))?;
        Ok(())
    }

    /// Creates a session. Its id is a digest of player, seed and corpus, so
    /// the same request on the same data gives the same id; when that id is
    /// taken by an earlier creation, a numeric suffix is added. Resending a
    /// creation with the same `action_id` returns the first descriptor.
    pub fn create_session(&self, req: &CreateSession) -> Result<SessionDescriptor, ApiError> {
        let corpus = self.corpus(&req.corpus_ref)?;
        let base = SessionId::derive(&req.player_id, req.seed, &corpus);
        let request = serde_json::to_value(req).map_err(|e| ApiError::Storage(e.to_string()))?;

        let mut index = self.index.lock().unwrap_or_else(|p| p.into_inner());
        let mut id = base.clone();
        for k in 2.. {
            if !index.sessions.contains_key(&id) {
                break;
            }
            if let Some(aid) = &req.action_id {
                let entry = self.entry(&id)?;
                let e = lock(&entry);
                if let Some(rec) = e.actions.get(aid).filter(|r| r.endpoint == "create") {
                    if rec.request != request {
                        return Err(ApiError::DuplicateActionId(aid.clone()));
                    }
                    return serde_json::from_value(rec.response.clone())
                        .map_err(|e| ApiError::Storage(e.to_string()));
                }
            }
            id = SessionId(format!("{}-{k}", base.0));
        }

        let now = self.clock.now_ms();
        let session = Session::create_with_id(id.clone(), req.player_id.clone(), &corpus, req.seed, now)?;
        let index_entry = IndexEntry {
            log: format!("sessions/{}.jsonl", id.0),
            corpus_ref: req.corpus_ref.clone(),
            seed: req.seed,
        };
        let log_path = self.dir.join(&index_entry.log);
        let descriptor = SessionDescriptor {
            session_id: id.clone(),
            player_id: req.player_id.clone(),
            corpus_ref: req.corpus_ref.clone(),
            seed: req.seed,
            created_ms: now,
            seq: 0,
        };
        let mut entry = Entry {
            log_file: BufWriter::new(File::create(&log_path)?),
            actions_file: BufWriter::new(File::create(actions_path(&log_path))?),
            actions: HashMap::new(),
            client_seq: 0,
            descriptor: descriptor.clone(),
            index_entry: index_entry.clone(),
            notify: Arc::new(Notify::new()),
            session,
        };
        let created = entry.session.log().to_vec();
        entry.append_events(&created)?;
        if let Some(aid) = &req.action_id {
            entry.append_action(ActionRecord {
                action_id: aid.clone(),
                endpoint: "create".into(),
                request,
                response: serde_json::to_value(&descriptor).map_err(|e| ApiError::Storage(e.to_string()))?,
            })?;
        }
        index.sessions.insert(id.clone(), index_entry);
        self.write_index(&index)?;
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(descriptor)
    }

    pub fn descriptor(&self, id: &SessionId) -> Result<SessionDescriptor, ApiError> {
        let entry = self.entry(id)?;
        let e = lock(&entry);
        Ok(SessionDescriptor {
            seq: e.session.state().last_seq,
            ..e.descriptor.clone()
        })
    }

    /// Runs one client action with exactly-once semantics and returns the
    /// response body.
    pub fn mutate<P, R>(
        &self,
        id: &SessionId,
        endpoint: &str,
        req: &Envelope<P>,
        op: impl FnOnce(&mut Session, u64) -> Result<R, SessionError>,
    ) -> Result<Value, ApiError>
    where
        P: Serialize,
        R: Serialize,
    {
        let entry = self.entry(id)?;
        let mut e = lock(&entry);
        let request = serde_json::to_value(&req.payload).map_err(|e| ApiError::Storage(e.to_string()))?;
        if let Some(rec) = e.actions.get(&req.action_id) {
            if rec.endpoint != endpoint || rec.request != request {
                return Err(ApiError::DuplicateActionId(req.action_id.clone()));
            }
            return Ok(rec.response.clone());
        }
        let last = e.session.state().last_seq;
        if req.seq_expected < e.client_seq || req.seq_expected > last {
            return Err(ApiError::StaleSeq {
                sent: req.seq_expected,
                current: last,
            });
        }

        let now = self.clock.now_ms();
        let mark = e.session.log().len();
        let result = op(&mut e.session, now);
        let new: Vec<SessionEvent> = e.session.log()[mark..].to_vec();
        if let Err(err) = e.append_events(&new) {
            self.reload(id, &mut e);
            return Err(err.into());
        }
        let result = result?;
        let response = ActionResponse {
            session_id: id.clone(),
            action_id: req.action_id.clone(),
            seq: e.session.state().last_seq,
            result,
            events: new,
        };
        let response = serde_json::to_value(&response).map_err(|e| ApiError::Storage(e.to_string()))?;
        e.client_seq = e.session.state().last_seq;
        e.append_action(ActionRecord {
            action_id: req.action_id.clone(),
            endpoint: endpoint.to_owned(),
            request,
            response: response.clone(),
        })?;
        Ok(response)
    }

    /// Rebuilds an entry from disk after a failed write, so memory never runs
    /// ahead of what was persisted. If even that fails the entry keeps its
    /// in-memory state and later writes will report the storage error.
    fn reload(&self, id: &SessionId, e: &mut Entry) {
        if let Ok(fresh) = Self::load_entry(&self.dir, id, &e.index_entry.clone()) {
            *e = fresh;
        }
    }

    /// The redacted view, after persisting any timeouts that fell due.
    pub fn view(&self, id: &SessionId) -> Result<SessionView, ApiError> {
        let entry = self.entry(id)?;
        let mut e = lock(&entry);
        e.tick(self.clock.now_ms())?;
        Ok(e.session.state().view())
    }

    pub(crate) fn notifier(&self, id: &SessionId) -> Result<Arc<Notify>, ApiError> {
        let entry = self.entry(id)?;
        let notify = lock(&entry).notify.clone();
        Ok(notify)
    }

    pub fn record(&self, id: &SessionId) -> Result<AssessmentRecord, ApiError> {
        let entry = self.entry(id)?;
        let mut e = lock(&entry);
        e.tick(self.clock.now_ms())?;
        Ok(assessment_record(e.session.state()))
    }

    pub fn records(&self) -> Result<Vec<AssessmentRecord>, ApiError> {
        self.session_ids().iter().map(|id| self.record(id)).collect()
    }

    /// A copy of a session's full event log. Server-side only: it holds the
    /// ground truth of every item.
    pub fn log(&self, id: &SessionId) -> Result<Vec<SessionEvent>, ApiError> {
        let entry = self.entry(id)?;
        let log = lock(&entry).session.log().to_vec();
        Ok(log)
    }

    /// Fires every timer that is due. Returns the number of sessions that
    /// changed.
    pub fn tick_all(&self) -> Result<usize, ApiError> {
        let now = self.clock.now_ms();
        let entries: Vec<_> = self
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .cloned()
            .collect();
        let mut changed = 0;
        for entry in entries {
            let mut e = lock(&entry);
            if e.session.next_deadline_ms().is_some_and(|d| d <= now) {
                e.tick(now)?;
                changed += 1;
            }
        }
        Ok(changed)
    }
}

/// A line without its newline was never acknowledged; cut it off.
fn drop_torn_tail(path: &Path) -> std::io::Result<()> {
    let bytes = fs::read(path)?;
    if bytes.last().is_some_and(|b| *b != b'\n') {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

fn actions_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("actions.jsonl")
}
