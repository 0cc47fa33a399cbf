//! The `phishshoot` operator commands. Each is a thin composition of the
//! core and server crates; failures become one JSON error line on stderr.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use phishshoot::assessment::{assessment_record, test_hypotheses, AssessmentRecord, HypothesisReport};
use phishshoot::corpus::{generate_corpus, load_brands, read_corpus, write_corpus, CorpusError, GenerationSpec};
use phishshoot::session::{read_log, replay, write_log, LogError, ReplayError, SessionState};
use phishshoot::simulation::{run_cohort_full, CohortSpec};
use phishshoot::PhishItem;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "phishshoot", version, about = "Phishing-awareness balloon shooter tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus operations.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, env = phishshoot_server::DATA_DIR_ENV)]
        data_dir: PathBuf,
        #[arg(long, default_value = phishshoot_server::DEFAULT_BIND)]
        bind: String,
        /// Corpus files to install under the data directory, each available
        /// by its file stem as `corpus_ref`.
        #[arg(long = "corpus")]
        corpora: Vec<PathBuf>,
    },
    /// Play a cohort of bots and write one event log per session.
    Simulate {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay session logs and write knowledge metrics and hypothesis tests.
    Report {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay one log, recomputing every score and life count.
    Verify {
        #[arg(long)]
        session: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    Generate {
        #[arg(long)]
        brands: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        email_fraction: f64,
        #[arg(long, default_value_t = 0.5)]
        legitimate_fraction: f64,
    },
}

/// A failure, printed as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            path: None,
            line: None,
            seq: None,
        }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.display().to_string());
        self
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        let code = if e.kind() == std::io::ErrorKind::NotFound {
            "FileNotFound"
        } else {
            "IoError"
        };
        Self::new(code, e.to_string()).at(path)
    }

    fn corpus(path: &Path, e: CorpusError) -> Self {
        let (code, line) = match &e {
            CorpusError::SchemaVersion { line, .. } => ("SchemaVersion", Some(*line)),
            CorpusError::Parse { line, .. } => ("ParseError", Some(*line)),
            CorpusError::Io(_) => ("IoError", None),
            _ => ("ValidationError", None),
        };
        Self {
            line,
            ..Self::new(code, e.to_string()).at(path)
        }
    }

    fn log(path: &Path, e: LogError) -> Self {
        let (code, line) = match &e {
            LogError::SchemaVersion { line, .. } => ("SchemaVersion", Some(*line)),
            LogError::UnknownEventKind { line, .. } => ("UnknownEventKind", Some(*line)),
            LogError::Parse { line, .. } => ("ParseError", Some(*line)),
            LogError::Io(_) => ("IoError", None),
        };
        Self {
            line,
            ..Self::new(code, e.to_string()).at(path)
        }
    }

    fn replay(path: &Path, e: ReplayError) -> Self {
        match e {
            ReplayError::Log(l) => Self::log(path, l),
            ReplayError::Divergence { seq, reason } => Self {
                seq: Some(seq),
                // Events sit one per line, seq 0 first.
                line: Some(seq as usize + 1),
                ..Self::new("Divergence", format!("seq {seq}: {reason}")).at(path)
            },
            ReplayError::GapInLog { expected, found } => Self {
                seq: Some(expected),
                line: Some(expected as usize + 1),
                ..Self::new("GapInLog", format!("expected seq {expected}, found {found}")).at(path)
            },
            ReplayError::EmptyLog => Self::new("EmptyLog", "log has no events").at(path),
        }
    }

    pub fn to_json_line(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::new("IoError", e.to_string()).at(path))?;
    f.write_all(b"\n").and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))
}

pub fn load_corpus_file(path: &Path) -> Result<Vec<PhishItem>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_corpus(BufReader::new(f)).map_err(|e| CliError::corpus(path, e))
}

pub fn load_session_log(path: &Path) -> Result<SessionState, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let events = read_log(BufReader::new(f)).map_err(|e| CliError::log(path, e))?;
    replay(&events).map_err(|e| CliError::replay(path, e))
}

/// Every session log under `dir`, or under `dir/sessions` when that
/// exists. Idempotency sidecars are skipped.
pub fn session_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sub = dir.join("sessions");
    let root = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut out: Vec<PathBuf> = fs::read_dir(&root)
        .map_err(|e| CliError::io(&root, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".jsonl") && !name.ends_with(".actions.jsonl")
        })
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub v: u32,
    pub sessions: usize,
    pub records: Vec<AssessmentRecord>,
    pub hypotheses: Option<HypothesisReport>,
    pub hypotheses_error: Option<String>,
}

pub fn build_report(dir: &Path) -> Result<Report, CliError> {
    let files = session_files(dir)?;
    let mut records = Vec::with_capacity(files.len());
    for f in &files {
        records.push(assessment_record(&load_session_log(f)?));
    }
    let (hypotheses, hypotheses_error) = match test_hypotheses(&records) {
        Ok(h) => (Some(h), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Report {
        v: 1,
        sessions: files.len(),
        records,
        hypotheses,
        hypotheses_error,
    })
}

/// Runs one command. Returns the summary line for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Corpus {
            command:
                CorpusCommand::Generate {
                    brands,
                    seed,
                    count,
                    out,
                    email_fraction,
                    legitimate_fraction,
                },
        } => {
            let text = fs::read_to_string(&brands).map_err(|e| CliError::io(&brands, e))?;
            let brand_list = load_brands(&text).map_err(|e| CliError::corpus(&brands, e))?;
            let spec = GenerationSpec {
                email_fraction,
                legitimate_fraction,
                ..GenerationSpec::new(seed, count)
            };
            let items = generate_corpus(&brand_list, &spec).map_err(|e| CliError::corpus(&out, e))?;
            let f = File::create(&out).map_err(|e| CliError::io(&out, e))?;
            write_corpus(&items, BufWriter::new(f)).map_err(|e| CliError::corpus(&out, e))?;
            let fakes = items.iter().filter(|i| !i.is_legitimate()).count();
            Ok(json!({"ok": true, "items": items.len(), "fakes": fakes, "out": out}).to_string())
        }
        Command::Serve {
            data_dir,
            bind,
            corpora,
        } => serve(&data_dir, &bind, &corpora),
        Command::Simulate {
            cohort,
            corpus,
            seed,
            out,
        } => {
            let text = fs::read_to_string(&cohort).map_err(|e| CliError::io(&cohort, e))?;
            let spec: CohortSpec = serde_json::from_str(&text).map_err(|e| CliError {
                line: Some(e.line()),
                ..CliError::new("ParseError", e.to_string()).at(&cohort)
            })?;
            if spec.v != 1 {
                return Err(CliError::new("SchemaVersion", format!("cohort version {} is not 1", spec.v)).at(&cohort));
            }
            let profiles = spec.profiles();
            let names: BTreeSet<_> = profiles.iter().map(|p| p.player_id()).collect();
            if names.len() != profiles.len() {
                return Err(CliError::new("ValidationError", "cohort groups must have distinct names").at(&cohort));
            }
            let items = load_corpus_file(&corpus)?;
            let runs = run_cohort_full(&profiles, &items, seed)
                .map_err(|e| CliError::new("ValidationError", e.to_string()).at(&cohort))?;
            let dir = out.join("sessions");
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for r in &runs {
                let path = dir.join(format!("{}.jsonl", r.state.session_id));
                let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                write_log(&r.log, BufWriter::new(f)).map_err(|e| CliError::log(&path, e))?;
            }
            let records: Vec<_> = runs.iter().map(|r| &r.record).collect();
            write_json(&out.join("records.json"), &records)?;
            Ok(json!({"ok": true, "sessions": runs.len(), "out": out}).to_string())
        }
        Command::Report { sessions, out } => {
            let report = build_report(&sessions)?;
            write_json(&out, &report)?;
            let mut summary = json!({
                "ok": true,
                "sessions": report.sessions,
                "out": out,
            });
            if let Some(h) = &report.hypotheses {
                summary["supported"] = h
                    .results
                    .iter()
                    .filter(|r| r.supported == Some(true))
                    .map(|r| format!("{:?}", r.id))
                    .collect::<Vec<_>>()
                    .into();
            } else {
                summary["hypotheses_error"] = report.hypotheses_error.clone().into();
            }
            Ok(summary.to_string())
        }
        Command::Verify { session } => {
            let state = load_session_log(&session)?;
            Ok(json!({
                "ok": true,
                "session_id": state.session_id,
                "events": state.last_seq + 1,
                "phase": state.phase,
                "stage_scores": state.stage_scores(),
                "total_score": state.total_score,
            })
            .to_string())
        }
    }
}

fn serve(data_dir: &Path, bind: &str, corpora: &[PathBuf]) -> Result<String, CliError> {
    use phishshoot_server::{Store, SystemClock, DEFAULT_TICK};
    let store = Store::open(data_dir, Arc::new(SystemClock))
        .map_err(|e| CliError::new("StorageError", e.to_string()).at(data_dir))?;
    for path in corpora {
        let items = load_corpus_file(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::new("ValidationError", "corpus file needs a name").at(path))?;
        store
            .install_corpus(name, &items)
            .map_err(|e| CliError::new("ValidationError", e.to_string()).at(path))?;
    }
    let store = Arc::new(store);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("IoError", e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::new("BindError", e.to_string()))?;
        let addr = listener.local_addr().map_err(|e| CliError::new("BindError", e.to_string()))?;
        println!("{}", json!({"listening": addr.to_string(), "data_dir": data_dir}));
        phishshoot_server::serve(listener, store, Some(DEFAULT_TICK), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::new("IoError", e.to_string()))
    })?;
    Ok(json!({"ok": true, "stopped": true}).to_string())
}
