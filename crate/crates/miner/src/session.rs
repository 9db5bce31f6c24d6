// SPDX-License-Identifier: Apache-2.0

//! Mining sessions. Each session owns an engine on its own worker thread;
//! requests reach it over a channel and readers see the archive through
//! snapshots published after every iteration.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use parking_lot::{Mutex, RwLock};
use remark_core::features::FeatureVector;
use remark_core::ingest::{load_dataset, Dataset};
use remark_core::mining::{ArchiveSnapshot, Engine, FeedbackAck, FeedbackCommand, MiningConfig};
use remark_core::rules::{parse_ruleset, ObjectiveVector, RuleSet};
use remark_core::scope::LineRange;
use remark_core::{Error, Result};
use serde::Serialize;
use tokio::sync::oneshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MiningState {
    Idle,
    Running,
    Paused,
}

#[derive(Debug, Clone, Copy)]
pub enum Control {
    Start,
    Pause,
    Stop,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemarkContext {
    pub remark_id: String,
    pub file: String,
    pub line_range: Option<LineRange>,
    pub review_commit_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub record_id: String,
    pub ticket_id: String,
    pub commit_id: String,
    pub path: String,
    pub hunk_index: Option<usize>,
    pub features: Option<FeatureVector>,
    /// Missed remarks this record is a potential trigger of.
    pub remarks: Vec<RemarkContext>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub objectives: ObjectiveVector,
    pub tickets: usize,
}

type Reply<T> = oneshot::Sender<T>;

enum Request {
    Control(Control, Reply<MiningState>),
    Feedback(FeedbackCommand, Reply<Result<FeedbackAck>>),
    Evaluate(RuleSet, Reply<Evaluation>),
    Sample(RuleSet, usize, Reply<Vec<SampleRecord>>),
    Baseline(f64, usize, Reply<Result<ObjectiveVector>>),
}

/// What readers see without going through the worker.
#[derive(Debug, Clone)]
pub struct Published {
    pub state: MiningState,
    pub iteration: u64,
    pub tickets: usize,
    pub feedback_count: usize,
    pub snapshot: Arc<ArchiveSnapshot>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub dataset_path: String,
    pub seed: u64,
    pub state: MiningState,
    pub iteration: u64,
    pub generation: u64,
    pub archive_size: usize,
    pub tickets: usize,
    pub feedback_count: usize,
}

pub struct Session {
    pub id: String,
    pub dataset_path: PathBuf,
    pub seed: u64,
    published: Arc<RwLock<Published>>,
    tx: Mutex<mpsc::Sender<Request>>,
    pub java_ext: String,
    /// Replies to feedback already applied, keyed by client id. Held across
    /// the worker round trip so a repeated id is never applied twice.
    pub acks: tokio::sync::Mutex<HashMap<String, serde_json::Value>>,
}

fn publish(engine: &Engine, state: MiningState, out: &RwLock<Published>) {
    *out.write() = Published {
        state,
        iteration: engine.iteration(),
        tickets: engine.index().ticket_count(),
        feedback_count: engine.transcript().len(),
        snapshot: engine.snapshot(),
    };
}

fn sample(engine: &Engine, rs: &RuleSet, n: usize) -> Vec<SampleRecord> {
    let index = engine.index();
    let dataset = engine.dataset();
    let records: Vec<_> = dataset.records().collect();
    let skipped = index.skip_mask(rs);
    let remarks: HashMap<&str, _> = dataset.remarks().map(|r| (r.remark_id.as_str(), r)).collect();
    engine
        .sample_misclassified(rs, n)
        .into_iter()
        .map(|i| {
            let r = records[i];
            let context = index
                .remarks
                .iter()
                .filter(|t| t.triggers.contains(&i) && index.is_missed(t, &skipped))
                .filter_map(|t| remarks.get(t.remark_id.as_str()))
                .map(|m| RemarkContext {
                    remark_id: m.remark_id.clone(),
                    file: m.file.clone(),
                    line_range: m.line_range,
                    review_commit_id: m.review_commit_id.clone(),
                })
                .collect();
            SampleRecord {
                record_id: r.id.clone(),
                ticket_id: r.ticket_id.clone(),
                commit_id: r.commit_id.clone(),
                path: r.path.clone(),
                hunk_index: r.hunk_index,
                features: r.features.clone(),
                remarks: context,
            }
        })
        .collect()
}

fn worker(mut engine: Engine, rx: mpsc::Receiver<Request>, published: Arc<RwLock<Published>>) {
    let mut state = MiningState::Idle;
    loop {
        let request = if state == MiningState::Running {
            match rx.try_recv() {
                Ok(r) => Some(r),
                Err(mpsc::TryRecvError::Empty) => None,
                Err(mpsc::TryRecvError::Disconnected) => return,
            }
        } else {
            match rx.recv() {
                Ok(r) => Some(r),
                Err(_) => return,
            }
        };
        match request {
            Some(Request::Control(c, reply)) => {
                state = match c {
                    Control::Start => MiningState::Running,
                    Control::Pause if state == MiningState::Running => MiningState::Paused,
                    Control::Pause => state,
                    Control::Stop => MiningState::Idle,
                };
                publish(&engine, state, &published);
                let _ = reply.send(state);
            }
            Some(Request::Feedback(cmd, reply)) => {
                let ack = engine.apply_feedback(cmd);
                publish(&engine, state, &published);
                let _ = reply.send(ack);
            }
            Some(Request::Evaluate(rs, reply)) => {
                let _ = reply.send(Evaluation {
                    objectives: engine.evaluate(&rs),
                    tickets: engine.index().ticket_count(),
                });
            }
            Some(Request::Sample(rs, n, reply)) => {
                let _ = reply.send(sample(&engine, &rs, n));
            }
            Some(Request::Baseline(share, seeds, reply)) => {
                let _ = reply.send(engine.index().baseline_random(share, seeds));
            }
            None => {
                engine.iterate();
                publish(&engine, state, &published);
            }
        }
    }
}

impl Session {
    pub fn spawn(id: String, dataset_path: PathBuf, dataset: Dataset, config: MiningConfig) -> Result<Self> {
        let seed = config.seed;
        let java_ext = config.java_ext.clone();
        let engine = Engine::new(dataset, config)?;
        let published = Arc::new(RwLock::new(Published {
            state: MiningState::Idle,
            iteration: 0,
            tickets: engine.index().ticket_count(),
            feedback_count: 0,
            snapshot: engine.snapshot(),
        }));
        let (tx, rx) = mpsc::channel();
        let out = Arc::clone(&published);
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || worker(engine, rx, out))
            .map_err(|e| Error::Invalid(format!("cannot start session worker: {e}")))?;
        Ok(Session {
            id,
            dataset_path,
            seed,
            published,
            tx: Mutex::new(tx),
            java_ext,
            acks: tokio::sync::Mutex::new(HashMap::new()),
        })
    }

    pub fn published(&self) -> Published {
        self.published.read().clone()
    }

    pub fn info(&self) -> SessionInfo {
        let p = self.published();
        SessionInfo {
            session_id: self.id.clone(),
            dataset_path: self.dataset_path.display().to_string(),
            seed: self.seed,
            state: p.state,
            iteration: p.iteration,
            generation: p.snapshot.generation,
            archive_size: p.snapshot.entries.len(),
            tickets: p.tickets,
            feedback_count: p.feedback_count,
        }
    }

    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Request) -> Result<T> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .lock()
            .send(make(reply))
            .map_err(|_| Error::Invalid("session worker has stopped".into()))?;
        rx.await
            .map_err(|_| Error::Invalid("session worker has stopped".into()))
    }

    pub async fn control(&self, c: Control) -> Result<MiningState> {
        self.ask(|r| Request::Control(c, r)).await
    }

    pub async fn feedback(&self, cmd: FeedbackCommand) -> Result<FeedbackAck> {
        self.ask(|r| Request::Feedback(cmd, r)).await?
    }

    pub async fn evaluate(&self, text: &str) -> Result<Evaluation> {
        let rs = parse_ruleset(text)?;
        self.ask(|r| Request::Evaluate(rs, r)).await
    }

    pub async fn sample(&self, rs: RuleSet, n: usize) -> Result<Vec<SampleRecord>> {
        self.ask(|r| Request::Sample(rs, n, r)).await
    }

    pub async fn baseline(&self, share: f64, seeds: usize) -> Result<ObjectiveVector> {
        self.ask(|r| Request::Baseline(share, seeds, r)).await?
    }
}

/// All sessions of one server.
pub struct SessionManager {
    data_dir: Option<PathBuf>,
    next_id: AtomicU64,
    sessions: RwLock<BTreeMap<u64, Arc<Session>>>,
}

impl SessionManager {
    pub fn new(data_dir: Option<PathBuf>) -> Self {
        SessionManager {
            data_dir,
            next_id: AtomicU64::new(1),
            sessions: RwLock::new(BTreeMap::new()),
        }
    }

    /// Relative paths are taken from the data directory, if one is set.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn load(&self, path: &Path) -> Result<(PathBuf, Dataset)> {
        let full = self.resolve(path);
        let dataset = load_dataset(&full)?;
        Ok((full, dataset))
    }

    /// Load the dataset and start an idle session on it. Blocking.
    pub fn create(&self, dataset_path: &Path, config: MiningConfig) -> Result<Arc<Session>> {
        let (full, dataset) = self.load(dataset_path)?;
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let session = Arc::new(Session::spawn(format!("s{n}"), full, dataset, config)?);
        self.sessions.write().insert(n, Arc::clone(&session));
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let n: u64 = id.strip_prefix('s')?.parse().ok()?;
        self.sessions.read().get(&n).cloned()
    }

    pub fn list(&self) -> Vec<SessionInfo> {
        self.sessions.read().values().map(|s| s.info()).collect()
    }
}
