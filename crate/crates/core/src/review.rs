//! Steward review queue: crosswalk runs become pending items, decisions are
//! appended to a log of ground-truth records, and retraining rebuilds the
//! feedback classifier from that log.
//!
//! With a state directory the service keeps two newline-delimited JSON files:
//! `decisions.ndjson` (one ground-truth record per line plus the item it
//! decided) and `runs.ndjson` (run snapshots and retrain events). Opening a
//! service on an existing directory replays both.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::crosswalk::{crosswalk_schema, train_classifier, Classifier, Strategy};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::ingest::canonical_name;
use crate::model::{
    ColumnMeta, Confidence, CrosswalkResult, Decision, EntryId, GroundTruthRecord, SourceSchema,
    StandardSchema,
};

pub const DECISIONS_FILE: &str = "decisions.ndjson";
pub const RUNS_FILE: &str = "runs.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Overridden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub run_id: String,
    pub dataset_id: String,
    pub result: CrosswalkResult,
    pub status: Status,
    pub decided: Option<GroundTruthRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunView {
    pub run_id: String,
    pub dataset_id: String,
    pub classifier_version: u64,
    pub items: Vec<ReviewItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Action {
    Accept,
    Override { entry_id: EntryId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainInfo {
    pub version: u64,
    pub n_records: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Conflict,
    Validation,
    Precondition,
    Internal,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::BadRequest => "bad_request",
            ErrorKind::NotFound => "not_found",
            ErrorKind::Conflict => "conflict",
            ErrorKind::Validation => "validation",
            ErrorKind::Precondition => "precondition_failed",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub kind: ErrorKind,
    pub message: String,
    pub field: Option<String>,
}

impl ServiceError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ServiceError {
            kind,
            message: message.into(),
            field: None,
        }
    }

    pub fn at(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}: {} ({field})", self.kind.code(), self.message),
            None => write!(f, "{}: {}", self.kind.code(), self.message),
        }
    }
}

impl std::error::Error for ServiceError {}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::EmptyRecords => ErrorKind::Precondition,
            Error::ConflictingGroundTruth(_) => ErrorKind::Conflict,
            Error::UnknownEntry(_) | Error::InvalidStrategy(_) | Error::NoColumns => {
                ErrorKind::Validation
            }
            _ => ErrorKind::Internal,
        };
        ServiceError::new(kind, e.to_string())
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, Default)]
pub struct ReviewConfig {
    /// Accept qualified results on submission without steward review.
    pub auto_accept: bool,
    /// Where the decision log and run journal live; in-memory when `None`.
    pub state_dir: Option<PathBuf>,
    /// Used when a submission carries no strategy.
    pub default_strategy: Strategy,
}

/// A decision log line: the record plus the item it decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LoggedDecision {
    item_id: String,
    #[serde(flatten)]
    record: GroundTruthRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunSnapshot {
    run_id: String,
    dataset_id: String,
    classifier_version: u64,
    items: Vec<(String, CrosswalkResult)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum JournalEvent {
    Run(RunSnapshot),
    Retrain {
        version: u64,
        /// Decision log length at retrain time.
        log_len: usize,
        run_id: Option<String>,
    },
}

struct Run {
    dataset_id: String,
    classifier_version: u64,
    item_ids: Vec<String>,
}

#[derive(Default)]
struct State {
    runs: BTreeMap<String, Run>,
    items: BTreeMap<String, ReviewItem>,
    log: Vec<LoggedDecision>,
    classifier: Option<Arc<Classifier>>,
    version: u64,
    next_run: u64,
}

pub type Clock = Box<dyn Fn() -> i64 + Send + Sync>;

fn system_clock() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64)
}

pub struct ReviewService {
    schema: StandardSchema,
    model: Option<EmbeddingModel>,
    config: ReviewConfig,
    clock: Clock,
    state: RwLock<State>,
}

fn append_line(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut line = serde_json::to_string(value)?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Parses every line of an ndjson file. A torn final line (no trailing
/// newline) is an interrupted append; it is dropped and, when `repair` is
/// set, cut from the file so later appends start on a fresh line.
fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path, repair: bool) -> Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    let mut offset = 0;
    let mut missing_newline = false;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            if let Ok(v) = serde_json::from_str(line) {
                out.push(v);
                offset += line.len();
                missing_newline = true;
            }
            break;
        }
        offset += line.len();
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            row: i + 1,
            column: path.display().to_string(),
            message: e.to_string(),
        })?);
    }
    if repair && offset < text.len() {
        let f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.set_len(offset as u64).map_err(|e| Error::io(path, e))?;
    }
    if repair && missing_newline {
        let mut f = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(out)
}

fn records_of(log: &[LoggedDecision], run_id: Option<&str>) -> Vec<GroundTruthRecord> {
    log.iter()
        .filter(|d| run_id.is_none_or(|r| d.item_id.starts_with(&format!("{r}-"))))
        .map(|d| d.record.clone())
        .collect()
}

impl ReviewService {
    /// Opens the service, replaying any state found in `config.state_dir`.
    pub fn open(
        schema: StandardSchema,
        model: Option<EmbeddingModel>,
        config: ReviewConfig,
    ) -> Result<Self> {
        Self::with_clock(schema, model, config, Box::new(system_clock))
    }

    pub fn with_clock(
        schema: StandardSchema,
        model: Option<EmbeddingModel>,
        config: ReviewConfig,
        clock: Clock,
    ) -> Result<Self> {
        let mut state = State {
            next_run: 1,
            ..State::default()
        };
        if let Some(dir) = &config.state_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Self::replay(&schema, dir, &mut state)?;
        }
        Ok(ReviewService {
            schema,
            model,
            config,
            clock,
            state: RwLock::new(state),
        })
    }

    fn replay(schema: &StandardSchema, dir: &Path, state: &mut State) -> Result<()> {
        let events: Vec<JournalEvent> = read_lines(&dir.join(RUNS_FILE), true)?;
        state.log = read_lines(&dir.join(DECISIONS_FILE), true)?;

        for event in &events {
            if let JournalEvent::Run(snap) = event {
                let item_ids = snap.items.iter().map(|(id, _)| id.clone()).collect();
                for (item_id, result) in &snap.items {
                    state.items.insert(
                        item_id.clone(),
                        ReviewItem {
                            item_id: item_id.clone(),
                            run_id: snap.run_id.clone(),
                            dataset_id: snap.dataset_id.clone(),
                            result: result.clone(),
                            status: Status::Pending,
                            decided: None,
                        },
                    );
                }
                state.runs.insert(
                    snap.run_id.clone(),
                    Run {
                        dataset_id: snap.dataset_id.clone(),
                        classifier_version: snap.classifier_version,
                        item_ids,
                    },
                );
                state.next_run += 1;
            }
        }
        for d in &state.log {
            if let Some(item) = state.items.get_mut(&d.item_id) {
                item.status = status_of(d.record.decision);
                item.decided = Some(d.record.clone());
            }
        }
        let last_retrain = events.iter().rev().find_map(|e| match e {
            JournalEvent::Retrain {
                version,
                log_len,
                run_id,
            } => Some((*version, *log_len, run_id.clone())),
            JournalEvent::Run(_) => None,
        });
        if let Some((version, log_len, run_id)) = last_retrain {
            let upto = log_len.min(state.log.len());
            let records = records_of(&state.log[..upto], run_id.as_deref());
            state.classifier = Some(Arc::new(train_classifier(&records, schema)?));
            state.version = version;
        }
        Ok(())
    }

    pub fn schema(&self) -> &StandardSchema {
        &self.schema
    }

    pub fn version(&self) -> u64 {
        self.read().version
    }

    pub fn classifier(&self) -> Option<Arc<Classifier>> {
        self.read().classifier.clone()
    }

    /// Every logged record, in log order.
    pub fn records(&self) -> Vec<GroundTruthRecord> {
        records_of(&self.read().log, None)
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|p| p.into_inner())
    }

    fn file(&self, name: &str) -> Option<PathBuf> {
        self.config.state_dir.as_ref().map(|d| d.join(name))
    }

    fn validate_submission(
        &self,
        dataset_id: &str,
        columns: &[ColumnMeta],
        strategy: &Strategy,
    ) -> ServiceResult<()> {
        if dataset_id.trim().is_empty() {
            return Err(ServiceError::new(ErrorKind::Validation, "dataset_id is empty").at("dataset_id"));
        }
        if columns.is_empty() {
            return Err(ServiceError::new(ErrorKind::Validation, "no columns").at("columns"));
        }
        if let Some(i) = columns.iter().position(|c| canonical_name(&c.name).is_empty()) {
            return Err(ServiceError::new(ErrorKind::Validation, "column name is empty")
                .at(format!("columns[{i}].name")));
        }
        if strategy.k < 1 {
            return Err(ServiceError::new(ErrorKind::Validation, "k must be at least 1").at("strategy.k"));
        }
        if strategy.mode.needs_model() && self.model.is_none() {
            return Err(ServiceError::new(
                ErrorKind::Validation,
                "this mode needs an embedding model and the service has none",
            )
            .at("strategy.mode"));
        }
        Ok(())
    }

    /// Crosswalks `columns` and records every result as a review item.
    pub fn submit(
        &self,
        dataset_id: &str,
        columns: Vec<ColumnMeta>,
        strategy: Option<Strategy>,
    ) -> ServiceResult<RunView> {
        let strategy = strategy.unwrap_or_else(|| self.config.default_strategy.clone());
        self.validate_submission(dataset_id, &columns, &strategy)?;
        let (version, clf) = {
            let s = self.read();
            (s.version, s.classifier.clone())
        };
        let source = SourceSchema {
            dataset_id: dataset_id.to_string(),
            columns,
        };
        let results = crosswalk_schema(
            &source,
            &self.schema,
            self.model.as_ref(),
            clf.as_deref(),
            &strategy,
        )?;

        let mut state = self.write();
        let run_id = format!("r{:04}", state.next_run);
        let items: Vec<(String, CrosswalkResult)> = results
            .into_iter()
            .enumerate()
            .map(|(i, r)| (format!("{run_id}-{:04}", i + 1), r))
            .collect();
        if let Some(path) = self.file(RUNS_FILE) {
            append_line(
                &path,
                &JournalEvent::Run(RunSnapshot {
                    run_id: run_id.clone(),
                    dataset_id: dataset_id.to_string(),
                    classifier_version: version,
                    items: items.clone(),
                }),
            )?;
        }
        state.next_run += 1;
        for (item_id, result) in &items {
            state.items.insert(
                item_id.clone(),
                ReviewItem {
                    item_id: item_id.clone(),
                    run_id: run_id.clone(),
                    dataset_id: dataset_id.to_string(),
                    result: result.clone(),
                    status: Status::Pending,
                    decided: None,
                },
            );
        }
        state.runs.insert(
            run_id.clone(),
            Run {
                dataset_id: dataset_id.to_string(),
                classifier_version: version,
                item_ids: items.iter().map(|(id, _)| id.clone()).collect(),
            },
        );

        if self.config.auto_accept {
            for (item_id, result) in &items {
                if result.confidence == Confidence::Qualified {
                    // a conflicting earlier decision leaves the item for review
                    match self.decide_locked(&mut state, item_id, &Action::Accept) {
                        Ok(_) | Err(ServiceError { kind: ErrorKind::Conflict, .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok(Self::run_view(&state, &run_id).expect("just inserted"))
    }

    fn run_view(state: &State, run_id: &str) -> Option<RunView> {
        let run = state.runs.get(run_id)?;
        Some(RunView {
            run_id: run_id.to_string(),
            dataset_id: run.dataset_id.clone(),
            classifier_version: run.classifier_version,
            items: run.item_ids.iter().map(|id| state.items[id].clone()).collect(),
        })
    }

    pub fn run(&self, run_id: &str) -> ServiceResult<RunView> {
        Self::run_view(&self.read(), run_id)
            .ok_or_else(|| ServiceError::new(ErrorKind::NotFound, format!("no run {run_id}")))
    }

    /// Pending items of a run, weakest score first, then by item id.
    pub fn pending(&self, run_id: &str) -> ServiceResult<Vec<ReviewItem>> {
        let mut items: Vec<ReviewItem> = self
            .run(run_id)?
            .items
            .into_iter()
            .filter(|i| i.status == Status::Pending)
            .collect();
        items.sort_by(|a, b| {
            a.result
                .score
                .total_cmp(&b.result.score)
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        Ok(items)
    }

    pub fn item(&self, item_id: &str) -> ServiceResult<ReviewItem> {
        self.read()
            .items
            .get(item_id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorKind::NotFound, format!("no item {item_id}")))
    }

    pub fn decide(&self, item_id: &str, action: &Action) -> ServiceResult<ReviewItem> {
        let mut state = self.write();
        self.decide_locked(&mut state, item_id, action)
    }

    fn decide_locked(
        &self,
        state: &mut State,
        item_id: &str,
        action: &Action,
    ) -> ServiceResult<ReviewItem> {
        let item = state
            .items
            .get(item_id)
            .ok_or_else(|| ServiceError::new(ErrorKind::NotFound, format!("no item {item_id}")))?;
        if item.status != Status::Pending {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                format!("item {item_id} is already {}", status_name(item.status)),
            ));
        }
        let suggestion = item.result.matched_entry_id.clone();
        let (entry_id, decision) = match action {
            Action::Accept => match &suggestion {
                Some(id) => (id.clone(), Decision::Accepted),
                None => {
                    return Err(ServiceError::new(
                        ErrorKind::Validation,
                        "unmatched item has no suggestion to accept; override instead",
                    )
                    .at("action"))
                }
            },
            Action::Override { entry_id } => (entry_id.clone(), Decision::Overridden),
        };
        let Some(entry) = self.schema.entry(&entry_id) else {
            return Err(ServiceError::new(
                ErrorKind::Validation,
                format!("unknown entry id {entry_id}"),
            )
            .at("entry_id"));
        };

        let text = canonical_name(&item.result.source_column);
        if let Some(prev) = state
            .log
            .iter()
            .find(|d| canonical_name(&d.record.source_column) == text && d.record.decided_entry_id != entry_id)
        {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                format!(
                    "{:?} was already decided as {} (item {})",
                    prev.record.source_column, prev.record.decided_entry_id, prev.item_id
                ),
            )
            .at("entry_id"));
        }

        let record = GroundTruthRecord {
            source_column: item.result.source_column.clone(),
            dataset_id: item.dataset_id.clone(),
            decided_entry_id: entry_id,
            decided_path: entry.path.clone(),
            decision,
            engine_suggestion: suggestion,
            timestamp: (self.clock)(),
        };
        let logged = LoggedDecision {
            item_id: item_id.to_string(),
            record: record.clone(),
        };
        if let Some(path) = self.file(DECISIONS_FILE) {
            append_line(&path, &logged)?;
        }
        state.log.push(logged);
        let item = state.items.get_mut(item_id).expect("checked above");
        item.status = status_of(decision);
        item.decided = Some(record);
        Ok(item.clone())
    }

    /// Rebuilds the classifier from the decision log, optionally only from
    /// one run's decisions, and bumps the version.
    pub fn retrain(&self, run_id: Option<&str>) -> ServiceResult<RetrainInfo> {
        let mut state = self.write();
        if let Some(r) = run_id {
            if !state.runs.contains_key(r) {
                return Err(ServiceError::new(ErrorKind::NotFound, format!("no run {r}")));
            }
        }
        let records = records_of(&state.log, run_id);
        if records.is_empty() {
            return Err(ServiceError::new(
                ErrorKind::Precondition,
                "no decisions to learn from; decide at least one item first",
            ));
        }
        let clf = train_classifier(&records, &self.schema)?;
        let version = state.version + 1;
        if let Some(path) = self.file(RUNS_FILE) {
            append_line(
                &path,
                &JournalEvent::Retrain {
                    version,
                    log_len: state.log.len(),
                    run_id: run_id.map(str::to_string),
                },
            )?;
        }
        state.version = version;
        state.classifier = Some(Arc::new(clf));
        Ok(RetrainInfo {
            version,
            n_records: records.len(),
        })
    }
}

fn status_of(d: Decision) -> Status {
    match d {
        Decision::Accepted => Status::Accepted,
        Decision::Overridden => Status::Overridden,
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pending => "pending",
        Status::Accepted => "accepted",
        Status::Overridden => "overridden",
    }
}

/// Reads the ground-truth records of a decision log file.
pub fn read_decision_log(path: &Path) -> Result<Vec<GroundTruthRecord>> {
    let lines: Vec<LoggedDecision> = read_lines(path, false)?;
    Ok(lines.into_iter().map(|d| d.record).collect())
}
