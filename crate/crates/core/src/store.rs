//! Datasets, series membership and curation tags.
//!
//! State lives in `store.ndjson`: a `{"v":1}` header line followed by one
//! operation per line. `store.snapshot.json` holds the state after operation
//! `seq`; on open the snapshot is loaded and later journal operations are
//! replayed on top of it.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};
use im::{OrdMap, OrdSet};
use serde::{Deserialize, Serialize};

use crate::journal;

pub const JOURNAL_FILE: &str = "store.ndjson";
pub const SNAPSHOT_FILE: &str = "store.snapshot.json";
const HEADER: &str = r#"{"v":1}"#;
const DEFAULT_SNAPSHOT_EVERY: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("a dataset named `{0}` already exists")]
    DuplicateName(String),
    #[error("invalid dataset name: {0}")]
    InvalidName(String),
    #[error("invalid tag `{0}`")]
    InvalidTag(String),
    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("series both added and removed: {}", .0.join(", "))]
    OverlappingAddRemove(Vec<String>),
    #[error("store storage: {0}")]
    Storage(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::DuplicateName(_) => "duplicate_name",
            StoreError::InvalidName(_) => "invalid_name",
            StoreError::InvalidTag(_) => "invalid_tag",
            StoreError::UnknownDataset(_) => "unknown_dataset",
            StoreError::OverlappingAddRemove(_) => "overlapping_add_remove",
            StoreError::Storage(_) => "storage_error",
        }
    }
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub name: String,
    pub created: DateTime<Utc>,
    pub series: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MembershipReport {
    pub added: usize,
    pub removed: usize,
    pub ignored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagStatus {
    Ok,
    UnknownSeries,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkTagEntry {
    pub series_uid: String,
    pub status: TagStatus,
    /// Final tag set; absent for failed entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingReference {
    pub dataset_id: String,
    pub dataset_name: String,
    pub series_uid: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    CreateDataset {
        id: String,
        name: String,
        created: DateTime<Utc>,
    },
    Membership {
        id: String,
        add: Vec<String>,
        remove: Vec<String>,
    },
    SetTags {
        series_uid: String,
        tags: Vec<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    seq: u64,
    #[serde(flatten)]
    op: Operation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreState {
    pub datasets: OrdMap<String, DatasetRecord>,
    pub tags: OrdMap<String, OrdSet<String>>,
}

impl StoreState {
    /// Applies an already validated operation.
    pub fn apply(&mut self, op: &Operation) -> MembershipReport {
        let mut report = MembershipReport::default();
        match op {
            Operation::CreateDataset { id, name, created } => {
                self.datasets.insert(
                    id.clone(),
                    DatasetRecord {
                        id: id.clone(),
                        name: name.clone(),
                        created: *created,
                        series: BTreeSet::new(),
                    },
                );
            }
            Operation::Membership { id, add, remove } => {
                if let Some(ds) = self.datasets.get_mut(id) {
                    for uid in add {
                        if ds.series.insert(uid.clone()) {
                            report.added += 1;
                        } else {
                            report.ignored += 1;
                        }
                    }
                    for uid in remove {
                        if ds.series.remove(uid) {
                            report.removed += 1;
                        } else {
                            report.ignored += 1;
                        }
                    }
                }
            }
            Operation::SetTags { series_uid, tags } => {
                if tags.is_empty() {
                    self.tags.remove(series_uid);
                } else {
                    self.tags.insert(series_uid.clone(), tags.iter().cloned().collect());
                }
            }
        }
        report
    }

    pub fn tags_of(&self, series_uid: &str) -> Vec<String> {
        self.tags
            .get(series_uid)
            .map(|t| t.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn name_taken(&self, name: &str) -> bool {
        let lower = name.to_lowercase();
        self.datasets.values().any(|d| d.name.to_lowercase() == lower)
    }
}

/// Lowercases a tag and checks it against `[a-z0-9 _:-]{1,64}`.
pub fn normalize_tag(tag: &str) -> Result<String, StoreError> {
    let t = tag.to_lowercase();
    let ok = (1..=64).contains(&t.chars().count())
        && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || " _:-".contains(c));
    if ok {
        Ok(t)
    } else {
        Err(StoreError::InvalidTag(tag.to_string()))
    }
}

pub fn validate_name(name: &str) -> Result<(), StoreError> {
    let n = name.chars().count();
    if n == 0 || n > 128 {
        return Err(StoreError::InvalidName(format!("length {n} outside 1..=128")));
    }
    if name.trim().is_empty() {
        return Err(StoreError::InvalidName("blank".into()));
    }
    if name.chars().any(char::is_control) {
        return Err(StoreError::InvalidName("control characters".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreReplay {
    pub snapshot_seq: u64,
    pub replayed: usize,
    pub skipped_lines: usize,
    pub torn_bytes: u64,
}

struct Writer {
    file: Option<File>,
    dir: Option<PathBuf>,
    seq: u64,
    since_snapshot: u64,
}

pub struct Store {
    state: ArcSwap<StoreState>,
    writer: Mutex<Writer>,
    snapshot_every: u64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    v: u32,
    seq: u64,
    state: StoreState,
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            state: ArcSwap::from_pointee(StoreState::default()),
            writer: Mutex::new(Writer {
                file: None,
                dir: None,
                seq: 0,
                since_snapshot: 0,
            }),
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }

    pub fn open(dir: &Path) -> Result<(Self, StoreReplay), StoreError> {
        Self::open_with(dir, DEFAULT_SNAPSHOT_EVERY)
    }

    /// Opens `dir`, writing a snapshot every `snapshot_every` operations.
    pub fn open_with(dir: &Path, snapshot_every: u64) -> Result<(Self, StoreReplay), StoreError> {
        std::fs::create_dir_all(dir)?;
        let mut report = StoreReplay::default();
        let (mut state, mut seq) = match std::fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => {
                let snap: SnapshotFile = serde_json::from_slice(&bytes)
                    .map_err(|e| StoreError::Storage(format!("snapshot: {e}")))?;
                if snap.v != 1 {
                    return Err(StoreError::Storage(format!("snapshot version {}", snap.v)));
                }
                (snap.state, snap.seq)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (StoreState::default(), 0),
            Err(e) => return Err(e.into()),
        };
        report.snapshot_seq = seq;
        let path = dir.join(JOURNAL_FILE);
        let lines = journal::read_lines(&path)?;
        report.torn_bytes = lines.torn_bytes;
        let mut body = lines.lines.iter();
        match lines.lines.first() {
            Some(h) if h == HEADER => {
                body.next();
            }
            Some(h) => return Err(StoreError::Storage(format!("unsupported journal header {h}"))),
            None => {}
        }
        let mut since = 0;
        for line in body {
            match serde_json::from_str::<Entry>(line) {
                Ok(e) if e.seq > seq => {
                    state.apply(&e.op);
                    seq = e.seq;
                    since += 1;
                    report.replayed += 1;
                }
                Ok(_) => {}
                Err(_) => report.skipped_lines += 1,
            }
        }
        if report.skipped_lines > 0 || report.torn_bytes > 0 {
            tracing::warn!(?report, "store journal had damaged lines");
        }
        let mut file = journal::open_append(&path, lines.valid_len)?;
        if lines.valid_len == 0 {
            journal::append(&mut file, &[HEADER.to_string()], true)?;
        }
        let store = Store {
            state: ArcSwap::from_pointee(state),
            writer: Mutex::new(Writer {
                file: Some(file),
                dir: Some(dir.to_path_buf()),
                seq,
                since_snapshot: since,
            }),
            snapshot_every: snapshot_every.max(1),
        };
        Ok((store, report))
    }

    pub fn state(&self) -> Arc<StoreState> {
        self.state.load_full()
    }

    fn commit(&self, w: &mut Writer, ops: Vec<Operation>) -> Result<Vec<MembershipReport>, StoreError> {
        if ops.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(file) = w.file.as_mut() {
            let lines: Vec<String> = ops
                .iter()
                .enumerate()
                .map(|(i, op)| {
                    serde_json::to_string(&Entry {
                        seq: w.seq + 1 + i as u64,
                        op: op.clone(),
                    })
                    .expect("operations serialize")
                })
                .collect();
            journal::append(file, &lines, true)?;
        }
        let mut state = StoreState::clone(&self.state.load());
        let reports = ops.iter().map(|op| state.apply(op)).collect();
        w.seq += ops.len() as u64;
        w.since_snapshot += ops.len() as u64;
        self.state.store(Arc::new(state));
        if w.since_snapshot >= self.snapshot_every {
            if let Err(e) = self.write_snapshot(w) {
                tracing::warn!(error = %e, "store snapshot failed");
            }
        }
        Ok(reports)
    }

    fn write_snapshot(&self, w: &mut Writer) -> Result<(), StoreError> {
        let Some(dir) = w.dir.clone() else {
            return Ok(());
        };
        let snap = SnapshotFile {
            v: 1,
            seq: w.seq,
            state: StoreState::clone(&self.state.load()),
        };
        let bytes = serde_json::to_vec(&snap).map_err(|e| StoreError::Storage(e.to_string()))?;
        journal::write_atomic(&dir.join(SNAPSHOT_FILE), &bytes)?;
        let path = dir.join(JOURNAL_FILE);
        journal::write_atomic(&path, format!("{HEADER}\n").as_bytes())?;
        w.file = Some(journal::open_append(&path, u64::MAX)?);
        w.since_snapshot = 0;
        Ok(())
    }

    /// Forces a snapshot and shrinks the journal to its header.
    pub fn checkpoint(&self) -> Result<(), StoreError> {
        let mut w = self.writer.lock().unwrap();
        self.write_snapshot(&mut w)
    }

    pub fn create_dataset(&self, name: &str) -> Result<DatasetRecord, StoreError> {
        validate_name(name)?;
        let mut w = self.writer.lock().unwrap();
        if self.state.load().name_taken(name) {
            return Err(StoreError::DuplicateName(name.to_string()));
        }
        let id = uuid::Uuid::new_v4().to_string();
        self.commit(
            &mut w,
            vec![Operation::CreateDataset {
                id: id.clone(),
                name: name.to_string(),
                created: Utc::now(),
            }],
        )?;
        Ok(self.state.load().datasets[&id].clone())
    }

    pub fn modify_membership(&self, id: &str, add: &[String], remove: &[String]) -> Result<MembershipReport, StoreError> {
        let add_set: BTreeSet<&String> = add.iter().collect();
        let overlap: Vec<String> = remove.iter().filter(|u| add_set.contains(u)).cloned().collect();
        if !overlap.is_empty() {
            return Err(StoreError::OverlappingAddRemove(overlap));
        }
        let mut w = self.writer.lock().unwrap();
        if !self.state.load().datasets.contains_key(id) {
            return Err(StoreError::UnknownDataset(id.to_string()));
        }
        let op = Operation::Membership {
            id: id.to_string(),
            add: add.to_vec(),
            remove: remove.to_vec(),
        };
        Ok(self.commit(&mut w, vec![op])?.remove(0))
    }

    /// `(current ∪ add) \ remove` for every uid that `is_known` accepts.
    ///
    /// Returns the report together with the uids whose tag set changed.
    pub fn bulk_tag(
        &self,
        uids: &[String],
        add: &[String],
        remove: &[String],
        is_known: impl Fn(&str) -> bool,
    ) -> Result<(Vec<BulkTagEntry>, Vec<(String, Vec<String>)>), StoreError> {
        let add: Vec<String> = add.iter().map(|t| normalize_tag(t)).collect::<Result<_, _>>()?;
        let remove: BTreeSet<String> = remove.iter().map(|t| normalize_tag(t)).collect::<Result<_, _>>()?;
        let mut w = self.writer.lock().unwrap();
        let state = self.state.load_full();
        let mut report = Vec::with_capacity(uids.len());
        let mut ops = Vec::new();
        let mut changed = Vec::new();
        let mut pending: std::collections::BTreeMap<&str, Vec<String>> = Default::default();
        for uid in uids {
            if !is_known(uid) {
                report.push(BulkTagEntry {
                    series_uid: uid.clone(),
                    status: TagStatus::UnknownSeries,
                    tags: None,
                });
                continue;
            }
            let current = pending.get(uid.as_str()).cloned().unwrap_or_else(|| state.tags_of(uid));
            let mut next: BTreeSet<String> = current.iter().cloned().collect();
            next.extend(add.iter().cloned());
            next.retain(|t| !remove.contains(t));
            let next: Vec<String> = next.into_iter().collect();
            if next != current {
                ops.push(Operation::SetTags {
                    series_uid: uid.clone(),
                    tags: next.clone(),
                });
                changed.retain(|(u, _): &(String, Vec<String>)| u != uid);
                changed.push((uid.clone(), next.clone()));
                pending.insert(uid, next.clone());
            }
            report.push(BulkTagEntry {
                series_uid: uid.clone(),
                status: TagStatus::Ok,
                tags: Some(next),
            });
        }
        self.commit(&mut w, ops)?;
        Ok((report, changed))
    }

    /// Replaces one series' tags outright.
    pub fn set_tags(&self, series_uid: &str, tags: &[String]) -> Result<Vec<String>, StoreError> {
        let tags: BTreeSet<String> = tags.iter().map(|t| normalize_tag(t)).collect::<Result<_, _>>()?;
        let tags: Vec<String> = tags.into_iter().collect();
        let mut w = self.writer.lock().unwrap();
        if self.state.load().tags_of(series_uid) != tags {
            self.commit(
                &mut w,
                vec![Operation::SetTags {
                    series_uid: series_uid.to_string(),
                    tags: tags.clone(),
                }],
            )?;
        }
        Ok(tags)
    }

    pub fn tags_of(&self, series_uid: &str) -> Vec<String> {
        self.state.load().tags_of(series_uid)
    }

    pub fn list_datasets(&self) -> Vec<DatasetSummary> {
        let mut v: Vec<DatasetSummary> = self
            .state
            .load()
            .datasets
            .values()
            .map(|d| DatasetSummary {
                id: d.id.clone(),
                name: d.name.clone(),
                size: d.series.len(),
            })
            .collect();
        v.sort_by(|a, b| {
            a.name
                .to_lowercase()
                .cmp(&b.name.to_lowercase())
                .then_with(|| a.name.cmp(&b.name))
        });
        v
    }

    pub fn get_dataset(&self, id: &str) -> Result<DatasetRecord, StoreError> {
        self.state
            .load()
            .datasets
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownDataset(id.to_string()))
    }

    /// Dataset members that `exists` does not recognise.
    pub fn dangling(&self, exists: impl Fn(&str) -> bool) -> Vec<DanglingReference> {
        let state = self.state.load();
        let mut out = Vec::new();
        for d in state.datasets.values() {
            for uid in &d.series {
                if !exists(uid) {
                    out.push(DanglingReference {
                        dataset_id: d.id.clone(),
                        dataset_name: d.name.clone(),
                        series_uid: uid.clone(),
                    });
                }
            }
        }
        out.sort_by(|a, b| (&a.dataset_name, &a.series_uid).cmp(&(&b.dataset_name, &b.series_uid)));
        out
    }
}
