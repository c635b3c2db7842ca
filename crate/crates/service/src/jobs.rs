use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use curator_core::annotator::AnnotatorManifest;
use curator_core::catalog::Catalog;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobItem {
    pub series_uid: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default)]
    pub structures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub annotator: String,
    pub series_uids: Vec<String>,
    pub status: JobStatus,
    pub created: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished: Option<DateTime<Utc>>,
    pub results: Vec<JobItem>,
}

/// Annotator runs on a bounded pool; finished jobs stay queryable.
pub struct JobTable {
    jobs: Mutex<BTreeMap<String, Job>>,
    permits: Arc<Semaphore>,
    work_dir: PathBuf,
}

/// Runs one annotator over each series in turn, recording per-series outcomes.
pub fn run_annotator(catalog: &Catalog, manifest: &AnnotatorManifest, uids: &[String], work_dir: &std::path::Path) -> Vec<JobItem> {
    uids.iter()
        .map(|uid| {
            let dir = work_dir.join(uuid::Uuid::new_v4().to_string());
            let out = match catalog.annotate(manifest, uid, &dir) {
                Ok(r) => JobItem {
                    series_uid: uid.clone(),
                    ok: true,
                    code: None,
                    message: None,
                    structures: r.structures,
                },
                Err(e) => JobItem {
                    series_uid: uid.clone(),
                    ok: false,
                    code: Some(e.code().to_string()),
                    message: Some(e.to_string()),
                    structures: Vec::new(),
                },
            };
            let _ = std::fs::remove_dir_all(&dir);
            out
        })
        .collect()
}

impl JobTable {
    pub fn new(workers: usize, work_dir: PathBuf) -> Arc<Self> {
        Arc::new(JobTable {
            jobs: Mutex::new(BTreeMap::new()),
            permits: Arc::new(Semaphore::new(workers.max(1))),
            work_dir,
        })
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(j) = self.jobs.lock().unwrap().get_mut(id) {
            f(j);
        }
    }

    /// Queues a run and returns the job as first recorded.
    pub fn submit(self: &Arc<Self>, catalog: Arc<Catalog>, manifest: AnnotatorManifest, uids: Vec<String>) -> Job {
        let job = Job {
            id: uuid::Uuid::new_v4().to_string(),
            annotator: manifest.name.clone(),
            series_uids: uids.clone(),
            status: JobStatus::Queued,
            created: Utc::now(),
            finished: None,
            results: Vec::new(),
        };
        self.jobs.lock().unwrap().insert(job.id.clone(), job.clone());
        let table = Arc::clone(self);
        let id = job.id.clone();
        tokio::spawn(async move {
            let Ok(_permit) = table.permits.clone().acquire_owned().await else {
                return;
            };
            table.update(&id, |j| j.status = JobStatus::Running);
            let work = table.work_dir.join(&id);
            let results = match tokio::task::spawn_blocking(move || run_annotator(&catalog, &manifest, &uids, &work)).await {
                Ok(r) => r,
                Err(e) => vec![JobItem {
                    series_uid: String::new(),
                    ok: false,
                    code: Some("internal_error".into()),
                    message: Some(e.to_string()),
                    structures: Vec::new(),
                }],
            };
            let _ = std::fs::remove_dir_all(table.work_dir.join(&id));
            table.update(&id, |j| {
                j.status = if results.iter().all(|r| r.ok) {
                    JobStatus::Done
                } else {
                    JobStatus::Failed
                };
                j.results = results;
                j.finished = Some(Utc::now());
            });
        });
        job
    }
}
