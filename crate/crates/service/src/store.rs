//! Directory-backed job store. Each job is `<id>.qjob` (plus a counts
//! sidecar for large jobs) under the jobs directory, and `index.json`
//! lists them. Files are staged in a private directory and renamed into
//! place, the bundle last, so a crash never leaves a half-written job.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::http::StatusCode;
use chrono::{DateTime, Utc};
use qwb_core::jobdata::{export_bundle, retrieve_bundle, JobBundle, BUNDLE_EXTENSION};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::ApiError;

const INDEX_FILE: &str = "index.json";
const STAGING_PREFIX: &str = ".staging-";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSummary {
    pub job_id: Uuid,
    pub created_at: DateTime<Utc>,
    pub machine_name: String,
    /// Problem kind (`bell`, `shor`, ...) when the job came from a builder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub shots: u64,
    pub width: usize,
    pub entries: usize,
}

impl JobSummary {
    pub fn of(bundle: &JobBundle) -> Self {
        JobSummary {
            job_id: bundle.job_id,
            created_at: bundle.created_at,
            machine_name: bundle.machine_name.clone(),
            problem: bundle.problem.as_ref().and_then(|p| {
                serde_json::to_value(&p.spec.kind)
                    .ok()
                    .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
            }),
            shots: bundle.counts.shots(),
            width: bundle.counts.width(),
            entries: bundle.counts.len(),
        }
    }
}

#[derive(Default)]
struct Inner {
    index: BTreeMap<Uuid, JobSummary>,
    cache: HashMap<Uuid, Arc<JobBundle>>,
}

pub struct JobStore {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

fn io_error(context: &str, e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store-io", format!("{context}: {e}"))
}

fn not_found(id: Uuid) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "job-not-found", format!("no job {id}"))
}

impl JobStore {
    /// Opens (creating if needed) the store at `dir`. Leftover staging
    /// directories are removed and the index is rebuilt whenever it
    /// disagrees with the bundle files present.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir.display().to_string(), e))?;
        let mut on_disk = BTreeSet::new();
        for entry in fs::read_dir(&dir).map_err(|e| io_error("listing jobs", e))? {
            let entry = entry.map_err(|e| io_error("listing jobs", e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with(STAGING_PREFIX) {
                fs::remove_dir_all(entry.path()).map_err(|e| io_error("removing staging directory", e))?;
            } else if let Some(id) = name
                .strip_suffix(&format!(".{BUNDLE_EXTENSION}"))
                .and_then(|stem| Uuid::parse_str(stem).ok())
            {
                on_disk.insert(id);
            }
        }
        let saved: Option<BTreeMap<Uuid, JobSummary>> = fs::read_to_string(dir.join(INDEX_FILE))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok());
        let index = match saved {
            Some(index) if index.keys().copied().collect::<BTreeSet<_>>() == on_disk => index,
            _ => {
                let mut index = BTreeMap::new();
                for id in on_disk {
                    match retrieve_bundle(&job_path(&dir, id)) {
                        Ok(b) if b.job_id == id => {
                            index.insert(id, JobSummary::of(&b));
                        }
                        Ok(_) => tracing::warn!(%id, "bundle file name disagrees with its job id; skipped"),
                        Err(e) => tracing::warn!(%id, error = %e, "unreadable bundle skipped"),
                    }
                }
                index
            }
        };
        let store = JobStore {
            dir,
            inner: Mutex::new(Inner {
                index,
                cache: HashMap::new(),
            }),
        };
        let inner = store.lock();
        store.write_index(&inner.index)?;
        drop(inner);
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn write_index(&self, index: &BTreeMap<Uuid, JobSummary>) -> Result<(), ApiError> {
        let tmp = self.dir.join(format!("{INDEX_FILE}.tmp"));
        let text = serde_json::to_string_pretty(index).expect("index serializes");
        fs::write(&tmp, text).map_err(|e| io_error("writing index", e))?;
        fs::rename(&tmp, self.dir.join(INDEX_FILE)).map_err(|e| io_error("committing index", e))
    }

    /// Stores a validated bundle. Job ids are unique.
    pub fn insert(&self, bundle: JobBundle) -> Result<JobSummary, ApiError> {
        bundle.validate()?;
        let id = bundle.job_id;
        let mut inner = self.lock();
        if inner.index.contains_key(&id) {
            return Err(ApiError::new(StatusCode::CONFLICT, "job-exists", format!("job {id} already exists")));
        }
        let staging = self.dir.join(format!("{STAGING_PREFIX}{id}"));
        fs::create_dir_all(&staging).map_err(|e| io_error("creating staging directory", e))?;
        let commit = || -> Result<(), ApiError> {
            let main = staging.join(format!("{id}.{BUNDLE_EXTENSION}"));
            let written = export_bundle(&bundle, &main)?;
            for path in written.iter().filter(|p| **p != main) {
                let name = path.file_name().expect("exported files have names");
                fs::rename(path, self.dir.join(name)).map_err(|e| io_error("committing sidecar", e))?;
            }
            fs::rename(&main, job_path(&self.dir, id)).map_err(|e| io_error("committing bundle", e))
        };
        let outcome = commit();
        let _ = fs::remove_dir_all(&staging);
        outcome?;
        let summary = JobSummary::of(&bundle);
        inner.index.insert(id, summary.clone());
        inner.cache.insert(id, Arc::new(bundle));
        self.write_index(&inner.index)?;
        Ok(summary)
    }

    /// Summaries in job-id order.
    pub fn list(&self) -> Vec<JobSummary> {
        self.lock().index.values().cloned().collect()
    }

    pub fn contains(&self, id: Uuid) -> bool {
        self.lock().index.contains_key(&id)
    }

    pub fn get(&self, id: Uuid) -> Result<Arc<JobBundle>, ApiError> {
        let mut inner = self.lock();
        if !inner.index.contains_key(&id) {
            return Err(not_found(id));
        }
        if let Some(b) = inner.cache.get(&id) {
            return Ok(b.clone());
        }
        let bundle = Arc::new(retrieve_bundle(&job_path(&self.dir, id))?);
        inner.cache.insert(id, bundle.clone());
        Ok(bundle)
    }

    /// The bundle file exactly as stored.
    pub fn file_text(&self, id: Uuid) -> Result<String, ApiError> {
        if !self.contains(id) {
            return Err(not_found(id));
        }
        fs::read_to_string(job_path(&self.dir, id)).map_err(|e| io_error("reading bundle", e))
    }
}

fn job_path(dir: &Path, id: Uuid) -> PathBuf {
    dir.join(format!("{id}.{BUNDLE_EXTENSION}"))
}
