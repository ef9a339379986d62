//! On-disk layout, one directory per session:
//!
//! ```text
//! {data_dir}/sessions/{session_id}/session.json   serialized SessionDocument
//! {data_dir}/sessions/{session_id}/jobs.json      generation job records
//! {data_dir}/sessions/{session_id}/images/{sha256}
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::Serialize;

use super::jobs::{JobRecord, JobStatus};
use crate::session::SessionDocument;
use crate::store::ImageStore;

const DOC_FILE: &str = "session.json";
const JOBS_FILE: &str = "jobs.json";

pub struct SessionSlot {
    dir: PathBuf,
    pub store: ImageStore,
    pub doc: tokio::sync::Mutex<SessionDocument>,
    pub jobs: Mutex<Vec<JobRecord>>,
}

fn write_atomic(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let dir = path.parent().expect("session files live in a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, value)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl SessionSlot {
    pub fn create(root: &Path, doc: SessionDocument) -> io::Result<Self> {
        let dir = root.join(&doc.session_id);
        let store = ImageStore::open(dir.join("images"))?;
        write_atomic(&dir.join(DOC_FILE), &doc)?;
        write_atomic(&dir.join(JOBS_FILE), &Vec::<JobRecord>::new())?;
        Ok(Self {
            dir,
            store,
            doc: tokio::sync::Mutex::new(doc),
            jobs: Mutex::new(Vec::new()),
        })
    }

    /// Loads a session directory. Jobs that were still pending when the
    /// service stopped are marked failed.
    pub fn load(dir: &Path) -> io::Result<Self> {
        let doc: SessionDocument = serde_json::from_slice(&fs::read(dir.join(DOC_FILE))?)?;
        let mut jobs: Vec<JobRecord> = match fs::read(dir.join(JOBS_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut interrupted = false;
        for job in jobs
            .iter_mut()
            .filter(|j| matches!(j.status, JobStatus::Queued | JobStatus::Running))
        {
            job.fail(super::ApiError::new(
                axum::http::StatusCode::SERVICE_UNAVAILABLE,
                "interrupted",
                "service stopped before the job finished",
            ));
            interrupted = true;
        }
        if interrupted {
            write_atomic(&dir.join(JOBS_FILE), &jobs)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            store: ImageStore::open(dir.join("images"))?,
            doc: tokio::sync::Mutex::new(doc),
            jobs: Mutex::new(jobs),
        })
    }

    pub fn save_doc(&self, doc: &SessionDocument) -> io::Result<()> {
        write_atomic(&self.dir.join(DOC_FILE), doc)
    }

    pub fn save_jobs(&self) -> io::Result<()> {
        let jobs = self.jobs.lock().clone();
        write_atomic(&self.dir.join(JOBS_FILE), &jobs)
    }

    pub fn update_job(&self, id: &str, f: impl FnOnce(&mut JobRecord)) -> io::Result<()> {
        if let Some(job) = self.jobs.lock().iter_mut().find(|j| j.id == id) {
            f(job);
        }
        self.save_jobs()
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().iter().find(|j| j.id == id).cloned()
    }

    pub fn remove(self) -> io::Result<()> {
        fs::remove_dir_all(&self.dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Every loadable session under `root`, skipping unreadable directories.
pub fn load_all(root: &Path) -> io::Result<Vec<SessionSlot>> {
    fs::create_dir_all(root)?;
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if !path.join(DOC_FILE).is_file() {
            continue;
        }
        match SessionSlot::load(&path) {
            Ok(slot) => out.push(slot),
            Err(e) => tracing::warn!(dir = %path.display(), error = %e, "skipping unreadable session"),
        }
    }
    Ok(out)
}
