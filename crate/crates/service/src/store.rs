//! On-disk records: one JSON file per session and one directory per job.
//!
//! ```text
//! <data>/sessions/<id>.json
//! <data>/jobs/<id>/job.json
//! <data>/jobs/<id>/asset.sra
//! <data>/jobs/<id>/trajectory.trj
//! <data>/jobs/<id>/frames/<k>.png
//! ```

use crate::job::ReviewJob;
use serde::de::DeserializeOwned;
use serde::Serialize;
use simready_annotate::AnnotationSession;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: corrupt record: {source}")]
    Corrupt {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid id `{0}`")]
    BadId(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Ids become file names, so only `[A-Za-z0-9_-]` is allowed.
pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadId(id.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        for sub in ["sessions", "jobs"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Store {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write-then-rename so readers never see a partial file.
    pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let tmp = path.with_extension(format!(
            "{}.tmp",
            path.extension().and_then(|e| e.to_str()).unwrap_or("")
        ));
        fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
        Self::write_atomic(path, &serde_json::to_vec_pretty(value).unwrap())
    }

    fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
        match fs::read(path) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes)
                    .map(Some)
                    .map_err(|source| StoreError::Corrupt {
                        path: path.display().to_string(),
                        source,
                    })
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(path)(e)),
        }
    }

    fn session_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("sessions").join(format!("{id}.json")))
    }

    pub fn job_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("jobs").join(id))
    }

    pub fn save_session(&self, s: &AnnotationSession) -> Result<(), StoreError> {
        Self::write_json(&self.session_path(&s.id)?, s)
    }

    pub fn load_session(&self, id: &str) -> Result<Option<AnnotationSession>, StoreError> {
        Self::read_json(&self.session_path(id)?)
    }

    /// Sorted by creation time, then id.
    pub fn list_sessions(&self) -> Result<Vec<AnnotationSession>, StoreError> {
        let dir = self.root.join("sessions");
        let mut out: Vec<AnnotationSession> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                out.extend(Self::read_json(&path)?);
            }
        }
        out.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(out)
    }

    pub fn save_job(&self, job: &ReviewJob) -> Result<(), StoreError> {
        let dir = self.job_dir(&job.id)?;
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Self::write_json(&dir.join("job.json"), job)
    }

    pub fn load_job(&self, id: &str) -> Result<Option<ReviewJob>, StoreError> {
        Self::read_json(&self.job_dir(id)?.join("job.json"))
    }

    pub fn list_jobs(&self) -> Result<Vec<ReviewJob>, StoreError> {
        let dir = self.root.join("jobs");
        let mut out: Vec<ReviewJob> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path().join("job.json");
            out.extend(Self::read_json(&path)?);
        }
        out.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(out)
    }

    pub fn jobs_for_session(&self, session: &str) -> Result<Vec<ReviewJob>, StoreError> {
        Ok(self
            .list_jobs()?
            .into_iter()
            .filter(|j| j.session_id == session)
            .collect())
    }

    pub fn asset_path(&self, job: &str) -> Result<PathBuf, StoreError> {
        Ok(self.job_dir(job)?.join("asset.sra"))
    }

    pub fn trajectory_path(&self, job: &str) -> Result<PathBuf, StoreError> {
        Ok(self.job_dir(job)?.join("trajectory.trj"))
    }

    pub fn frame_path(&self, job: &str, k: usize) -> Result<PathBuf, StoreError> {
        Ok(self.job_dir(job)?.join("frames").join(format!("{k}.png")))
    }
}
