//! HTTP review service for the expert verification loop.
//!
//! Sessions and jobs live on disk under one data directory, so a restarted
//! service picks up where it left off. Simulations run on a bounded pool of
//! blocking workers.

mod api;
mod error;
mod job;
mod palette;
mod proxy;
pub mod render;
mod store;

pub use error::ApiError;
pub use job::{JobStatus, ReviewJob};
pub use palette::color_from_name;
pub use proxy::session_asset;
pub use store::{Store, StoreError};

use simready_annotate::chat::ChatClient;
use simready_core::SimConfig;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use tokio::sync::{Notify, OwnedMutexGuard, Semaphore};

pub const DEFAULT_MAX_JOBS: usize = 2;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Built workbench bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    pub max_concurrent_jobs: usize,
    /// Used when a simulate request carries no config.
    pub default_sim: SimConfig,
    /// Lattice density of proxy geometry.
    pub points_per_axis: usize,
    /// Edge length of proxy geometry in meters.
    pub world_scale: f64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            static_dir: None,
            max_concurrent_jobs: DEFAULT_MAX_JOBS,
            default_sim: SimConfig::default(),
            points_per_axis: 16,
            world_scale: 0.5,
        }
    }
}

pub(crate) struct AppState {
    pub config: ServiceConfig,
    pub store: Store,
    pub client: Arc<dyn ChatClient>,
    pub slots: Arc<Semaphore>,
    pub cancel: AtomicBool,
    pub jobs: JobTracker,
    session_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    /// Frames finished per running job.
    pub progress: Mutex<HashMap<String, (usize, usize)>>,
}

impl AppState {
    /// Serializes mutations of one session.
    pub async fn lock_session(&self, id: &str) -> OwnedMutexGuard<()> {
        let m = self
            .session_locks
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_default()
            .clone();
        m.lock_owned().await
    }

    pub fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
}

/// Counts jobs whose records are not final yet.
#[derive(Default)]
pub(crate) struct JobTracker {
    active: AtomicUsize,
    idle: Notify,
}

impl JobTracker {
    pub fn enter(&self) {
        self.active.fetch_add(1, Ordering::SeqCst);
    }

    pub fn exit(&self) {
        if self.active.fetch_sub(1, Ordering::SeqCst) == 1 {
            self.idle.notify_waiters();
        }
    }

    pub async fn wait_idle(&self) {
        loop {
            let notified = self.idle.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            if self.active.load(Ordering::SeqCst) == 0 {
                return;
            }
            notified.await;
        }
    }
}

#[derive(Clone)]
pub struct Service {
    state: Arc<AppState>,
}

impl Service {
    /// Opens the data directory. Jobs left queued or running by a previous
    /// process are marked failed.
    pub fn open(config: ServiceConfig, client: Arc<dyn ChatClient>) -> Result<Self, StoreError> {
        let store = Store::open(&config.data_dir)?;
        for mut job in store.list_jobs()? {
            if !job.status.is_final() {
                if job.status == JobStatus::Queued {
                    job.fail("service stopped before the job started");
                } else {
                    job.fail("service stopped while the job was running");
                }
                store.save_job(&job)?;
            }
        }
        let slots = Arc::new(Semaphore::new(config.max_concurrent_jobs.max(1)));
        Ok(Service {
            state: Arc::new(AppState {
                config,
                store,
                client,
                slots,
                cancel: AtomicBool::new(false),
                jobs: JobTracker::default(),
                session_locks: Mutex::default(),
                progress: Mutex::default(),
            }),
        })
    }

    pub fn router(&self) -> axum::Router {
        api::router(self.state.clone())
    }

    pub fn store(&self) -> &Store {
        &self.state.store
    }

    /// Waits until no job is queued or running.
    pub async fn wait_idle(&self) {
        self.state.jobs.wait_idle().await;
    }

    /// Refuses new jobs, cancels running simulations and waits until every
    /// job record is final.
    pub async fn shutdown(&self) {
        self.state.cancel.store(true, Ordering::SeqCst);
        self.wait_idle().await;
    }
}
