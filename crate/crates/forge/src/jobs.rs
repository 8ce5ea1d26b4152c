//! Background jobs: a state machine per job and a table that admits one
//! active job at a time.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{JobKind, Observer, Stage};

pub const CANCELLED: &str = "cancelled";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_active(self) -> bool {
        matches!(self, JobStatus::Queued | JobStatus::Running)
    }

    /// queued→running, running→done|failed, and queued→failed for a
    /// cancelled job.
    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Queued, JobStatus::Running)
                | (JobStatus::Queued, JobStatus::Failed)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub result_ref: Option<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("job `{0}` is already {1}")]
    Conflict(String, &'static str),
    #[error("no job `{0}`")]
    NotFound(String),
    #[error("job `{id}` cannot go from {from:?} to {to:?}")]
    Transition {
        id: String,
        from: JobStatus,
        to: JobStatus,
    },
}

struct Entry {
    job: Job,
    cancel: Arc<AtomicBool>,
}

#[derive(Default)]
pub struct JobTable {
    inner: Mutex<Inner>,
}

#[derive(Default)]
struct Inner {
    next: u64,
    jobs: BTreeMap<u64, Entry>,
}

fn key(id: &str) -> Option<u64> {
    id.strip_prefix("job-")?.parse().ok()
}

impl JobTable {
    /// Queues a job unless another one is queued or running.
    pub fn submit(&self, kind: JobKind) -> Result<Job, JobError> {
        let mut g = self.inner.lock().expect("job table lock");
        if let Some(active) = g.jobs.values().find(|e| e.job.status.is_active()) {
            let state = if active.job.status == JobStatus::Queued {
                "queued"
            } else {
                "running"
            };
            return Err(JobError::Conflict(active.job.id.clone(), state));
        }
        g.next += 1;
        let n = g.next;
        let job = Job {
            id: format!("job-{n}"),
            kind,
            status: JobStatus::Queued,
            progress: 0.0,
            stage: None,
            result_ref: None,
            error: None,
        };
        g.jobs.insert(
            n,
            Entry {
                job: job.clone(),
                cancel: Arc::new(AtomicBool::new(false)),
            },
        );
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Result<Job, JobError> {
        let g = self.inner.lock().expect("job table lock");
        key(id)
            .and_then(|k| g.jobs.get(&k))
            .map(|e| e.job.clone())
            .ok_or_else(|| JobError::NotFound(id.into()))
    }

    /// Every job, oldest first.
    pub fn list(&self) -> Vec<Job> {
        let g = self.inner.lock().expect("job table lock");
        g.jobs.values().map(|e| e.job.clone()).collect()
    }

    fn update<T>(&self, id: &str, f: impl FnOnce(&mut Entry) -> Result<T, JobError>) -> Result<T, JobError> {
        let mut g = self.inner.lock().expect("job table lock");
        let e = key(id)
            .and_then(|k| g.jobs.get_mut(&k))
            .ok_or_else(|| JobError::NotFound(id.into()))?;
        f(e)
    }

    fn transition(e: &mut Entry, to: JobStatus) -> Result<(), JobError> {
        if !e.job.status.can_become(to) {
            return Err(JobError::Transition {
                id: e.job.id.clone(),
                from: e.job.status,
                to,
            });
        }
        e.job.status = to;
        Ok(())
    }

    /// A queued job fails at once and never runs; a running job is asked to
    /// stop before its next stage.
    pub fn cancel(&self, id: &str) -> Result<Job, JobError> {
        self.update(id, |e| {
            match e.job.status {
                JobStatus::Queued => {
                    Self::transition(e, JobStatus::Failed)?;
                    e.job.error = Some(CANCELLED.into());
                }
                JobStatus::Running => e.cancel.store(true, Ordering::SeqCst),
                s => {
                    let state = if s == JobStatus::Done { "done" } else { "failed" };
                    return Err(JobError::Conflict(e.job.id.clone(), state));
                }
            }
            Ok(e.job.clone())
        })
    }

    /// Moves a queued job to running. `None` when it was cancelled meanwhile.
    pub fn start(&self, id: &str) -> Result<Option<Arc<AtomicBool>>, JobError> {
        self.update(id, |e| {
            if e.job.status != JobStatus::Queued {
                return Ok(None);
            }
            Self::transition(e, JobStatus::Running)?;
            Ok(Some(e.cancel.clone()))
        })
    }

    pub fn progress(&self, id: &str, progress: f64, stage: Option<Stage>) {
        let _ = self.update(id, |e| {
            if e.job.status == JobStatus::Running {
                e.job.progress = progress.clamp(0.0, 1.0);
                e.job.stage = stage;
            }
            Ok(())
        });
    }

    pub fn finish(&self, id: &str, result: Result<Option<PathBuf>, String>) -> Result<Job, JobError> {
        self.update(id, |e| {
            match result {
                Ok(r) => {
                    Self::transition(e, JobStatus::Done)?;
                    e.job.progress = 1.0;
                    e.job.stage = None;
                    e.job.result_ref = r;
                }
                Err(msg) => {
                    Self::transition(e, JobStatus::Failed)?;
                    e.job.error = Some(msg);
                }
            }
            Ok(e.job.clone())
        })
    }
}

/// Publishes stage progress into the table and reports cancellation.
pub struct JobObserver<'a> {
    pub table: &'a JobTable,
    pub id: String,
    pub cancel: Arc<AtomicBool>,
}

impl Observer for JobObserver<'_> {
    fn stage_started(&self, index: usize, total: usize, stage: Stage) {
        self.table
            .progress(&self.id, index as f64 / total.max(1) as f64, Some(stage));
    }

    fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
}
