//! Backend adapters: the execution boundary of the pipeline.
//!
//! A [`BackendAdapter`] accepts serialized circuit documents and hands back
//! job ids, states and counts. The backend service and the result manager
//! share one adapter instance; submit and poll calls go through it directly
//! rather than over the bus. Three adapters live here:
//!
//! * [`LocalSimBackend`] runs the embedded simulator synchronously and is
//!   done by the first poll.
//! * [`MockRemoteBackend`] wraps the local backend behind an N-poll latency
//!   to exercise the queued/running/done lifecycle remote hardware has.
//! * [`FailingBackend`] misbehaves on purpose for failure-path tests.
//!
//! Run parameters ride inside the circuit document itself (`shots` and
//! `seed` metadata), so a submission is self-contained and every adapter
//! produces identical counts for identical documents.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::qcir::QuantumCircuit;
use crate::qsim::{self, CountsMap};

/// Backend-issued job handle.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JobId(pub String);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lifecycle of a job as the orchestration layer tracks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    Created,
    Submitted,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    pub fn name(self) -> &'static str {
        match self {
            JobState::Created => "created",
            JobState::Submitted => "submitted",
            JobState::Running => "running",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Status reported by an adapter poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn name(self) -> &'static str {
        match self {
            JobStatus::Queued => "queued",
            JobStatus::Running => "running",
            JobStatus::Done => "done",
            JobStatus::Failed => "failed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "queued" => Some(JobStatus::Queued),
            "running" => Some(JobStatus::Running),
            "done" => Some(JobStatus::Done),
            "failed" => Some(JobStatus::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no job with id {0}")]
    UnknownJob(JobId),
    #[error("job {0} has no result yet")]
    NotReady(JobId),
    #[error("job {job_id} failed during execution: {reason}")]
    ExecutionFailed { job_id: JobId, reason: String },
    #[error("malformed circuit document: {0}")]
    BadCircuit(String),
    #[error("protocol error talking to the backend: {0}")]
    Protocol(String),
}

/// One tracked execution. `job_id` appears once the submission succeeded;
/// `counts` exactly when the job reached `Done`.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub job_id: Option<JobId>,
    /// The submitted document, metadata included; the result manager reads
    /// the pair ids back out of it.
    pub circuit_text: String,
    pub state: JobState,
    pub counts: Option<CountsMap>,
    pub attempts: u32,
}

impl JobRecord {
    pub fn created(circuit_text: String) -> Self {
        JobRecord { job_id: None, circuit_text, state: JobState::Created, counts: None, attempts: 0 }
    }
}

/// Contract between the orchestration layer and an execution backend.
///
/// Implementations must be idempotent consumers: polling a done job stays
/// done, and fetching its result repeatedly returns identical counts.
/// `job_result` succeeds exactly when `job_status` reports `Done`.
pub trait BackendAdapter: Send + Sync {
    fn submit_job(&self, circuit_text: &str) -> Result<JobId, BackendError>;
    fn job_status(&self, job_id: &JobId) -> Result<JobStatus, BackendError>;
    fn job_result(&self, job_id: &JobId) -> Result<CountsMap, BackendError>;
}

/// Reads the execution parameters a document carries: `shots` (default 1000)
/// and `seed` (default 0) metadata.
pub fn run_meta(circuit: &QuantumCircuit) -> Result<(u64, u64), BackendError> {
    let parse = |key: &str, fallback: u64| -> Result<u64, BackendError> {
        match circuit.meta(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| BackendError::BadCircuit(format!("bad {key} metadata '{raw}'"))),
            None => Ok(fallback),
        }
    };
    let shots = parse("shots", 1000)?;
    if shots == 0 {
        return Err(BackendError::BadCircuit("shots metadata must be at least 1".to_string()));
    }
    Ok((shots, parse("seed", 0)?))
}

/// Embedded simulator behind the adapter contract. Jobs complete at submit
/// time; counts are computed once and replayed identically on every fetch.
pub struct LocalSimBackend {
    results: Mutex<HashMap<JobId, CountsMap>>,
    next_job: AtomicU64,
}

impl LocalSimBackend {
    pub fn new() -> Self {
        LocalSimBackend { results: Mutex::new(HashMap::new()), next_job: AtomicU64::new(1) }
    }
}

impl Default for LocalSimBackend {
    fn default() -> Self {
        LocalSimBackend::new()
    }
}

impl BackendAdapter for LocalSimBackend {
    fn submit_job(&self, circuit_text: &str) -> Result<JobId, BackendError> {
        let circuit = QuantumCircuit::parse(circuit_text)
            .map_err(|e| BackendError::BadCircuit(e.to_string()))?;
        let (shots, seed) = run_meta(&circuit)?;
        let counts = qsim::sample_counts(&circuit, shots, seed)
            .map_err(|e| BackendError::BadCircuit(e.to_string()))?;
        let job_id = JobId(format!("sim-{}", self.next_job.fetch_add(1, Ordering::Relaxed)));
        self.results.lock().expect("results lock").insert(job_id.clone(), counts);
        Ok(job_id)
    }

    fn job_status(&self, job_id: &JobId) -> Result<JobStatus, BackendError> {
        let results = self.results.lock().expect("results lock");
        if results.contains_key(job_id) {
            Ok(JobStatus::Done)
        } else {
            Err(BackendError::UnknownJob(job_id.clone()))
        }
    }

    fn job_result(&self, job_id: &JobId) -> Result<CountsMap, BackendError> {
        let results = self.results.lock().expect("results lock");
        results.get(job_id).cloned().ok_or_else(|| BackendError::UnknownJob(job_id.clone()))
    }
}

/// Local execution dressed up as a remote queue: each job must be polled
/// `latency_polls` times before it reports done (queued first, then running),
/// and results are withheld until then. Counts are identical to what
/// [`LocalSimBackend`] produces for the same document.
pub struct MockRemoteBackend {
    inner: LocalSimBackend,
    latency_polls: u32,
    polls: Mutex<HashMap<JobId, u32>>,
}

impl MockRemoteBackend {
    pub fn new(latency_polls: u32) -> Self {
        MockRemoteBackend {
            inner: LocalSimBackend::new(),
            latency_polls: latency_polls.max(1),
            polls: Mutex::new(HashMap::new()),
        }
    }

    fn polls_seen(&self, job_id: &JobId) -> u32 {
        self.polls.lock().expect("polls lock").get(job_id).copied().unwrap_or(0)
    }
}

impl BackendAdapter for MockRemoteBackend {
    fn submit_job(&self, circuit_text: &str) -> Result<JobId, BackendError> {
        self.inner.submit_job(circuit_text)
    }

    fn job_status(&self, job_id: &JobId) -> Result<JobStatus, BackendError> {
        // Validate the id first so unknown jobs fail before latency counting.
        self.inner.job_status(job_id)?;
        let mut polls = self.polls.lock().expect("polls lock");
        let count = polls.entry(job_id.clone()).or_insert(0);
        *count = count.saturating_add(1);
        Ok(if *count >= self.latency_polls {
            JobStatus::Done
        } else if *count == 1 {
            JobStatus::Queued
        } else {
            JobStatus::Running
        })
    }

    fn job_result(&self, job_id: &JobId) -> Result<CountsMap, BackendError> {
        if self.polls_seen(job_id) < self.latency_polls {
            // Result before done would break the adapter contract.
            self.inner.job_status(job_id)?;
            return Err(BackendError::NotReady(job_id.clone()));
        }
        self.inner.job_result(job_id)
    }
}

/// How a [`FailingBackend`] misbehaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMode {
    /// Every submission is rejected.
    RejectSubmissions,
    /// Submissions succeed; every job then reports failed.
    FailExecution,
}

/// Test double for failure paths.
pub struct FailingBackend {
    mode: FailureMode,
    next_job: AtomicU64,
}

impl FailingBackend {
    pub fn new(mode: FailureMode) -> Self {
        FailingBackend { mode, next_job: AtomicU64::new(1) }
    }
}

impl BackendAdapter for FailingBackend {
    fn submit_job(&self, _circuit_text: &str) -> Result<JobId, BackendError> {
        match self.mode {
            FailureMode::RejectSubmissions => {
                Err(BackendError::Unavailable("submission rejected".to_string()))
            }
            FailureMode::FailExecution => {
                Ok(JobId(format!("doomed-{}", self.next_job.fetch_add(1, Ordering::Relaxed))))
            }
        }
    }

    fn job_status(&self, _job_id: &JobId) -> Result<JobStatus, BackendError> {
        Ok(JobStatus::Failed)
    }

    fn job_result(&self, job_id: &JobId) -> Result<CountsMap, BackendError> {
        Err(BackendError::ExecutionFailed {
            job_id: job_id.clone(),
            reason: "job failed".to_string(),
        })
    }
}
