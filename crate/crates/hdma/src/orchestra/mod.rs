//! Service choreography: bus, backends, workflow driver, HTTP facades.
//!
//! Six logical services cooperate per workflow, exchanging numbered messages
//! over an in-process bus (std threads and channels, no async runtime):
//!
//! * Application: owns the workflow, publishes M1 and the follow-up requests.
//! * Decision: answers M1 with M1r, routing quantum or classical.
//! * Data: answers M2 (extract) with M2r and applies write-backs on M8/M9.
//! * Circuit generation: answers M3 with the compiled batch in M3r.
//! * Backend: takes M4, submits every circuit through the adapter (the
//!   submit call itself is an adapter method, not a bus message) and hands
//!   the job list to the result manager via M6.
//! * Result manager: polls the adapter, folds counts into estimates and
//!   assignments, and publishes the M8 result notice to the requested sinks.
//!
//! The classical route replaces M2..M8 with a single M9 exchange against the
//! Data service. Delivery is at-least-once: every handler tracks seen message
//! ids and drops duplicates, so replaying any recorded envelope is a no-op.

pub mod backend;
pub mod bus;
pub mod facade;
mod workflow;

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use crate::datastore::{CentroidRecord, DataError, PointRecord, Table};
use crate::distance::{Assignment, DistanceError, DistanceEstimate};
use crate::encode::{Profile, ProfileError};

pub use backend::{
    BackendAdapter, BackendError, FailingBackend, JobId, JobRecord, JobState, JobStatus,
    LocalSimBackend, MockRemoteBackend,
};
pub use bus::{AppEvent, Bus, Delivery, Envelope, Payload};
pub use facade::{
    http_call, HttpBackendClient, HttpRequest, HttpResponse, MockRemoteServer, ServiceFacade,
};
pub use workflow::{
    decide, decide_with_policy, derive_job_seed, notify_results, poll_collect, submit_batch,
    watch, DecisionPolicy, Orchestra, OrchestraConfig, WatchOutcome, WorkflowOutcome,
    WorkflowStatus,
};

/// The services that can publish or receive bus messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServiceId {
    Application,
    Decision,
    Data,
    Circuit,
    Backend,
    ResultManager,
}

impl ServiceId {
    pub fn name(self) -> &'static str {
        match self {
            ServiceId::Application => "application",
            ServiceId::Decision => "decision",
            ServiceId::Data => "data",
            ServiceId::Circuit => "circuit",
            ServiceId::Backend => "backend",
            ServiceId::ResultManager => "result-manager",
        }
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The numbered message vocabulary. Backend submit and poll calls are
/// adapter methods rather than messages, so they do not appear here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Application -> Decision: a problem wants solving.
    M1ProblemRequest,
    /// Decision -> Application: chosen route.
    M1rDecisionNotice,
    /// Application -> Data: extract records for the quantum pipeline.
    M2DataExtract,
    /// Data -> Application: table snapshot plus extracted records.
    M2rDataSet,
    /// Application -> Circuit: compile the pair circuits.
    M3CircuitGen,
    /// Circuit -> Application: serialized circuit batch.
    M3rCircuitBatch,
    /// Application -> Backend: run the batch.
    M4Submit,
    /// Backend -> ResultManager: watch these jobs.
    M6Watch,
    /// ResultManager -> sinks: estimates and assignments.
    M8ResultNotice,
    /// Application -> Data: classical-route exchange.
    M9ClassicalExchange,
}

impl MessageKind {
    pub fn label(self) -> &'static str {
        match self {
            MessageKind::M1ProblemRequest => "M1",
            MessageKind::M1rDecisionNotice => "M1r",
            MessageKind::M2DataExtract => "M2",
            MessageKind::M2rDataSet => "M2r",
            MessageKind::M3CircuitGen => "M3",
            MessageKind::M3rCircuitBatch => "M3r",
            MessageKind::M4Submit => "M4",
            MessageKind::M6Watch => "M6",
            MessageKind::M8ResultNotice => "M8",
            MessageKind::M9ClassicalExchange => "M9",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The message sequence of a conforming quantum-route workflow.
pub const QUANTUM_SEQUENCE: [MessageKind; 9] = [
    MessageKind::M1ProblemRequest,
    MessageKind::M1rDecisionNotice,
    MessageKind::M2DataExtract,
    MessageKind::M2rDataSet,
    MessageKind::M3CircuitGen,
    MessageKind::M3rCircuitBatch,
    MessageKind::M4Submit,
    MessageKind::M6Watch,
    MessageKind::M8ResultNotice,
];

/// The message sequence of a conforming classical-route workflow.
pub const CLASSICAL_SEQUENCE: [MessageKind; 3] = [
    MessageKind::M1ProblemRequest,
    MessageKind::M1rDecisionNotice,
    MessageKind::M9ClassicalExchange,
];

/// Correlates every message of one workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorrelationId(pub u64);

impl fmt::Display for CorrelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unique per published message; duplicates share the id of the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MsgId(pub u64);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Route chosen by the decision service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Quantum,
    Classical,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Quantum => "quantum",
            Route::Classical => "classical",
        })
    }
}

/// Where result notices go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sinks {
    Application,
    Datastore,
    Both,
}

impl Sinks {
    pub fn includes_application(self) -> bool {
        matches!(self, Sinks::Application | Sinks::Both)
    }

    pub fn includes_datastore(self) -> bool {
        matches!(self, Sinks::Datastore | Sinks::Both)
    }
}

impl fmt::Display for Sinks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sinks::Application => "application",
            Sinks::Datastore => "datastore",
            Sinks::Both => "both",
        })
    }
}

impl std::str::FromStr for Sinks {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "application" => Ok(Sinks::Application),
            "datastore" => Ok(Sinks::Datastore),
            "both" => Ok(Sinks::Both),
            other => Err(format!("unknown sinks '{other}' (expected application, datastore or both)")),
        }
    }
}

/// A problem submitted to the orchestration layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemRequest {
    /// Problem kind; the decision policy routes `cluster-assignment` to the
    /// quantum pipeline and rejects kinds it has never heard of.
    pub kind: String,
    /// CSV table the workflow reads and (with a datastore sink) writes back.
    pub data_path: PathBuf,
    /// Optional profile path; defaults apply when absent.
    pub profile_path: Option<PathBuf>,
}

impl ProblemRequest {
    pub fn cluster_assignment(data_path: impl Into<PathBuf>) -> Self {
        ProblemRequest {
            kind: "cluster-assignment".to_string(),
            data_path: data_path.into(),
            profile_path: None,
        }
    }

    pub fn with_profile(mut self, profile_path: impl Into<PathBuf>) -> Self {
        self.profile_path = Some(profile_path.into());
        self
    }
}

/// Per-run knobs supplied alongside a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    /// Overrides the profile's shot count when set.
    pub shots: Option<u64>,
    /// Base seed; per-pair sampling seeds are derived from it.
    pub seed: u64,
    /// Result sinks for the M8/M9 notices.
    pub sinks: Sinks,
    /// How long the application waits for the whole workflow.
    pub workflow_timeout: Duration,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            shots: None,
            seed: 0,
            sinks: Sinks::Application,
            workflow_timeout: Duration::from_secs(30),
        }
    }
}

impl RunParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn with_sinks(mut self, sinks: Sinks) -> Self {
        self.sinks = sinks;
        self
    }
}

/// Payload of the M8 result notice: everything downstream consumers need to
/// apply or display the run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultNotice {
    pub data_path: PathBuf,
    pub sinks: Sinks,
    pub estimates: Vec<DistanceEstimate>,
    pub assignments: Vec<Assignment>,
    pub jobs: Vec<JobRecord>,
}

/// Snapshot of the records a quantum run works on.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub table: Table,
    pub centroids: Vec<CentroidRecord>,
    pub points: Vec<PointRecord>,
    /// Profile with the ID width resolved against the full table.
    pub profile: Profile,
}

/// One recorded bus event.
#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub at: std::time::SystemTime,
    pub correlation_id: CorrelationId,
    pub publisher: ServiceId,
    pub kind: MessageKind,
}

/// Append-only log of every published message, shared by all services.
/// Redeliveries do not add events: the log records logical messages.
#[derive(Debug, Clone, Default)]
pub struct TraceLog {
    inner: std::sync::Arc<std::sync::Mutex<Vec<TraceEvent>>>,
}

impl TraceLog {
    pub fn new() -> Self {
        TraceLog::default()
    }

    pub fn record(&self, correlation_id: CorrelationId, publisher: ServiceId, kind: MessageKind) {
        self.inner.lock().expect("trace lock").push(TraceEvent {
            at: std::time::SystemTime::now(),
            correlation_id,
            publisher,
            kind,
        });
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.inner.lock().expect("trace lock").clone()
    }

    /// The message kinds published under one correlation id, in order.
    pub fn kinds_for(&self, correlation_id: CorrelationId) -> Vec<MessageKind> {
        self.inner
            .lock()
            .expect("trace lock")
            .iter()
            .filter(|e| e.correlation_id == correlation_id)
            .map(|e| e.kind)
            .collect()
    }

    /// Publisher and kind pairs for one correlation id, in order.
    pub fn sequence_for(&self, correlation_id: CorrelationId) -> Vec<(ServiceId, MessageKind)> {
        self.inner
            .lock()
            .expect("trace lock")
            .iter()
            .filter(|e| e.correlation_id == correlation_id)
            .map(|e| (e.publisher, e.kind))
            .collect()
    }
}

/// Failures surfaced by the orchestration layer.
#[derive(Debug, thiserror::Error)]
pub enum OrchestraError {
    #[error("unknown problem kind '{0}'")]
    UnknownProblemKind(String),
    #[error("workflow failed in the {stage} service: {reason}")]
    WorkflowFailed { stage: ServiceId, reason: String },
    #[error("backend unavailable after {attempts} attempts on circuit {failed_index}: {reason}")]
    BackendUnavailable {
        failed_index: usize,
        attempts: u32,
        reason: String,
        /// Job records up to the failure; earlier jobs keep their submitted
        /// state so callers can see exactly how far the batch got.
        jobs: Vec<JobRecord>,
    },
    #[error("timed out waiting for jobs: {}", .unfinished.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(", "))]
    Timeout { unfinished: Vec<JobId> },
    #[error("job {job_id} failed on the backend: {reason}")]
    JobFailed { job_id: JobId, reason: String },
    #[error("result sink {0} is unavailable")]
    SinkUnavailable(ServiceId),
    #[error("no workflow with correlation id {0}")]
    UnknownCorrelation(CorrelationId),
    #[error("workflow {0} still running")]
    StillRunning(CorrelationId),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
}
