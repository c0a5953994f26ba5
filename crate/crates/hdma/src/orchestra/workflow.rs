//! Workflow driver: service loops, the coordinator, and the named
//! orchestration operations (decide, submit, poll, notify, watch).
//!
//! [`Orchestra::start`] spawns the five spoke services; each workflow then
//! runs on its own coordinator thread that publishes requests and waits for
//! the answering messages. Failure anywhere surfaces as a single
//! `WorkflowFailed` with the offending stage; nothing is written to the
//! datastore unless the result notice actually arrives with a datastore sink.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::backend::{BackendAdapter, JobId, JobRecord, JobState, JobStatus};
use super::bus::{AppEvent, Bus, Delivery, Envelope, Payload};
use super::{
    CorrelationId, DataSet, MessageKind, MsgId, OrchestraError, ProblemRequest, ResultNotice,
    Route, RunParams, ServiceId, TraceLog,
};
use crate::datastore::Table;
use crate::distance::{self, PairSpec};
use crate::encode::Profile;
use crate::qcir::QuantumCircuit;
use crate::qsim::CountsMap;

/// Which problem kinds the decision stage recognizes and may route to the
/// quantum pipeline. Anything else is an unknown problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionPolicy {
    pub quantum_kinds: Vec<String>,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        DecisionPolicy { quantum_kinds: vec!["cluster-assignment".to_string()] }
    }
}

/// Shared configuration for one orchestra instance.
#[derive(Clone)]
pub struct OrchestraConfig {
    pub backend: Arc<dyn BackendAdapter>,
    pub policy: DecisionPolicy,
    /// Delay between poll rounds while jobs are in flight.
    pub poll_interval: Duration,
    /// Overall budget for polling a batch to completion.
    pub poll_timeout: Duration,
    /// Submission attempts per circuit before giving up.
    pub submit_retries: u32,
}

impl OrchestraConfig {
    pub fn with_backend(backend: Arc<dyn BackendAdapter>) -> Self {
        OrchestraConfig {
            backend,
            policy: DecisionPolicy::default(),
            poll_interval: Duration::from_millis(100),
            poll_timeout: Duration::from_secs(30),
            submit_retries: 3,
        }
    }

    /// Local simulator backend and default knobs.
    pub fn local() -> Self {
        OrchestraConfig::with_backend(Arc::new(super::backend::LocalSimBackend::new()))
    }
}

/// Routes a problem: quantum iff the kind is a known quantum kind, the
/// unassigned point count fits the profile budget, and the table validates
/// cleanly against the profile; classical otherwise. Unknown kinds are
/// errors, not classical fallbacks, so typos fail loudly.
pub fn decide(problem: &ProblemRequest, profile: &Profile) -> Result<Route, OrchestraError> {
    decide_with_policy(problem, profile, &DecisionPolicy::default())
}

pub fn decide_with_policy(
    problem: &ProblemRequest,
    profile: &Profile,
    policy: &DecisionPolicy,
) -> Result<Route, OrchestraError> {
    if !policy.quantum_kinds.contains(&problem.kind) {
        return Err(OrchestraError::UnknownProblemKind(problem.kind.clone()));
    }
    let table = Table::load(&problem.data_path)?;
    let violations = crate::encode::validate(&table, profile);
    if violations.is_empty() {
        Ok(Route::Quantum)
    } else {
        Ok(Route::Classical)
    }
}

/// Mixes a base seed with a pair's ids into the sampling seed for that
/// pair's circuit. SplitMix64-style finalizers keep the mapping deterministic
/// and well spread without any ordering dependence between pairs.
pub fn derive_job_seed(base_seed: u64, point_id: u64, centroid_id: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    mix(base_seed ^ mix(point_id ^ mix(centroid_id)))
}

/// Submits every circuit, in order, retrying each up to `retries` times.
/// On success all records are `Submitted` with their job ids. On persistent
/// failure the error carries the records as they stood: earlier submissions
/// keep their ids and state, later circuits remain `Created`.
pub fn submit_batch(
    circuit_texts: &[String],
    backend: &dyn BackendAdapter,
    retries: u32,
) -> Result<Vec<JobRecord>, OrchestraError> {
    let retries = retries.max(1);
    let mut jobs: Vec<JobRecord> =
        circuit_texts.iter().map(|text| JobRecord::created(text.clone())).collect();
    for index in 0..jobs.len() {
        let mut last_error: Option<super::BackendError> = None;
        for _ in 0..retries {
            jobs[index].attempts += 1;
            match backend.submit_job(&jobs[index].circuit_text) {
                Ok(job_id) => {
                    jobs[index].job_id = Some(job_id);
                    jobs[index].state = JobState::Submitted;
                    last_error = None;
                    break;
                }
                Err(err) => last_error = Some(err),
            }
        }
        if let Some(err) = last_error {
            let attempts = jobs[index].attempts;
            return Err(OrchestraError::BackendUnavailable {
                failed_index: index,
                attempts,
                reason: err.to_string(),
                jobs,
            });
        }
    }
    Ok(jobs)
}

/// Polls all submitted jobs until every one is terminal, fetching each done
/// job's counts exactly once. Fails with `Timeout` (listing unfinished ids)
/// when the budget runs out, or `JobFailed` for the first job the backend
/// reports failed.
pub fn poll_collect(
    jobs: &mut [JobRecord],
    backend: &dyn BackendAdapter,
    poll_interval: Duration,
    poll_timeout: Duration,
) -> Result<(), OrchestraError> {
    let deadline = Instant::now() + poll_timeout;
    loop {
        let mut unfinished: Vec<JobId> = Vec::new();
        for job in jobs.iter_mut() {
            if job.state.is_terminal() {
                continue;
            }
            let job_id = match &job.job_id {
                Some(id) => id.clone(),
                None => continue,
            };
            match backend.job_status(&job_id)? {
                JobStatus::Queued => {
                    unfinished.push(job_id);
                }
                JobStatus::Running => {
                    job.state = JobState::Running;
                    unfinished.push(job_id);
                }
                JobStatus::Done => {
                    // Fetch exactly once per job id; a retried poll round
                    // must not refetch.
                    if job.counts.is_none() {
                        job.counts = Some(backend.job_result(&job_id)?);
                    }
                    job.state = JobState::Done;
                }
                JobStatus::Failed => {
                    job.state = JobState::Failed;
                    return Err(OrchestraError::JobFailed {
                        job_id,
                        reason: "backend reported failure".to_string(),
                    });
                }
            }
        }
        if unfinished.is_empty() {
            return Ok(());
        }
        if Instant::now() + poll_interval > deadline {
            return Err(OrchestraError::Timeout { unfinished });
        }
        thread::sleep(poll_interval);
    }
}

/// Publishes one M8 result notice to the requested sinks under a single
/// message id. Fails with `SinkUnavailable` when a requested sink cannot
/// take delivery right now.
pub fn notify_results(
    bus: &Bus,
    correlation_id: CorrelationId,
    notice: ResultNotice,
) -> Result<MsgId, OrchestraError> {
    let sinks = notice.sinks;
    let mut recipients = Vec::new();
    if sinks.includes_application() {
        recipients.push(ServiceId::Application);
    }
    if sinks.includes_datastore() {
        if !bus.topic_available(ServiceId::Data) {
            return Err(OrchestraError::SinkUnavailable(ServiceId::Data));
        }
        recipients.push(ServiceId::Data);
    }
    let (envelope, delivered) = bus.publish(
        ServiceId::ResultManager,
        &recipients,
        correlation_id,
        MessageKind::M8ResultNotice,
        Payload::Result(notice),
    );
    if !delivered {
        // The application route vanishes when a workflow dies first; report
        // whichever sink was requested and missing.
        let missing = if sinks.includes_datastore() && !bus.topic_available(ServiceId::Data) {
            ServiceId::Data
        } else {
            ServiceId::Application
        };
        return Err(OrchestraError::SinkUnavailable(missing));
    }
    Ok(envelope.msg_id)
}

/// Terminal state of one workflow.
#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub correlation_id: CorrelationId,
    pub route: Route,
    pub assignments: Vec<distance::Assignment>,
    pub estimates: Vec<distance::DistanceEstimate>,
    /// The table as the workflow leaves it: updated when a datastore sink
    /// applied the assignments, otherwise the snapshot the run started from.
    pub table: Table,
    /// Job records for the quantum route (empty for classical runs).
    pub jobs: Vec<JobRecord>,
}

/// Coordinator-side view of a workflow's progress.
#[derive(Debug, Clone)]
pub enum WorkflowStatus {
    Running,
    Done(Box<WorkflowOutcome>),
    Failed { stage: ServiceId, reason: String },
}

struct WorkflowCell {
    state: Mutex<Option<Result<WorkflowOutcome, (ServiceId, String)>>>,
    done: Condvar,
}

impl WorkflowCell {
    fn new() -> Self {
        WorkflowCell { state: Mutex::new(None), done: Condvar::new() }
    }

    fn complete(&self, result: Result<WorkflowOutcome, (ServiceId, String)>) {
        *self.state.lock().expect("cell lock") = Some(result);
        self.done.notify_all();
    }

    fn wait(&self, timeout: Duration) -> Option<Result<WorkflowOutcome, (ServiceId, String)>> {
        let guard = self.state.lock().expect("cell lock");
        let (guard, _) = self
            .done
            .wait_timeout_while(guard, timeout, |state| state.is_none())
            .expect("cell lock");
        guard.clone()
    }

    fn status(&self) -> WorkflowStatus {
        match &*self.state.lock().expect("cell lock") {
            None => WorkflowStatus::Running,
            Some(Ok(outcome)) => WorkflowStatus::Done(Box::new(outcome.clone())),
            Some(Err((stage, reason))) => {
                WorkflowStatus::Failed { stage: *stage, reason: reason.clone() }
            }
        }
    }
}

struct Ctx {
    bus: Bus,
    config: OrchestraConfig,
}

/// The running service ensemble. Dropping it stops the services; workflows
/// already in flight finish (or time out) on their own threads.
pub struct Orchestra {
    ctx: Arc<Ctx>,
    services: Vec<JoinHandle<()>>,
    workflows: Mutex<std::collections::HashMap<CorrelationId, Arc<WorkflowCell>>>,
    stopped: AtomicBool,
}

impl Orchestra {
    /// Spawns the decision, data, circuit, backend and result-manager
    /// services against a fresh bus.
    pub fn start(config: OrchestraConfig) -> Arc<Self> {
        let ctx = Arc::new(Ctx { bus: Bus::new(), config });
        let mut services = Vec::new();
        let spokes: [(ServiceId, fn(&Ctx, Envelope)); 5] = [
            (ServiceId::Decision, handle_decision),
            (ServiceId::Data, handle_data),
            (ServiceId::Circuit, handle_circuit),
            (ServiceId::Backend, handle_backend),
            (ServiceId::ResultManager, handle_result_manager),
        ];
        for (service, handler) in spokes {
            let (sender, receiver) = mpsc::channel();
            ctx.bus.register_topic(service, sender);
            let ctx = Arc::clone(&ctx);
            services.push(
                thread::Builder::new()
                    .name(format!("hdma-{service}"))
                    .spawn(move || service_loop(&ctx, receiver, handler))
                    .expect("spawn service thread"),
            );
        }
        Arc::new(Orchestra {
            ctx,
            services,
            workflows: Mutex::new(std::collections::HashMap::new()),
            stopped: AtomicBool::new(false),
        })
    }

    pub fn trace(&self) -> &TraceLog {
        self.ctx.bus.trace()
    }

    pub fn bus(&self) -> &Bus {
        &self.ctx.bus
    }

    /// Starts a workflow asynchronously and returns its correlation id.
    pub fn start_workflow(&self, problem: ProblemRequest, params: RunParams) -> CorrelationId {
        let correlation_id = self.ctx.bus.fresh_correlation();
        let (sender, receiver) = mpsc::channel();
        self.ctx.bus.register_application(correlation_id, sender);
        let cell = Arc::new(WorkflowCell::new());
        self.workflows
            .lock()
            .expect("workflows lock")
            .insert(correlation_id, Arc::clone(&cell));
        let ctx = Arc::clone(&self.ctx);
        thread::Builder::new()
            .name(format!("hdma-workflow-{correlation_id}"))
            .spawn(move || {
                let result = run_coordinator(&ctx, correlation_id, problem, params, receiver);
                ctx.bus.unregister_application(correlation_id);
                cell.complete(result);
            })
            .expect("spawn workflow thread");
        correlation_id
    }

    /// Blocks until the workflow finishes and returns its outcome.
    pub fn wait(
        &self,
        correlation_id: CorrelationId,
        timeout: Duration,
    ) -> Result<WorkflowOutcome, OrchestraError> {
        let cell = self
            .workflows
            .lock()
            .expect("workflows lock")
            .get(&correlation_id)
            .cloned()
            .ok_or(OrchestraError::UnknownCorrelation(correlation_id))?;
        match cell.wait(timeout) {
            Some(Ok(outcome)) => Ok(outcome),
            Some(Err((stage, reason))) => Err(OrchestraError::WorkflowFailed { stage, reason }),
            None => Err(OrchestraError::StillRunning(correlation_id)),
        }
    }

    /// Runs a workflow to completion on the calling thread.
    pub fn run_workflow(
        &self,
        problem: ProblemRequest,
        params: RunParams,
    ) -> Result<WorkflowOutcome, OrchestraError> {
        let timeout = params.workflow_timeout + Duration::from_secs(5);
        let correlation_id = self.start_workflow(problem, params);
        self.wait(correlation_id, timeout)
    }

    /// Progress snapshot for one workflow.
    pub fn status(&self, correlation_id: CorrelationId) -> Option<WorkflowStatus> {
        self.workflows
            .lock()
            .expect("workflows lock")
            .get(&correlation_id)
            .map(|cell| cell.status())
    }

    /// Stops the spoke services. Idempotent; also runs on drop.
    pub fn shutdown(&self) {
        if self.stopped.swap(true, Ordering::SeqCst) {
            return;
        }
        self.ctx.bus.shutdown_topics();
    }
}

impl Drop for Orchestra {
    fn drop(&mut self) {
        self.shutdown();
        for handle in self.services.drain(..) {
            let _ = handle.join();
        }
    }
}

fn service_loop(ctx: &Ctx, receiver: Receiver<Delivery>, handler: fn(&Ctx, Envelope)) {
    let mut seen: HashSet<MsgId> = HashSet::new();
    while let Ok(delivery) = receiver.recv() {
        match delivery {
            Delivery::Stop => break,
            Delivery::Envelope(envelope) => {
                // At-least-once delivery: replayed message ids are dropped
                // here, which is what makes redelivery harmless.
                if seen.insert(envelope.msg_id) {
                    handler(ctx, envelope);
                }
            }
        }
    }
}

fn load_profile(profile_path: &Option<std::path::PathBuf>) -> Result<Profile, OrchestraError> {
    match profile_path {
        Some(path) => Ok(Profile::load(path)?),
        None => Ok(Profile::default()),
    }
}

fn handle_decision(ctx: &Ctx, envelope: Envelope) {
    let Payload::Problem { problem, .. } = &envelope.payload else { return };
    let outcome = load_profile(&problem.profile_path)
        .and_then(|profile| decide_with_policy(problem, &profile, &ctx.config.policy));
    match outcome {
        Ok(route) => {
            ctx.bus.publish(
                ServiceId::Decision,
                &[ServiceId::Application],
                envelope.correlation_id,
                MessageKind::M1rDecisionNotice,
                Payload::Decision { route },
            );
        }
        Err(err) => ctx.bus.fail(envelope.correlation_id, ServiceId::Decision, err.to_string()),
    }
}

fn handle_data(ctx: &Ctx, envelope: Envelope) {
    match &envelope.payload {
        Payload::Extract { data_path, profile_path } => {
            let result = (|| -> Result<DataSet, OrchestraError> {
                let table = Table::load(data_path)?;
                let profile = load_profile(profile_path)?;
                let max_id = table.rows().iter().map(|r| r.id).max().unwrap_or(0);
                let profile = profile.with_resolved_id_width(max_id);
                let (centroids, points) = table.extract(&profile)?;
                Ok(DataSet { table, centroids, points, profile })
            })();
            match result {
                Ok(data_set) => {
                    ctx.bus.publish(
                        ServiceId::Data,
                        &[ServiceId::Application],
                        envelope.correlation_id,
                        MessageKind::M2rDataSet,
                        Payload::DataSet(data_set),
                    );
                }
                Err(err) => {
                    ctx.bus.fail(envelope.correlation_id, ServiceId::Data, err.to_string())
                }
            }
        }
        Payload::Result(notice) => {
            if notice.sinks.includes_datastore() {
                apply_write_back(ctx, envelope.correlation_id, &notice.data_path, &notice.assignments);
            }
        }
        Payload::Classical { data_path, assignments, sinks } => {
            if sinks.includes_datastore() {
                apply_write_back(ctx, envelope.correlation_id, data_path, assignments);
            }
        }
        _ => {}
    }
}

/// Applies assignments to the table file and acknowledges to the workflow.
/// All writes funnel through the single data-service thread, so two
/// workflows can never interleave partial updates to one file.
fn apply_write_back(
    ctx: &Ctx,
    correlation_id: CorrelationId,
    data_path: &std::path::Path,
    assignments: &[distance::Assignment],
) {
    let result = (|| -> Result<Table, OrchestraError> {
        let mut table = Table::load(data_path)?;
        for assignment in assignments {
            table.update_cluster(assignment.point_id, &assignment.cluster_label)?;
        }
        table.persist(data_path)?;
        Ok(table)
    })();
    match result {
        Ok(table) => {
            ctx.bus.notify_application(correlation_id, AppEvent::SinkApplied { table });
        }
        Err(err) => ctx.bus.fail(correlation_id, ServiceId::Data, err.to_string()),
    }
}

fn handle_circuit(ctx: &Ctx, envelope: Envelope) {
    let Payload::CircuitGen { centroids, points, profile } = &envelope.payload else { return };
    let result = (|| -> Result<Vec<String>, OrchestraError> {
        let mut circuit_texts = Vec::with_capacity(points.len() * centroids.len());
        for point in points {
            for centroid in centroids {
                let pair = PairSpec { point: point.clone(), centroid: centroid.clone() };
                let circuit = distance::build_pair_circuit(&pair, profile)?;
                circuit_texts.push(circuit.serialize());
            }
        }
        Ok(circuit_texts)
    })();
    match result {
        Ok(circuit_texts) => {
            ctx.bus.publish(
                ServiceId::Circuit,
                &[ServiceId::Application],
                envelope.correlation_id,
                MessageKind::M3rCircuitBatch,
                Payload::CircuitBatch { circuit_texts },
            );
        }
        Err(err) => ctx.bus.fail(envelope.correlation_id, ServiceId::Circuit, err.to_string()),
    }
}

/// Stamps shots and the derived per-pair seed into a circuit document before
/// submission, so the execution request is self-contained.
fn prepare_for_submission(
    circuit_text: &str,
    shots: u64,
    base_seed: u64,
) -> Result<String, OrchestraError> {
    let mut circuit = QuantumCircuit::parse(circuit_text)
        .map_err(|e| OrchestraError::Backend(super::BackendError::BadCircuit(e.to_string())))?;
    let point_id: u64 = circuit.meta("point_id").and_then(|v| v.parse().ok()).unwrap_or(0);
    let centroid_id: u64 = circuit.meta("centroid_id").and_then(|v| v.parse().ok()).unwrap_or(0);
    let seed = derive_job_seed(base_seed, point_id, centroid_id);
    circuit.set_meta("shots", &shots.to_string()).expect("numeric metadata");
    circuit.set_meta("seed", &seed.to_string()).expect("numeric metadata");
    Ok(circuit.serialize())
}

fn handle_backend(ctx: &Ctx, envelope: Envelope) {
    let Payload::Submit { circuit_texts, shots, seed, sinks, centroids, points, data_path } =
        &envelope.payload
    else {
        return;
    };
    let result = (|| -> Result<Vec<JobRecord>, OrchestraError> {
        let prepared: Vec<String> = circuit_texts
            .iter()
            .map(|text| prepare_for_submission(text, *shots, *seed))
            .collect::<Result<_, _>>()?;
        submit_batch(&prepared, ctx.config.backend.as_ref(), ctx.config.submit_retries)
    })();
    match result {
        Ok(jobs) => {
            ctx.bus.publish(
                ServiceId::Backend,
                &[ServiceId::ResultManager],
                envelope.correlation_id,
                MessageKind::M6Watch,
                Payload::Watch {
                    jobs,
                    sinks: *sinks,
                    centroids: centroids.clone(),
                    points: points.clone(),
                    data_path: data_path.clone(),
                },
            );
        }
        Err(err) => ctx.bus.fail(envelope.correlation_id, ServiceId::Backend, err.to_string()),
    }
}

fn handle_result_manager(ctx: &Ctx, envelope: Envelope) {
    let Payload::Watch { jobs, sinks, centroids, points, data_path } = &envelope.payload else {
        return;
    };
    let mut jobs = jobs.clone();
    let result = (|| -> Result<ResultNotice, OrchestraError> {
        poll_collect(
            &mut jobs,
            ctx.config.backend.as_ref(),
            ctx.config.poll_interval,
            ctx.config.poll_timeout,
        )?;
        let mut estimates = Vec::with_capacity(jobs.len());
        for job in &jobs {
            let circuit = QuantumCircuit::parse(&job.circuit_text)
                .map_err(|e| OrchestraError::Backend(super::BackendError::BadCircuit(e.to_string())))?;
            let pair = pair_from_meta(&circuit, points, centroids)?;
            let counts: &CountsMap = job
                .counts
                .as_ref()
                .expect("poll_collect leaves every job done with counts");
            estimates.push(distance::estimate(counts, &pair)?);
        }
        let assignments = distance::assign_clusters(&estimates, centroids)?;
        Ok(ResultNotice {
            data_path: data_path.clone(),
            sinks: *sinks,
            estimates,
            assignments,
            jobs: jobs.clone(),
        })
    })();
    match result {
        Ok(notice) => {
            let correlation_id = envelope.correlation_id;
            if let Err(err) = notify_results(&ctx.bus, correlation_id, notice.clone()) {
                ctx.bus.fail(correlation_id, ServiceId::ResultManager, err.to_string());
                return;
            }
            // Completion plumbing: the coordinator learns the outcome even
            // when the application sink was not requested.
            ctx.bus.notify_application(correlation_id, AppEvent::Completed { notice });
        }
        Err(err) => {
            ctx.bus.fail(envelope.correlation_id, ServiceId::ResultManager, err.to_string())
        }
    }
}

fn pair_from_meta(
    circuit: &QuantumCircuit,
    points: &[crate::datastore::PointRecord],
    centroids: &[crate::datastore::CentroidRecord],
) -> Result<PairSpec, OrchestraError> {
    let bad = |what: &str| {
        OrchestraError::Backend(super::BackendError::BadCircuit(format!(
            "circuit document lacks usable {what} metadata"
        )))
    };
    let point_id: u64 = circuit
        .meta("point_id")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("point_id"))?;
    let centroid_id: u64 = circuit
        .meta("centroid_id")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("centroid_id"))?;
    let point = points.iter().find(|p| p.id == point_id).cloned().ok_or_else(|| bad("point_id"))?;
    let centroid = centroids
        .iter()
        .find(|c| c.id == centroid_id)
        .cloned()
        .ok_or_else(|| bad("centroid_id"))?;
    Ok(PairSpec { point, centroid })
}

/// What the coordinator still waits for.
struct Pending {
    completed: Option<ResultNotice>,
    sink_table: Option<Table>,
}

fn run_coordinator(
    ctx: &Ctx,
    correlation_id: CorrelationId,
    problem: ProblemRequest,
    params: RunParams,
    receiver: Receiver<AppEvent>,
) -> Result<WorkflowOutcome, (ServiceId, String)> {
    let deadline = Instant::now() + params.workflow_timeout;
    let app = ServiceId::Application;
    let fail_here = |reason: String| (app, reason);

    let mut seen: HashSet<MsgId> = HashSet::new();
    let mut wait_for = |want: MessageKind| -> Result<Envelope, (ServiceId, String)> {
        loop {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .ok_or_else(|| fail_here(format!("timed out waiting for {want}")))?;
            match receiver.recv_timeout(remaining) {
                Ok(AppEvent::Message(envelope)) => {
                    if !seen.insert(envelope.msg_id) {
                        continue;
                    }
                    if envelope.kind == want {
                        return Ok(envelope);
                    }
                    // Stray kinds (late duplicates of earlier stages) are
                    // dropped; the workflow only moves forward.
                }
                Ok(AppEvent::Failed { stage, reason }) => return Err((stage, reason)),
                Ok(_) => continue,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(fail_here(format!("timed out waiting for {want}")))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(fail_here("coordinator channel closed".to_string()))
                }
            }
        }
    };

    ctx.bus.publish(
        app,
        &[ServiceId::Decision],
        correlation_id,
        MessageKind::M1ProblemRequest,
        Payload::Problem { problem: problem.clone(), params: params.clone() },
    );
    let decision = wait_for(MessageKind::M1rDecisionNotice)?;
    let Payload::Decision { route } = decision.payload else {
        return Err(fail_here("malformed decision notice".to_string()));
    };

    match route {
        Route::Classical => {
            run_classical_route(ctx, correlation_id, &problem, &params, receiver, deadline)
        }
        Route::Quantum => {
            ctx.bus.publish(
                app,
                &[ServiceId::Data],
                correlation_id,
                MessageKind::M2DataExtract,
                Payload::Extract {
                    data_path: problem.data_path.clone(),
                    profile_path: problem.profile_path.clone(),
                },
            );
            let data_set = wait_for(MessageKind::M2rDataSet)?;
            let Payload::DataSet(data_set) = data_set.payload else {
                return Err(fail_here("malformed data set".to_string()));
            };

            ctx.bus.publish(
                app,
                &[ServiceId::Circuit],
                correlation_id,
                MessageKind::M3CircuitGen,
                Payload::CircuitGen {
                    centroids: data_set.centroids.clone(),
                    points: data_set.points.clone(),
                    profile: data_set.profile.clone(),
                },
            );
            let batch = wait_for(MessageKind::M3rCircuitBatch)?;
            let Payload::CircuitBatch { circuit_texts } = batch.payload else {
                return Err(fail_here("malformed circuit batch".to_string()));
            };

            let shots = params.shots.unwrap_or(data_set.profile.shots);
            ctx.bus.publish(
                app,
                &[ServiceId::Backend],
                correlation_id,
                MessageKind::M4Submit,
                Payload::Submit {
                    circuit_texts,
                    shots,
                    seed: params.seed,
                    sinks: params.sinks,
                    centroids: data_set.centroids.clone(),
                    points: data_set.points.clone(),
                    data_path: problem.data_path.clone(),
                },
            );

            let pending = collect_completion(
                receiver,
                deadline,
                params.sinks.includes_datastore(),
                &mut seen,
            )?;
            let notice = pending.completed.expect("collect_completion guarantees a notice");
            let table = match pending.sink_table {
                Some(updated) => updated,
                None => data_set.table,
            };
            Ok(WorkflowOutcome {
                correlation_id,
                route: Route::Quantum,
                assignments: notice.assignments,
                estimates: notice.estimates,
                table,
                jobs: notice.jobs,
            })
        }
    }
}

/// Waits for the completion notice and, when requested, the write-back ack.
fn collect_completion(
    receiver: Receiver<AppEvent>,
    deadline: Instant,
    wait_for_sink: bool,
    seen: &mut HashSet<MsgId>,
) -> Result<Pending, (ServiceId, String)> {
    let mut pending = Pending { completed: None, sink_table: None };
    loop {
        if pending.completed.is_some() && (!wait_for_sink || pending.sink_table.is_some()) {
            return Ok(pending);
        }
        let remaining = deadline
            .checked_duration_since(Instant::now())
            .ok_or((ServiceId::Application, "timed out waiting for results".to_string()))?;
        match receiver.recv_timeout(remaining) {
            Ok(AppEvent::Completed { notice }) => pending.completed = Some(notice),
            Ok(AppEvent::SinkApplied { table }) => pending.sink_table = Some(table),
            Ok(AppEvent::Failed { stage, reason }) => return Err((stage, reason)),
            Ok(AppEvent::Message(envelope)) => {
                // The M8 copy for the application sink; recorded for dedup
                // but the Completed plumbing is authoritative.
                seen.insert(envelope.msg_id);
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err((
                    ServiceId::Application,
                    "timed out waiting for results".to_string(),
                ))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err((
                    ServiceId::Application,
                    "coordinator channel closed".to_string(),
                ))
            }
        }
    }
}

fn run_classical_route(
    ctx: &Ctx,
    correlation_id: CorrelationId,
    problem: &ProblemRequest,
    params: &RunParams,
    receiver: Receiver<AppEvent>,
    deadline: Instant,
) -> Result<WorkflowOutcome, (ServiceId, String)> {
    let app = ServiceId::Application;
    // The classical exchange reads the table directly (a concurrent read of
    // an immutable snapshot); only the write-back goes through the data
    // service thread.
    let result = (|| -> Result<(Table, Vec<distance::Assignment>), OrchestraError> {
        let table = Table::load(&problem.data_path)?;
        let points = table.unassigned_points();
        let centroids = table.centroids();
        let assignments = distance::classical_assign(&points, &centroids)?;
        Ok((table, assignments))
    })();
    let (table, assignments) = result.map_err(|e| (app, e.to_string()))?;

    ctx.bus.publish(
        app,
        &[ServiceId::Data],
        correlation_id,
        MessageKind::M9ClassicalExchange,
        Payload::Classical {
            data_path: problem.data_path.clone(),
            assignments: assignments.clone(),
            sinks: params.sinks,
        },
    );

    let table = if params.sinks.includes_datastore() {
        let mut seen = HashSet::new();
        let pending = collect_sink_only(receiver, deadline, &mut seen)?;
        pending.unwrap_or(table)
    } else {
        table
    };

    Ok(WorkflowOutcome {
        correlation_id,
        route: Route::Classical,
        assignments,
        estimates: Vec::new(),
        table,
        jobs: Vec::new(),
    })
}

fn collect_sink_only(
    receiver: Receiver<AppEvent>,
    deadline: Instant,
    _seen: &mut HashSet<MsgId>,
) -> Result<Option<Table>, (ServiceId, String)> {
    loop {
        let remaining = deadline.checked_duration_since(Instant::now()).ok_or((
            ServiceId::Application,
            "timed out waiting for the write-back".to_string(),
        ))?;
        match receiver.recv_timeout(remaining) {
            Ok(AppEvent::SinkApplied { table }) => return Ok(Some(table)),
            Ok(AppEvent::Failed { stage, reason }) => return Err((stage, reason)),
            Ok(_) => continue,
            Err(RecvTimeoutError::Timeout) => {
                return Err((
                    ServiceId::Application,
                    "timed out waiting for the write-back".to_string(),
                ))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err((
                    ServiceId::Application,
                    "coordinator channel closed".to_string(),
                ))
            }
        }
    }
}

/// Outcome of one watch tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WatchOutcome {
    Unchanged,
    Reran { correlation_id: CorrelationId },
}

/// Polls the table's change token every `interval` and reruns the workflow
/// whenever it moves. Runs at most `max_ticks` ticks (None means forever) and
/// calls `on_tick` after each one. A rerun that writes back moves the token
/// again; the watcher absorbs that by re-reading the token after each rerun,
/// so a stable table settles instead of looping.
pub fn watch(
    orchestra: &Orchestra,
    problem: &ProblemRequest,
    params: &RunParams,
    interval: Duration,
    max_ticks: Option<u64>,
    mut on_tick: impl FnMut(u64, &WatchOutcome),
) -> Result<u64, OrchestraError> {
    let mut last_token = Table::load(&problem.data_path)?.change_token();
    let mut reruns = 0u64;
    let mut tick = 0u64;
    loop {
        if let Some(cap) = max_ticks {
            if tick >= cap {
                return Ok(reruns);
            }
        }
        thread::sleep(interval);
        tick += 1;
        let token = Table::load(&problem.data_path)?.change_token();
        let outcome = if token != last_token {
            let run = orchestra.run_workflow(problem.clone(), params.clone())?;
            reruns += 1;
            // The rerun itself may have rewritten the file.
            last_token = Table::load(&problem.data_path)?.change_token();
            WatchOutcome::Reran { correlation_id: run.correlation_id }
        } else {
            WatchOutcome::Unchanged
        };
        on_tick(tick, &outcome);
    }
}
