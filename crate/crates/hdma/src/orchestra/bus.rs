//! In-process message bus.
//!
//! Topics are mpsc channels, one per spoke service; the application side is
//! routed per correlation id so each workflow coordinator only sees its own
//! traffic. Publishing assigns a fresh message id, records exactly one trace
//! event, stores the envelope in the delivery history, and clones it to every
//! recipient. [`Bus::redeliver`] re-sends a recorded envelope without tracing
//! it, which is how tests exercise the at-least-once contract: handlers
//! de-duplicate on message id, so redelivery must never change state.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Mutex;

use super::{
    CorrelationId, DataSet, MessageKind, MsgId, ProblemRequest, ResultNotice, Route, RunParams,
    ServiceId, Sinks, TraceLog,
};
use crate::datastore::{CentroidRecord, PointRecord, Table};
use crate::distance::Assignment;
use crate::encode::Profile;
use crate::orchestra::backend::JobRecord;
use std::path::PathBuf;

/// Message body. Each kind of message carries one variant; handlers ignore
/// payloads they do not understand.
#[derive(Debug, Clone)]
pub enum Payload {
    /// M1: the problem plus the run parameters that accompany it.
    Problem { problem: ProblemRequest, params: RunParams },
    /// M1r: the chosen route.
    Decision { route: Route },
    /// M2: where to find the table and profile.
    Extract { data_path: PathBuf, profile_path: Option<PathBuf> },
    /// M2r: extracted records plus the table snapshot.
    DataSet(DataSet),
    /// M3: records to compile.
    CircuitGen { centroids: Vec<CentroidRecord>, points: Vec<PointRecord>, profile: Profile },
    /// M3r: serialized circuit documents, one per pair.
    CircuitBatch { circuit_texts: Vec<String> },
    /// M4: circuits to run plus everything the result side needs later.
    Submit {
        circuit_texts: Vec<String>,
        shots: u64,
        seed: u64,
        sinks: Sinks,
        centroids: Vec<CentroidRecord>,
        points: Vec<PointRecord>,
        data_path: PathBuf,
    },
    /// M6: submitted jobs to watch, with the same pass-through context.
    Watch {
        jobs: Vec<JobRecord>,
        sinks: Sinks,
        centroids: Vec<CentroidRecord>,
        points: Vec<PointRecord>,
        data_path: PathBuf,
    },
    /// M8: the result notice.
    Result(ResultNotice),
    /// M9: classical-route assignments for the data service.
    Classical { data_path: PathBuf, assignments: Vec<Assignment>, sinks: Sinks },
}

/// One message instance. Redelivered envelopes keep their message id.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub msg_id: MsgId,
    pub correlation_id: CorrelationId,
    pub from: ServiceId,
    pub kind: MessageKind,
    pub payload: Payload,
}

/// What a spoke service receives on its topic.
#[derive(Debug)]
pub enum Delivery {
    Envelope(Envelope),
    /// Orderly shutdown marker; the service loop exits.
    Stop,
}

/// Events delivered to a workflow coordinator. `Message` wraps ordinary bus
/// envelopes; the rest is untraced plumbing (completion hand-off, write-back
/// acknowledgement, failure notices).
#[derive(Debug)]
pub enum AppEvent {
    Message(Envelope),
    /// Result manager finished; carries the notice regardless of sinks.
    Completed { notice: ResultNotice },
    /// Data service persisted a write-back; carries the updated table.
    SinkApplied { table: Table },
    /// Some service could not do its part.
    Failed { stage: ServiceId, reason: String },
}

pub struct Bus {
    topics: Mutex<HashMap<ServiceId, Sender<Delivery>>>,
    app_routes: Mutex<HashMap<CorrelationId, Sender<AppEvent>>>,
    history: Mutex<Vec<(Envelope, Vec<ServiceId>)>>,
    trace: TraceLog,
    next_msg: AtomicU64,
    next_correlation: AtomicU64,
}

impl Bus {
    pub fn new() -> Self {
        Bus {
            topics: Mutex::new(HashMap::new()),
            app_routes: Mutex::new(HashMap::new()),
            history: Mutex::new(Vec::new()),
            trace: TraceLog::new(),
            next_msg: AtomicU64::new(1),
            next_correlation: AtomicU64::new(1),
        }
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn fresh_correlation(&self) -> CorrelationId {
        CorrelationId(self.next_correlation.fetch_add(1, Ordering::Relaxed))
    }

    /// Registers a spoke service's topic.
    pub fn register_topic(&self, service: ServiceId, sender: Sender<Delivery>) {
        self.topics.lock().expect("topics lock").insert(service, sender);
    }

    /// Registers the coordinator channel for one workflow.
    pub fn register_application(&self, correlation_id: CorrelationId, sender: Sender<AppEvent>) {
        self.app_routes.lock().expect("routes lock").insert(correlation_id, sender);
    }

    /// Drops a workflow's coordinator channel; later messages for it are
    /// discarded, which is the correct fate for stragglers and duplicates.
    pub fn unregister_application(&self, correlation_id: CorrelationId) {
        self.app_routes.lock().expect("routes lock").remove(&correlation_id);
    }

    /// Publishes one logical message to `recipients`: one trace event, one
    /// history entry, one clone per recipient. Returns whether every
    /// recipient currently accepted delivery (a missing or closed topic
    /// counts as not delivered; at-least-once semantics make this advisory).
    pub fn publish(
        &self,
        from: ServiceId,
        recipients: &[ServiceId],
        correlation_id: CorrelationId,
        kind: MessageKind,
        payload: Payload,
    ) -> (Envelope, bool) {
        let envelope = Envelope {
            msg_id: MsgId(self.next_msg.fetch_add(1, Ordering::Relaxed)),
            correlation_id,
            from,
            kind,
            payload,
        };
        self.trace.record(correlation_id, from, kind);
        self.history
            .lock()
            .expect("history lock")
            .push((envelope.clone(), recipients.to_vec()));
        let mut all_delivered = true;
        for &recipient in recipients {
            all_delivered &= self.deliver(&envelope, recipient);
        }
        (envelope, all_delivered)
    }

    /// Re-sends a recorded envelope to one recipient without tracing it.
    /// Duplicate suppression is the receiver's job.
    pub fn redeliver(&self, envelope: &Envelope, recipient: ServiceId) -> bool {
        self.deliver(envelope, recipient)
    }

    fn deliver(&self, envelope: &Envelope, recipient: ServiceId) -> bool {
        if recipient == ServiceId::Application {
            let routes = self.app_routes.lock().expect("routes lock");
            match routes.get(&envelope.correlation_id) {
                Some(sender) => sender.send(AppEvent::Message(envelope.clone())).is_ok(),
                None => false,
            }
        } else {
            let topics = self.topics.lock().expect("topics lock");
            match topics.get(&recipient) {
                Some(sender) => sender.send(Delivery::Envelope(envelope.clone())).is_ok(),
                None => false,
            }
        }
    }

    /// Sends untraced plumbing (completion, acks, failures) to a workflow's
    /// coordinator.
    pub fn notify_application(&self, correlation_id: CorrelationId, event: AppEvent) -> bool {
        let routes = self.app_routes.lock().expect("routes lock");
        match routes.get(&correlation_id) {
            Some(sender) => sender.send(event).is_ok(),
            None => false,
        }
    }

    /// Reports a stage failure to the workflow coordinator.
    pub fn fail(&self, correlation_id: CorrelationId, stage: ServiceId, reason: String) {
        self.notify_application(correlation_id, AppEvent::Failed { stage, reason });
    }

    /// Every published envelope with its recipient list, in publish order.
    pub fn history(&self) -> Vec<(Envelope, Vec<ServiceId>)> {
        self.history.lock().expect("history lock").clone()
    }

    /// Whether a topic is currently registered and open.
    pub fn topic_available(&self, service: ServiceId) -> bool {
        self.topics.lock().expect("topics lock").contains_key(&service)
    }

    /// Sends `Stop` to every topic and forgets them. Service loops drain
    /// their queues and exit.
    pub fn shutdown_topics(&self) {
        let mut topics = self.topics.lock().expect("topics lock");
        for (_, sender) in topics.drain() {
            let _ = sender.send(Delivery::Stop);
        }
    }
}

impl Default for Bus {
    fn default() -> Self {
        Bus::new()
    }
}
