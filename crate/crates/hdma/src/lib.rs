//! Hybrid quantum-classical data management.
//!
//! This crate wires a small relational table store to a gate-level quantum
//! toolchain. Rows are extracted from CSV, compiled into swap-test circuits
//! (angle embedding for features, basis encoding for tuple IDs), executed on a
//! pluggable backend, and the resulting distance estimates flow back into the
//! datastore as cluster assignments. A set of asynchronously communicating
//! services choreographs the whole round trip; a decision stage routes each
//! problem to the quantum pipeline or to a classical fallback.
//!
//! The modules mirror the pipeline stages:
//!
//! * [`qcir`] - circuit representation plus the `hqc` text format.
//! * [`qsim`] - statevector simulation, marginals, seeded sampling, and a
//!   brute-force matrix oracle used to cross-check the simulator.
//! * [`encode`] - feature-to-angle and ID-to-basis encodings, profiles, and
//!   profile validation.
//! * [`datastore`] - the CSV table store with change tokens.
//! * [`distance`] - swap-test circuit construction, analytic overlap math,
//!   count post-processing, and cluster assignment (quantum and classical).
//! * [`orchestra`] - the message bus, services, backend adapters, workflow
//!   driver, and the HTTP facades.
//! * [`cli`] - the `hdma` command line front end.
//!
//! The `examples/` directory is the guided tour: `end_to_end` runs the full
//! quantum route, `classical_route` forces the fallback, `emit_circuits` and
//! `simulate_counts` exercise the circuit toolchain directly,
//! `swap_test_probability` compares sampled against analytic probabilities,
//! `mock_remote_backend` and `service_facade` show the remote adapters, and
//! `watch_regeneration` demonstrates change-token driven reruns.

pub mod cli;
pub mod datastore;
pub mod distance;
pub mod encode;
pub mod orchestra;
pub mod qcir;
pub mod qsim;

pub use datastore::Table;
pub use distance::{Assignment, DistanceEstimate, PairSpec};
pub use encode::Profile;
pub use orchestra::{Orchestra, OrchestraConfig, ProblemRequest, Route, RunParams};
pub use qcir::QuantumCircuit;
pub use qsim::CountsMap;
