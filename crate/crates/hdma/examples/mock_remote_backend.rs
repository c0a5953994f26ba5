//! The remote backend adapter: an in-process HTTP job service wraps the
//! simulator behind submit/status/result endpoints, and the client drives
//! the job lifecycle over real sockets. Counts match the local simulator
//! byte for byte because the seed rides inside the circuit document.
//!
//!     cargo run --example mock_remote_backend

use std::sync::Arc;
use std::time::Duration;

use hdma::datastore::Table;
use hdma::distance::{build_pair_circuit, PairSpec};
use hdma::encode::Profile;
use hdma::orchestra::{
    BackendAdapter, HttpBackendClient, JobStatus, LocalSimBackend, MockRemoteBackend,
    MockRemoteServer,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = MockRemoteServer::start(Arc::new(MockRemoteBackend::new(3)))?;
    println!("mock remote backend listening on http://{}", server.addr());
    let remote = HttpBackendClient::new(server.addr());

    // Compile one pair circuit and pin shots and seed in its metadata.
    let table = Table::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv").as_ref())?;
    let profile = Profile::default().with_resolved_id_width(3);
    let (centroids, points) = table.extract(&profile)?;
    let spec = PairSpec { point: points[0].clone(), centroid: centroids[0].clone() };
    let mut circuit = build_pair_circuit(&spec, &profile)?;
    circuit.set_meta("shots", "1000")?;
    circuit.set_meta("seed", "7")?;
    let text = circuit.serialize();

    let job_id = remote.submit_job(&text)?;
    println!("submitted job {job_id}");
    loop {
        let status = remote.job_status(&job_id)?;
        println!("  status: {}", status.name());
        match status {
            JobStatus::Done => break,
            JobStatus::Failed => return Err("job failed".into()),
            _ => std::thread::sleep(Duration::from_millis(20)),
        }
    }
    let remote_counts = remote.job_result(&job_id)?;
    println!("remote counts:\n{}", remote_counts.to_lines());

    let local = LocalSimBackend::new();
    let local_counts = local.job_result(&local.submit_job(&text)?)?;
    println!("local counts match: {}", remote_counts == local_counts);
    Ok(())
}
