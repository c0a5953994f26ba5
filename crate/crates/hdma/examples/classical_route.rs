//! The decision stage falls back to plain Euclidean assignment whenever the
//! profile rules the table out for encoding. Here a zero-point budget forces
//! the classical route; the write-back still happens, just without circuits.
//!
//!     cargo run --example classical_route

use hdma::orchestra::{Orchestra, OrchestraConfig, ProblemRequest, RunParams, Sinks};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("table1.csv");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv"), &data)?;

    // max_points=0 means "never send anything to the quantum pipeline".
    let profile = dir.path().join("strict.profile");
    std::fs::write(&profile, "max_points=0\nshots=1000\n")?;

    let orchestra = Orchestra::start(OrchestraConfig::local());
    let outcome = orchestra.run_workflow(
        ProblemRequest::cluster_assignment(&data).with_profile(&profile),
        RunParams::default().with_sinks(Sinks::Both),
    )?;

    println!("route: {}", outcome.route);
    println!("jobs submitted: {}", outcome.jobs.len());
    for assignment in &outcome.assignments {
        println!("point {} joins cluster {}", assignment.point_id, assignment.cluster_label);
    }
    let kinds: Vec<&str> =
        orchestra.trace().kinds_for(outcome.correlation_id).iter().map(|k| k.label()).collect();
    println!("message trace: {}", kinds.join(" -> "));

    println!("\ntable after write-back:\n{}", std::fs::read_to_string(&data)?);
    Ok(())
}
