//! The whole round trip: load the bundled table, route the problem, compile
//! and execute the pair circuits, and write the cluster assignments back.
//!
//!     cargo run --example end_to_end

use std::sync::Arc;

use hdma::orchestra::{Orchestra, OrchestraConfig, ProblemRequest, RunParams, Sinks};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Work on a scratch copy: the datastore sink rewrites the file.
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("table1.csv");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv"), &data)?;

    let orchestra: Arc<Orchestra> = Orchestra::start(OrchestraConfig::local());
    let outcome = orchestra.run_workflow(
        ProblemRequest::cluster_assignment(&data),
        RunParams::default().with_seed(7).with_sinks(Sinks::Both),
    )?;

    println!("route: {}", outcome.route);
    for estimate in &outcome.estimates {
        println!(
            "point {} vs centroid {}: {} of {} shots marked (p ~ {:.3})",
            estimate.point_id,
            estimate.centroid_id,
            estimate.marked_count,
            estimate.shots,
            estimate.p_hat()
        );
    }
    for assignment in &outcome.assignments {
        println!("point {} joins cluster {}", assignment.point_id, assignment.cluster_label);
    }

    let kinds: Vec<&str> =
        orchestra.trace().kinds_for(outcome.correlation_id).iter().map(|k| k.label()).collect();
    println!("message trace: {}", kinds.join(" -> "));

    println!("\ntable after write-back:\n{}", std::fs::read_to_string(&data)?);
    Ok(())
}
