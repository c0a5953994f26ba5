//! Auto-regeneration: a watcher polls the table's change token and reruns
//! the workflow whenever the file moves. A background thread plays the
//! editor, blanking an assignment mid-watch; the watcher notices, reruns,
//! and the write-back restores the assignment.
//!
//!     cargo run --example watch_regeneration

use std::time::Duration;

use hdma::datastore::Table;
use hdma::orchestra::{
    watch, Orchestra, OrchestraConfig, ProblemRequest, RunParams, Sinks, WatchOutcome,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("table1.csv");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv"), &data)?;

    let orchestra = Orchestra::start(OrchestraConfig::local());
    let problem = ProblemRequest::cluster_assignment(&data);
    let params = RunParams::default().with_seed(7).with_sinks(Sinks::Datastore);

    // First pass assigns both points.
    orchestra.run_workflow(problem.clone(), params.clone())?;
    println!("initial token: {}", Table::load(&data)?.change_token());

    // Someone edits the table 60ms from now: point 3 loses its cluster.
    let editor = {
        let data = data.clone();
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(60));
            let mut rows = Table::load(&data).expect("load for edit").rows().to_vec();
            rows.iter_mut().find(|row| row.id == 3).expect("row 3").cluster = None;
            let table = Table::new(rows).expect("rebuild");
            table.persist(&data).expect("persist edit");
            println!("editor: unassigned point 3, token now {}", table.change_token());
        })
    };

    let reruns = watch(
        &orchestra,
        &problem,
        &params,
        Duration::from_millis(20),
        Some(15),
        |tick, outcome| {
            if let WatchOutcome::Reran { correlation_id } = outcome {
                println!("tick {tick}: change detected, reran workflow {correlation_id}");
            }
        },
    )?;
    editor.join().expect("editor thread");

    println!("reruns: {reruns}");
    println!("final token: {}", Table::load(&data)?.change_token());
    println!("\nfinal table:\n{}", std::fs::read_to_string(&data)?);
    Ok(())
}
