//! Compiles the bundled table into its four point-centroid swap-test
//! circuits and prints one of the documents in full. Each circuit angle
//! embeds two feature pairs, basis encodes the point's ID, and wires the
//! swap test onto the ancilla.
//!
//!     cargo run --example emit_circuits

use hdma::datastore::Table;
use hdma::distance::{build_pair_circuit, PairSpec};
use hdma::encode::Profile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = Table::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv").as_ref())?;
    let profile = Profile::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/default.profile").as_ref())?;
    let max_id = table.rows().iter().map(|row| row.id).max().unwrap_or(0);
    let profile = profile.with_resolved_id_width(max_id);

    let (centroids, points) = table.extract(&profile)?;
    println!("{} unassigned points x {} centroids:", points.len(), centroids.len());

    let mut sample = None;
    for point in &points {
        for centroid in &centroids {
            let spec = PairSpec { point: point.clone(), centroid: centroid.clone() };
            let circuit = build_pair_circuit(&spec, &profile)?;
            let (width, depth) = circuit.dimensions();
            println!(
                "  pair ({}, {}): {} qubits, depth {}",
                point.id, centroid.id, width, depth
            );
            sample.get_or_insert((point.id, centroid.id, circuit));
        }
    }

    if let Some((point_id, centroid_id, circuit)) = sample {
        println!("\ndocument for pair ({point_id}, {centroid_id}):\n");
        print!("{}", circuit.serialize());
    }
    Ok(())
}
