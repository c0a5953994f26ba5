//! Round-trips a circuit through its text form and samples it: serialize,
//! parse back, run the statevector, draw seeded shots, and show that the
//! ID register tags every outcome while the ancilla carries the distance
//! signal.
//!
//!     cargo run --example simulate_counts

use hdma::datastore::Table;
use hdma::distance::{build_pair_circuit, estimate, PairSpec};
use hdma::encode::Profile;
use hdma::qcir::QuantumCircuit;
use hdma::qsim;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = Table::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv").as_ref())?;
    let profile = Profile::default().with_resolved_id_width(3);
    let (centroids, points) = table.extract(&profile)?;

    // Point 2 against the green centroid: the near pair.
    let spec = PairSpec { point: points[0].clone(), centroid: centroids[1].clone() };
    let circuit = build_pair_circuit(&spec, &profile)?;

    let text = circuit.serialize();
    let parsed = QuantumCircuit::parse(&text)?;
    assert_eq!(parsed.serialize(), text, "the text form is the circuit");

    for (shots, seed) in [(100u64, 1u64), (1000, 1), (1000, 2), (10000, 3)] {
        let counts = qsim::sample_counts(&parsed, shots, seed)?;
        let distance = estimate(&counts, &spec)?;
        println!(
            "shots {:>5} seed {}: counts {:?} -> {} marked",
            shots,
            seed,
            counts.iter().collect::<Vec<_>>(),
            distance.marked_count
        );
    }

    println!("\nevery outcome ends in the point's ID bits ({})", spec.point.id);
    Ok(())
}
