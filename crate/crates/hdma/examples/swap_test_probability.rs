//! The swap test in isolation: P(ancilla = 1) = (1 - |<a|b>|^2) / 2.
//! Sweeps one point toward a fixed centroid and compares the analytic
//! marked probability, the simulator's exact marginal, and a sampled
//! frequency at 10000 shots.
//!
//!     cargo run --example swap_test_probability

use hdma::datastore::{CentroidRecord, PointRecord};
use hdma::distance::{build_pair_circuit, overlap_sq, p_one, PairSpec};
use hdma::encode::{angle_embed, FeatureVector, Profile};
use hdma::qsim;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = Profile::default().with_resolved_id_width(3);
    let centroid = CentroidRecord {
        id: 0,
        features: FeatureVector { f1: -0.5, f2: 0.5 },
        cluster_label: "blue".to_string(),
    };

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "f1", "overlap^2", "analytic", "marginal", "sampled");
    for step in 0..=8 {
        let f1 = -0.5 + 0.125 * step as f64;
        let point = PointRecord { id: 2, features: FeatureVector { f1, f2: 0.5 } };
        let spec = PairSpec { point: point.clone(), centroid: centroid.clone() };

        let a = angle_embed(point.features)?;
        let b = angle_embed(centroid.features)?;
        let analytic = p_one(a, b);

        let circuit = build_pair_circuit(&spec, &profile)?;
        let state = qsim::run_statevector(&circuit)?;
        let marginal = qsim::marginal_probability(&state, &circuit.measure_map())?
            .iter()
            .filter(|(bits, _)| bits.starts_with('1'))
            .map(|(_, p)| p)
            .sum::<f64>()
            .max(0.0);

        let shots = 10000u64;
        let counts = qsim::sample_counts(&circuit, shots, 42)?;
        let marked: u64 =
            counts.iter().filter(|(bits, _)| bits.starts_with('1')).map(|(_, n)| n).sum();

        println!(
            "{:>6.3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            f1,
            overlap_sq(a, b),
            analytic,
            marginal,
            marked as f64 / shots as f64
        );
    }

    println!("\nidentical states never mark the ancilla; orthogonal ones mark half the shots");
    Ok(())
}
