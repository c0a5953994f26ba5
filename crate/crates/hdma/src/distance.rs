//! Swap-test distance estimation and cluster assignment.
//!
//! For a (point, centroid) pair the builder lays out one circuit:
//!
//! * qubit 0: ancilla;
//! * qubit 1: the point's angle-embedded state;
//! * qubit 2: the centroid's angle-embedded state;
//! * qubits 3..3+w: the point's ID in basis encoding, most significant first.
//!
//! The unitary block is H on the ancilla, CSWAP(0; 1, 2), H again. Measuring
//! the ancilla then marks `1` with probability
//! `P = 1/2 - 1/2 |<q1|q2>|^2`, monotone in the distance between the two
//! states, while the ID qubits read back which tuple the counts belong to.
//! The classical register holds the ID in bits 0..w and the ancilla in bit w,
//! so a rendered outcome reads `ancilla` followed by the ID, e.g. `110` for
//! "marked, point 2".
//!
//! [`estimate`] turns sampled counts back into a [`DistanceEstimate`],
//! [`assign_clusters`] picks each point's nearest centroid by marked count,
//! and [`classical_assign`] is the squared-Euclidean fallback used by the
//! classical route.

use crate::datastore::{CentroidRecord, PointRecord};
use crate::encode::{self, AnglePair, FeatureVector, Profile};
use crate::qcir::{BlockTag, Instruction, QuantumCircuit};
use crate::qsim::{bitstring, CountsMap};

/// Ancilla qubit of every pair circuit.
pub const ANCILLA_QUBIT: usize = 0;
/// Qubit carrying the point state.
pub const POINT_QUBIT: usize = 1;
/// Qubit carrying the centroid state.
pub const CENTROID_QUBIT: usize = 2;
/// First ID qubit; the ID register occupies qubits adjacent above.
pub const ID_QUBIT_BASE: usize = 3;

/// One point/centroid comparison to be compiled.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec {
    pub point: PointRecord,
    pub centroid: CentroidRecord,
}

/// Result of sampling one pair circuit: how many of `shots` ancilla readouts
/// were `1`. Smaller is closer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceEstimate {
    pub point_id: u64,
    pub centroid_id: u64,
    pub marked_count: u64,
    pub shots: u64,
}

impl DistanceEstimate {
    /// Empirical marked probability.
    pub fn p_hat(&self) -> f64 {
        self.marked_count as f64 / self.shots as f64
    }
}

/// A point's final cluster label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub point_id: u64,
    pub cluster_label: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("pair (point {point_id}, centroid {centroid_id}) cannot be encoded: {reason}")]
    ProfileViolation { point_id: u64, centroid_id: u64, reason: String },
    #[error(
        "counts for point {point_id} carry id bits '{observed}', expected '{expected}' (outcome '{bitstring}')"
    )]
    IdMismatch { point_id: u64, bitstring: String, observed: String, expected: String },
    #[error("counts must carry at least one ancilla bit")]
    EmptyCounts,
    #[error("no estimate for point {point_id} against centroid {centroid_id}")]
    IncompleteComparisons { point_id: u64, centroid_id: u64 },
    #[error("estimates mix shot totals ({0} and {1}); marked counts are not comparable")]
    ShotsMismatch(u64, u64),
    #[error("no centroids to assign against")]
    NoCentroids,
}

fn pair_angles(pair: &PairSpec, profile: &Profile) -> Result<(AnglePair, AnglePair), DistanceError> {
    let violation = |reason: String| DistanceError::ProfileViolation {
        point_id: pair.point.id,
        centroid_id: pair.centroid.id,
        reason,
    };
    if pair.point.id == pair.centroid.id {
        return Err(violation("point and centroid share an id".to_string()));
    }
    for (who, f) in [("point", pair.point.features), ("centroid", pair.centroid.features)] {
        for value in [f.f1, f.f2] {
            if !(profile.feature_min..=profile.feature_max).contains(&value) {
                return Err(violation(format!(
                    "{who} feature {value} outside [{}, {}]",
                    profile.feature_min, profile.feature_max
                )));
            }
        }
    }
    let point = encode::angle_embed(pair.point.features).map_err(|e| violation(e.to_string()))?;
    let centroid =
        encode::angle_embed(pair.centroid.features).map_err(|e| violation(e.to_string()))?;
    Ok((point, centroid))
}

/// Compiles the swap-test circuit for one pair under `profile`.
///
/// The ID register width comes from the profile; when unset it is derived
/// from the pair's point ID alone, so batch callers should resolve the width
/// against the whole table first (see [`Profile::with_resolved_id_width`]).
/// The produced circuit has `3 + width` qubits, `1 + width` classical bits,
/// and carries `point_id`/`centroid_id` metadata.
pub fn build_pair_circuit(
    pair: &PairSpec,
    profile: &Profile,
) -> Result<QuantumCircuit, DistanceError> {
    let width = profile.effective_id_width(pair.point.id);
    let violation = |reason: String| DistanceError::ProfileViolation {
        point_id: pair.point.id,
        centroid_id: pair.centroid.id,
        reason,
    };
    let (point_angles, centroid_angles) = pair_angles(pair, profile)?;
    for id in [pair.point.id, pair.centroid.id] {
        if width < 64 && id >> width != 0 {
            return Err(violation(format!("id {id} does not fit in {width} bits")));
        }
    }
    let id_bits = encode::basis_encode(pair.point.id, width)
        .map_err(|e| violation(e.to_string()))?;

    let mut c = QuantumCircuit::new(ID_QUBIT_BASE + width, 1 + width);
    c.set_meta("point_id", &pair.point.id.to_string()).expect("numeric metadata");
    c.set_meta("centroid_id", &pair.centroid.id.to_string()).expect("numeric metadata");

    let encoding = [
        (POINT_QUBIT, point_angles),
        (CENTROID_QUBIT, centroid_angles),
    ];
    for (qubit, angles) in encoding {
        c.append(
            Instruction::U3 { qubit, theta: angles.theta, phi: angles.phi, lambda: 0.0 },
            BlockTag::Encoding,
        )
        .expect("encoding gates fit the register");
    }
    for (offset, &bit) in id_bits.iter().enumerate() {
        if bit {
            c.append(Instruction::X { qubit: ID_QUBIT_BASE + offset }, BlockTag::Encoding)
                .expect("id gates fit the register");
        }
    }

    c.append(Instruction::H { qubit: ANCILLA_QUBIT }, BlockTag::Unitary).expect("ancilla H");
    c.append(
        Instruction::Cswap {
            control: ANCILLA_QUBIT,
            target_a: POINT_QUBIT,
            target_b: CENTROID_QUBIT,
        },
        BlockTag::Unitary,
    )
    .expect("controlled swap");
    c.append(Instruction::H { qubit: ANCILLA_QUBIT }, BlockTag::Unitary).expect("ancilla H");

    // Ancilla lands in the top classical bit, the ID below it in MSB-first
    // order, so outcomes render as ancilla followed by the point ID.
    c.append(
        Instruction::Measure { qubit: ANCILLA_QUBIT, clbit: width },
        BlockTag::Measurement,
    )
    .expect("ancilla readout");
    for offset in 0..width {
        c.append(
            Instruction::Measure { qubit: ID_QUBIT_BASE + offset, clbit: width - 1 - offset },
            BlockTag::Measurement,
        )
        .expect("id readout");
    }
    Ok(c)
}

/// Squared overlap |<a|b>|^2 of two angle-embedded states under the
/// amplitude convention of [`encode::state_amplitudes`].
pub fn overlap_sq(a: AnglePair, b: AnglePair) -> f64 {
    let (a0, a1) = encode::state_amplitudes(a);
    let (b0, b1) = encode::state_amplitudes(b);
    (a0.conj() * b0 + a1.conj() * b1).norm_sqr()
}

/// Analytic probability that the swap-test ancilla reads 1:
/// `1/2 - 1/2 |<a|b>|^2`. Zero for identical states, 1/2 for orthogonal ones.
pub fn p_one(a: AnglePair, b: AnglePair) -> f64 {
    0.5 - 0.5 * overlap_sq(a, b)
}

/// Squared Euclidean distance between two feature vectors.
pub fn squared_distance(a: FeatureVector, b: FeatureVector) -> f64 {
    let d1 = a.f1 - b.f1;
    let d2 = a.f2 - b.f2;
    d1 * d1 + d2 * d2
}

/// Folds sampled counts into a [`DistanceEstimate`] for `pair`.
///
/// Every outcome's ID bits (all but the leading ancilla bit) must equal the
/// pair's point ID; anything else means the counts belong to a different
/// circuit and the whole batch is suspect, so this fails rather than filters.
pub fn estimate(counts: &CountsMap, pair: &PairSpec) -> Result<DistanceEstimate, DistanceError> {
    let width = counts.bit_width().ok_or(DistanceError::EmptyCounts)?;
    if width < 1 {
        return Err(DistanceError::EmptyCounts);
    }
    let id_width = width - 1;
    let expected = bitstring(pair.point.id, id_width);
    let mut marked = 0u64;
    for (bits, n) in counts.iter() {
        let (ancilla, observed) = bits.split_at(1);
        if observed != expected {
            return Err(DistanceError::IdMismatch {
                point_id: pair.point.id,
                bitstring: bits.to_string(),
                observed: observed.to_string(),
                expected: expected.clone(),
            });
        }
        if ancilla == "1" {
            marked += n;
        }
    }
    Ok(DistanceEstimate {
        point_id: pair.point.id,
        centroid_id: pair.centroid.id,
        marked_count: marked,
        shots: counts.shots(),
    })
}

fn check_uniform_shots(estimates: &[DistanceEstimate]) -> Result<(), DistanceError> {
    if let Some(first) = estimates.first() {
        for est in &estimates[1..] {
            if est.shots != first.shots {
                return Err(DistanceError::ShotsMismatch(first.shots, est.shots));
            }
        }
    }
    Ok(())
}

/// Assigns every point that appears in `estimates` to the centroid with the
/// smallest marked count, breaking ties toward the smaller centroid ID. Each
/// point needs an estimate against every centroid, and all estimates must
/// share one shot total (marked counts are only comparable at equal shots).
/// Points keep their first-appearance order.
pub fn assign_clusters(
    estimates: &[DistanceEstimate],
    centroids: &[CentroidRecord],
) -> Result<Vec<Assignment>, DistanceError> {
    if centroids.is_empty() {
        return Err(DistanceError::NoCentroids);
    }
    check_uniform_shots(estimates)?;
    let mut order: Vec<u64> = Vec::new();
    for est in estimates {
        if !order.contains(&est.point_id) {
            order.push(est.point_id);
        }
    }
    let mut by_id: Vec<&CentroidRecord> = centroids.iter().collect();
    by_id.sort_by_key(|c| c.id);

    let mut assignments = Vec::with_capacity(order.len());
    for point_id in order {
        let mut best: Option<(&CentroidRecord, u64)> = None;
        for centroid in &by_id {
            let est = estimates
                .iter()
                .find(|e| e.point_id == point_id && e.centroid_id == centroid.id)
                .ok_or(DistanceError::IncompleteComparisons {
                    point_id,
                    centroid_id: centroid.id,
                })?;
            // Strict < keeps the earlier (smaller-id) centroid on ties.
            if best.is_none() || est.marked_count < best.expect("checked").1 {
                best = Some((centroid, est.marked_count));
            }
        }
        let (winner, _) = best.expect("centroids is non-empty");
        assignments.push(Assignment {
            point_id,
            cluster_label: winner.cluster_label.clone(),
        });
    }
    Ok(assignments)
}

/// Classical fallback: nearest centroid by squared Euclidean distance over
/// the raw features, ties toward the smaller centroid ID. Produces the same
/// shape of output as the quantum route.
pub fn classical_assign(
    points: &[PointRecord],
    centroids: &[CentroidRecord],
) -> Result<Vec<Assignment>, DistanceError> {
    if centroids.is_empty() {
        return Err(DistanceError::NoCentroids);
    }
    let mut by_id: Vec<&CentroidRecord> = centroids.iter().collect();
    by_id.sort_by_key(|c| c.id);
    Ok(points
        .iter()
        .map(|point| {
            let mut best = (by_id[0], squared_distance(point.features, by_id[0].features));
            for centroid in &by_id[1..] {
                let d = squared_distance(point.features, centroid.features);
                if d < best.1 {
                    best = (centroid, d);
                }
            }
            Assignment { point_id: point.id, cluster_label: best.0.cluster_label.clone() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::Table;
    use crate::qsim;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    const TABLE_CSV: &str = "ID,Feature1,Feature2,Cluster,Role\n\
                             0,-0.5,0.5,blue,centroid\n\
                             1,0.2,-0.2,green,centroid\n\
                             2,0.15,-0.15,,point\n\
                             3,-0.45,0.45,,point\n";

    fn table() -> Table {
        Table::parse_csv(TABLE_CSV).unwrap()
    }

    fn pair(point_id: u64, centroid_id: u64) -> PairSpec {
        let t = table();
        let point = t.unassigned_points().into_iter().find(|p| p.id == point_id).unwrap();
        let centroid = t.centroids().into_iter().find(|c| c.id == centroid_id).unwrap();
        PairSpec { point, centroid }
    }

    fn resolved_profile() -> Profile {
        Profile::default().with_resolved_id_width(3)
    }

    fn angles_of(features: FeatureVector) -> AnglePair {
        encode::angle_embed(features).unwrap()
    }

    /// Independent complex arithmetic on (re, im) tuples; deliberately avoids
    /// both Complex64 and state_amplitudes so it can vouch for overlap_sq.
    fn overlap_oracle(a: AnglePair, b: AnglePair) -> f64 {
        let amp = |ang: AnglePair| {
            let (t, p) = (ang.theta / 2.0, ang.phi);
            ((t.cos(), 0.0), (p.cos() * t.sin(), p.sin() * t.sin()))
        };
        let (a0, a1) = amp(a);
        let (b0, b1) = amp(b);
        // conj(a) * b summed over both amplitudes.
        let re = a0.0 * b0.0 + a0.1 * b0.1 + a1.0 * b1.0 + a1.1 * b1.1;
        let im = a0.0 * b0.1 - a0.1 * b0.0 + a1.0 * b1.1 - a1.1 * b1.0;
        re * re + im * im
    }

    #[test]
    fn golden_document_for_point_3_against_centroid_a() {
        let circuit = build_pair_circuit(&pair(3, 0), &resolved_profile()).unwrap();
        let expected = "hqc 1\n\
                        qubits 5\n\
                        clbits 3\n\
                        meta point_id=3 centroid_id=0\n\
                        block encoding\n\
                        u3 1 0.86393797973719322 2.2776546738526 0\n\
                        u3 2 0.78539816339744828 2.3561944901923448 0\n\
                        x 3\n\
                        x 4\n\
                        block unitary\n\
                        h 0\n\
                        cswap 0 1 2\n\
                        h 0\n\
                        block measurement\n\
                        measure 0 2\n\
                        measure 3 1\n\
                        measure 4 0\n";
        assert_eq!(circuit.serialize(), expected);
        let parsed = QuantumCircuit::parse(expected).unwrap();
        assert_eq!(parsed, circuit);
        // Width 5; the critical path runs along the ancilla: h, cswap, h,
        // then its measurement.
        assert_eq!(circuit.dimensions(), (5, 4));
    }

    #[test]
    fn id_gates_follow_the_binary_expansion() {
        // Point 2 = 10b: X only on the high ID qubit.
        let c = build_pair_circuit(&pair(2, 1), &resolved_profile()).unwrap();
        let doc = c.serialize();
        assert!(doc.contains("x 3\n"));
        assert!(!doc.contains("x 4\n"));
        assert_eq!(c.meta("point_id"), Some("2"));
        assert_eq!(c.meta("centroid_id"), Some("1"));

        // A zero ID needs no X gates at all.
        let c = build_pair_circuit(
            &PairSpec {
                point: PointRecord { id: 0, features: FeatureVector::new(0.15, -0.15) },
                centroid: CentroidRecord {
                    id: 1,
                    features: FeatureVector::new(0.2, -0.2),
                    cluster_label: "green".to_string(),
                },
            },
            &resolved_profile(),
        )
        .unwrap();
        assert!(!c.serialize().contains("\nx "));
    }

    #[test]
    fn build_rejects_unencodable_pairs() {
        let profile = resolved_profile();
        let mut same = pair(3, 0);
        same.centroid.id = 3;
        assert!(matches!(
            build_pair_circuit(&same, &profile),
            Err(DistanceError::ProfileViolation { .. })
        ));

        let mut wide = pair(3, 0);
        wide.point.features.f1 = 1.5;
        assert!(matches!(
            build_pair_circuit(&wide, &profile),
            Err(DistanceError::ProfileViolation { .. })
        ));

        let narrow = Profile { id_bit_width: Some(1), ..Profile::default() };
        assert!(matches!(
            build_pair_circuit(&pair(3, 0), &narrow),
            Err(DistanceError::ProfileViolation { .. })
        ));
    }

    #[test]
    fn overlap_examples() {
        let a = angles_of(FeatureVector::new(-0.5, 0.5));
        let b = angles_of(FeatureVector::new(0.2, -0.2));
        let p2 = angles_of(FeatureVector::new(0.15, -0.15));
        let p3 = angles_of(FeatureVector::new(-0.45, 0.45));

        assert!((overlap_sq(a, a) - 1.0).abs() < 1e-12);
        // Poles of the Bloch sphere are orthogonal.
        let north = AnglePair { theta: 0.0, phi: 0.0 };
        let south = AnglePair { theta: std::f64::consts::PI, phi: 0.0 };
        assert!(overlap_sq(north, south).abs() < 1e-12);

        assert!((overlap_sq(p2, a) - 0.597091603146567).abs() < 1e-12);
        for (x, y) in [(p2, a), (p2, b), (p3, a), (p3, b)] {
            assert!((overlap_sq(x, y) - overlap_oracle(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_matches_the_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let a = angles_of(FeatureVector::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ));
            let b = angles_of(FeatureVector::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ));
            assert!((overlap_sq(a, b) - overlap_oracle(a, b)).abs() < 1e-12);
            assert!(overlap_sq(a, b) >= -1e-15 && overlap_sq(a, b) <= 1.0 + 1e-15);
            // Swapping the arguments conjugates the inner product, which
            // leaves its squared magnitude untouched.
            assert_eq!(overlap_sq(a, b), overlap_sq(b, a));
        }
    }

    #[test]
    fn p_one_examples() {
        let a = angles_of(FeatureVector::new(-0.5, 0.5));
        let b = angles_of(FeatureVector::new(0.2, -0.2));
        let p2 = angles_of(FeatureVector::new(0.15, -0.15));
        let p3 = angles_of(FeatureVector::new(-0.45, 0.45));

        assert_eq!(p_one(a, a), 0.0);
        let north = AnglePair { theta: 0.0, phi: 0.0 };
        let south = AnglePair { theta: std::f64::consts::PI, phi: 0.0 };
        assert!((p_one(north, south) - 0.5).abs() < 1e-12);

        // Near pairs sit close to 0, far pairs near 0.2.
        assert!((p_one(p2, b) - 0.0014833626302170888).abs() < 1e-12);
        assert!((p_one(p3, a) - 0.0011850448971292282).abs() < 1e-12);
        assert!((p_one(p2, a) - 0.20145419842671652).abs() < 1e-12);
        assert!((p_one(p3, b) - 0.20570631099469028).abs() < 1e-12);
    }

    #[test]
    fn simulated_marginal_matches_p_one_on_the_table_pairs() {
        let profile = resolved_profile();
        for (pid, cid) in [(2u64, 0u64), (2, 1), (3, 0), (3, 1)] {
            let spec = pair(pid, cid);
            let circuit = build_pair_circuit(&spec, &profile).unwrap();
            let state = qsim::run_statevector(&circuit).unwrap();
            let dist = qsim::marginal_probability(&state, &circuit.measure_map()).unwrap();
            let marked: f64 = dist
                .iter()
                .filter(|(bits, _)| bits.starts_with('1'))
                .map(|(_, p)| p)
                .sum();
            let analytic = p_one(
                angles_of(spec.point.features),
                angles_of(spec.centroid.features),
            );
            assert!(
                (marked - analytic).abs() < 1e-9,
                "pair ({pid},{cid}): sampled marginal {marked} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn simulated_marginal_matches_p_one_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let profile = Profile { id_bit_width: Some(2), ..Profile::default() };
        for _ in 0..200 {
            let point = PointRecord {
                id: rng.random_range(0..4u64),
                features: FeatureVector::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ),
            };
            let mut centroid_id = rng.random_range(0..4u64);
            if centroid_id == point.id {
                centroid_id = (centroid_id + 1) % 4;
            }
            let centroid = CentroidRecord {
                id: centroid_id,
                features: FeatureVector::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ),
                cluster_label: "c".to_string(),
            };
            let spec = PairSpec { point, centroid };
            let circuit = build_pair_circuit(&spec, &profile).unwrap();
            let state = qsim::run_statevector(&circuit).unwrap();
            let dist = qsim::marginal_probability(&state, &circuit.measure_map()).unwrap();
            let marked: f64 = dist
                .iter()
                .filter(|(bits, _)| bits.starts_with('1'))
                .map(|(_, p)| p)
                .sum();
            let analytic = p_one(
                angles_of(spec.point.features),
                angles_of(spec.centroid.features),
            );
            assert!((marked - analytic).abs() < 1e-9);
        }
    }

    #[test]
    fn swapping_point_and_centroid_qubits_leaves_the_marked_mass() {
        // The swap test is symmetric in its two states; loading them onto
        // swapped qubits must not change the ancilla statistics.
        let profile = resolved_profile();
        let spec = pair(2, 0);
        let mut swapped = spec.clone();
        std::mem::swap(&mut swapped.point.features, &mut swapped.centroid.features);
        let pa = marked_mass(&spec, &profile);
        let pb = marked_mass(&swapped, &profile);
        assert!((pa - pb).abs() < 1e-12);
    }

    fn marked_mass(spec: &PairSpec, profile: &Profile) -> f64 {
        let circuit = build_pair_circuit(spec, profile).unwrap();
        let state = qsim::run_statevector(&circuit).unwrap();
        qsim::marginal_probability(&state, &circuit.measure_map())
            .unwrap()
            .iter()
            .filter(|(bits, _)| bits.starts_with('1'))
            .map(|(_, p)| p)
            .sum()
    }

    #[test]
    fn estimate_splits_marked_from_unmarked() {
        let mut counts = BTreeMap::new();
        counts.insert("010".to_string(), 957u64);
        counts.insert("110".to_string(), 43u64);
        let est = estimate(&CountsMap::new(counts), &pair(2, 0)).unwrap();
        assert_eq!(est.marked_count, 43);
        assert_eq!(est.shots, 1000);
        assert!((est.p_hat() - 0.043).abs() < 1e-12);

        let mut zero = BTreeMap::new();
        zero.insert("011".to_string(), 1000u64);
        let est = estimate(&CountsMap::new(zero), &pair(3, 1)).unwrap();
        assert_eq!(est.marked_count, 0);
        assert_eq!(est.p_hat(), 0.0);
    }

    #[test]
    fn estimate_rejects_foreign_id_bits() {
        let mut counts = BTreeMap::new();
        counts.insert("100".to_string(), 1000u64);
        let err = estimate(&CountsMap::new(counts), &pair(3, 0)).unwrap_err();
        assert_eq!(
            err,
            DistanceError::IdMismatch {
                point_id: 3,
                bitstring: "100".to_string(),
                observed: "00".to_string(),
                expected: "11".to_string(),
            }
        );
    }

    #[test]
    fn estimated_ids_always_match_on_sampled_counts() {
        let profile = resolved_profile();
        for (pid, cid) in [(2u64, 0u64), (2, 1), (3, 0), (3, 1)] {
            for seed in [0u64, 1, 2, 77, 12345] {
                let spec = pair(pid, cid);
                let circuit = build_pair_circuit(&spec, &profile).unwrap();
                let counts = qsim::sample_counts(&circuit, 1000, seed).unwrap();
                let est = estimate(&counts, &spec).unwrap();
                assert_eq!(est.shots, 1000);
                assert_eq!(est.point_id, pid);
                assert_eq!(est.centroid_id, cid);
            }
        }
    }

    fn centroids() -> Vec<CentroidRecord> {
        table().centroids()
    }

    #[test]
    fn assign_picks_the_smaller_marked_count() {
        let estimates = vec![
            DistanceEstimate { point_id: 2, centroid_id: 0, marked_count: 201, shots: 1000 },
            DistanceEstimate { point_id: 2, centroid_id: 1, marked_count: 2, shots: 1000 },
            DistanceEstimate { point_id: 3, centroid_id: 0, marked_count: 1, shots: 1000 },
            DistanceEstimate { point_id: 3, centroid_id: 1, marked_count: 198, shots: 1000 },
        ];
        let assignments = assign_clusters(&estimates, &centroids()).unwrap();
        assert_eq!(
            assignments,
            vec![
                Assignment { point_id: 2, cluster_label: "green".to_string() },
                Assignment { point_id: 3, cluster_label: "blue".to_string() },
            ]
        );
    }

    #[test]
    fn assign_breaks_ties_toward_the_smaller_centroid_id() {
        let estimates = vec![
            DistanceEstimate { point_id: 2, centroid_id: 1, marked_count: 5, shots: 100 },
            DistanceEstimate { point_id: 2, centroid_id: 0, marked_count: 5, shots: 100 },
        ];
        let assignments = assign_clusters(&estimates, &centroids()).unwrap();
        assert_eq!(assignments[0].cluster_label, "blue");
    }

    #[test]
    fn assign_requires_complete_uniform_estimates() {
        let estimates = vec![DistanceEstimate {
            point_id: 2,
            centroid_id: 0,
            marked_count: 5,
            shots: 100,
        }];
        assert_eq!(
            assign_clusters(&estimates, &centroids()).unwrap_err(),
            DistanceError::IncompleteComparisons { point_id: 2, centroid_id: 1 }
        );
        let mixed = vec![
            DistanceEstimate { point_id: 2, centroid_id: 0, marked_count: 5, shots: 100 },
            DistanceEstimate { point_id: 2, centroid_id: 1, marked_count: 5, shots: 200 },
        ];
        assert_eq!(
            assign_clusters(&mixed, &centroids()).unwrap_err(),
            DistanceError::ShotsMismatch(100, 200)
        );
        assert_eq!(assign_clusters(&[], &[]).unwrap_err(), DistanceError::NoCentroids);
        // No estimates but centroids present: nothing to assign.
        assert_eq!(assign_clusters(&[], &centroids()).unwrap(), vec![]);
    }

    #[test]
    fn classical_assignment_matches_hand_computed_distances() {
        let t = table();
        let points = t.unassigned_points();
        let cents = t.centroids();
        // Squared distances for point 2: 0.845 to centroid 0, 0.005 to 1.
        assert!((squared_distance(points[0].features, cents[0].features) - 0.845).abs() < 1e-12);
        assert!((squared_distance(points[0].features, cents[1].features) - 0.005).abs() < 1e-12);
        assert!((squared_distance(points[1].features, cents[0].features) - 0.005).abs() < 1e-12);
        assert!((squared_distance(points[1].features, cents[1].features) - 0.845).abs() < 1e-12);
        let assignments = classical_assign(&points, &cents).unwrap();
        assert_eq!(
            assignments,
            vec![
                Assignment { point_id: 2, cluster_label: "green".to_string() },
                Assignment { point_id: 3, cluster_label: "blue".to_string() },
            ]
        );
        assert!(classical_assign(&points, &[]).is_err());
    }

    #[test]
    fn quantum_and_classical_agree_on_the_bundled_table() {
        let t = table();
        let profile = Profile::default().with_resolved_id_width(3);
        let points = t.unassigned_points();
        let cents = t.centroids();
        let mut estimates = Vec::new();
        for point in &points {
            for centroid in &cents {
                let spec = PairSpec { point: point.clone(), centroid: centroid.clone() };
                let circuit = build_pair_circuit(&spec, &profile).unwrap();
                let counts = qsim::sample_counts(&circuit, 1000, 42).unwrap();
                estimates.push(estimate(&counts, &spec).unwrap());
            }
        }
        let quantum = assign_clusters(&estimates, &cents).unwrap();
        let classical = classical_assign(&points, &cents).unwrap();
        assert_eq!(quantum, classical);
    }

    #[test]
    fn argmin_is_stable_across_seeds_when_the_gap_is_clear() {
        // Synthetic pair of centroids whose analytic marked probabilities
        // differ by more than 0.05; with 1000 shots the sampled argmin should
        // essentially never flip. Checked across 1000 seeds.
        let point = PointRecord { id: 2, features: FeatureVector::new(0.15, -0.15) };
        let near = CentroidRecord {
            id: 1,
            features: FeatureVector::new(0.2, -0.2),
            cluster_label: "near".to_string(),
        };
        let far = CentroidRecord {
            id: 0,
            features: FeatureVector::new(-0.5, 0.5),
            cluster_label: "far".to_string(),
        };
        let profile = Profile { id_bit_width: Some(2), ..Profile::default() };
        let gap = p_one(angles_of(point.features), angles_of(far.features))
            - p_one(angles_of(point.features), angles_of(near.features));
        assert!(gap > 0.05);

        let mut flips = 0u32;
        for seed in 0..1000u64 {
            let mut counts = Vec::new();
            for centroid in [&far, &near] {
                let spec = PairSpec { point: point.clone(), centroid: centroid.clone() };
                let circuit = build_pair_circuit(&spec, &profile).unwrap();
                let sampled = qsim::sample_counts(&circuit, 1000, seed ^ centroid.id).unwrap();
                counts.push(estimate(&sampled, &spec).unwrap());
            }
            let assignment =
                assign_clusters(&counts, &[far.clone(), near.clone()]).unwrap();
            if assignment[0].cluster_label != "near" {
                flips += 1;
            }
        }
        assert_eq!(flips, 0, "argmin flipped {flips} times out of 1000 seeds");
    }
}
