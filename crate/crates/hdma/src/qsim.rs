//! Embedded statevector simulator.
//!
//! Qubit `k` is the k-th least significant bit of the amplitude index, so
//! amplitude `amps[i]` belongs to the basis state whose bit `k` is
//! `(i >> k) & 1`. Bitstrings rendered for users put the highest classical
//! bit leftmost: outcome `c[n-1] ... c[1] c[0]`.
//!
//! Three entry points matter:
//!
//! * [`run_statevector`] evolves |0...0> through the gate list (measurements
//!   are ignored at this stage).
//! * [`marginal_probability`] reduces a state to outcome probabilities over a
//!   measurement map.
//! * [`sample_counts`] draws seeded multinomial shot counts from that
//!   distribution; identical circuit, shots and seed give identical counts on
//!   every run.
//!
//! [`bruteforce_statevector`] recomputes small circuits by building each gate
//! as a full 2^n x 2^n matrix via Kronecker products and multiplying it out.
//! It shares no gate-application code with `run_statevector` and exists
//! purely to cross-check it.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qcir::{Instruction, QuantumCircuit};

/// Upper bound for the sparse simulator; 2^24 amplitudes keeps a run inside a
/// few hundred megabytes.
pub const MAX_QUBITS: usize = 24;

/// Upper bound for the dense matrix oracle, which materializes 2^n x 2^n
/// matrices.
pub const BRUTEFORCE_MAX_QUBITS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("circuit uses {requested} qubits, simulator caps at {cap}")]
    TooManyQubits { requested: usize, cap: usize },
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} appears twice in the measurement map")]
    DuplicateQubit(usize),
    #[error("classical bit {0} appears twice in the measurement map")]
    DuplicateClbit(usize),
    #[error("circuit has no measurements to sample")]
    NoMeasurements,
    #[error("shot count must be at least 1")]
    ZeroShots,
}

/// Dense complex amplitudes over `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::ZERO; 1usize << num_qubits];
        amps[0] = Complex64::ONE;
        StateVector { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Multinomial shot counts keyed by rendered bitstring. Zero-count outcomes
/// are omitted; the counts always sum to the shot total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsMap {
    counts: BTreeMap<String, u64>,
    shots: u64,
}

impl CountsMap {
    pub fn new(counts: BTreeMap<String, u64>) -> Self {
        let counts: BTreeMap<String, u64> =
            counts.into_iter().filter(|&(_, n)| n > 0).collect();
        let shots = counts.values().sum();
        CountsMap { counts, shots }
    }

    pub fn get(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Width of the recorded bitstrings, if any outcome was recorded.
    pub fn bit_width(&self) -> Option<usize> {
        self.counts.keys().next().map(|k| k.len())
    }

    /// Renders one `bitstring count` line per outcome, sorted by bitstring.
    /// This is the payload format of the remote backend's result endpoint.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (bits, n) in &self.counts {
            out.push_str(bits);
            out.push(' ');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the [`CountsMap::to_lines`] format. Returns `None` on any
    /// malformed line.
    pub fn parse_lines(text: &str) -> Option<Self> {
        let mut counts = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (bits, n) = line.split_once(' ')?;
            if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
                return None;
            }
            let n: u64 = n.trim().parse().ok()?;
            if counts.insert(bits.to_string(), n).is_some() {
                return None;
            }
        }
        Some(CountsMap::new(counts))
    }
}

/// Renders `value` as a bitstring of `width` bits, most significant first.
pub fn bitstring(value: u64, width: usize) -> String {
    (0..width).rev().map(|b| if value >> b & 1 == 1 { '1' } else { '0' }).collect()
}

fn exp_i(angle: f64) -> Complex64 {
    Complex64::new(angle.cos(), angle.sin())
}

/// U3(theta, phi, lambda) as a 2x2 matrix:
/// rows [cos(t/2), -e^(i lambda) sin(t/2)] and
/// [e^(i phi) sin(t/2), e^(i (phi+lambda)) cos(t/2)].
fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> [[Complex64; 2]; 2] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    [
        [Complex64::new(c, 0.0), -exp_i(lambda) * s],
        [exp_i(phi) * s, exp_i(phi + lambda) * c],
    ]
}

const X_MATRIX: [[Complex64; 2]; 2] = [
    [Complex64::ZERO, Complex64::ONE],
    [Complex64::ONE, Complex64::ZERO],
];

fn h_matrix() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn apply_single(amps: &mut [Complex64], qubit: usize, m: &[[Complex64; 2]; 2]) {
    let bit = 1usize << qubit;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_cswap(amps: &mut [Complex64], control: usize, a: usize, b: usize) {
    let (cb, ab, bb) = (1usize << control, 1usize << a, 1usize << b);
    for i in 0..amps.len() {
        // Swap the a=1,b=0 slice with the a=0,b=1 slice where the control is
        // set; the other slices are fixed points of the permutation.
        if i & cb != 0 && i & ab != 0 && i & bb == 0 {
            amps.swap(i, i ^ ab ^ bb);
        }
    }
}

/// Evolves |0...0> through the circuit's gates. `measure` instructions carry
/// no unitary action and are skipped; use [`marginal_probability`] or
/// [`sample_counts`] to read them out.
pub fn run_statevector(circuit: &QuantumCircuit) -> Result<StateVector, SimError> {
    let n = circuit.num_qubits();
    if n > MAX_QUBITS {
        return Err(SimError::TooManyQubits { requested: n, cap: MAX_QUBITS });
    }
    let mut state = StateVector::zero_state(n);
    for &(instr, _) in circuit.instructions() {
        match instr {
            Instruction::U3 { qubit, theta, phi, lambda } => {
                apply_single(&mut state.amps, qubit, &u3_matrix(theta, phi, lambda))
            }
            Instruction::X { qubit } => apply_single(&mut state.amps, qubit, &X_MATRIX),
            Instruction::H { qubit } => apply_single(&mut state.amps, qubit, &h_matrix()),
            Instruction::Cswap { control, target_a, target_b } => {
                apply_cswap(&mut state.amps, control, target_a, target_b)
            }
            Instruction::Measure { .. } => {}
        }
    }
    Ok(state)
}

fn check_measure_map(
    map: &[(usize, usize)],
    num_qubits: usize,
) -> Result<(), SimError> {
    for (i, &(q, c)) in map.iter().enumerate() {
        if q >= num_qubits {
            return Err(SimError::QubitOutOfRange { qubit: q, num_qubits });
        }
        for &(pq, pc) in &map[..i] {
            if pq == q {
                return Err(SimError::DuplicateQubit(q));
            }
            if pc == c {
                return Err(SimError::DuplicateClbit(c));
            }
        }
    }
    Ok(())
}

fn marginal_with_width(
    state: &StateVector,
    map: &[(usize, usize)],
    width: usize,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    for (i, amp) in state.amps.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut outcome = 0u64;
        for &(q, c) in map {
            outcome |= ((i >> q) as u64 & 1) << c;
        }
        *acc.entry(outcome).or_insert(0.0) += p;
    }
    acc.into_iter().map(|(v, p)| (bitstring(v, width), p)).collect()
}

/// Probability of each classical outcome under the measurement map `map`
/// (pairs of `(qubit, clbit)`). Keys are rendered over `max clbit + 1` bits;
/// probabilities sum to 1 up to floating point error.
pub fn marginal_probability(
    state: &StateVector,
    map: &[(usize, usize)],
) -> Result<BTreeMap<String, f64>, SimError> {
    check_measure_map(map, state.num_qubits)?;
    let width = map.iter().map(|&(_, c)| c + 1).max().unwrap_or(0);
    Ok(marginal_with_width(state, map, width))
}

/// Runs the circuit and draws `shots` samples from the exact outcome
/// distribution using a ChaCha stream seeded with `seed`. Outcomes are
/// rendered over the circuit's full classical register. The draw is
/// reproducible: same circuit, shots and seed always yield the same counts.
pub fn sample_counts(
    circuit: &QuantumCircuit,
    shots: u64,
    seed: u64,
) -> Result<CountsMap, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let map = circuit.measure_map();
    if map.is_empty() {
        return Err(SimError::NoMeasurements);
    }
    let state = run_statevector(circuit)?;
    check_measure_map(&map, state.num_qubits)?;
    let dist = marginal_with_width(&state, &map, circuit.num_clbits());

    let outcomes: Vec<&String> = dist.keys().collect();
    let mut cumulative = Vec::with_capacity(dist.len());
    let mut total = 0.0;
    for p in dist.values() {
        total += p;
        cumulative.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for _ in 0..shots {
        let x = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= x).min(outcomes.len() - 1);
        *counts.entry(outcomes[idx].clone()).or_insert(0) += 1;
    }
    Ok(CountsMap::new(counts))
}

type Matrix = Vec<Vec<Complex64>>;

fn identity(dim: usize) -> Matrix {
    let mut m = vec![vec![Complex64::ZERO; dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::ONE;
    }
    m
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let (ca, cb) = (a[0].len(), b[0].len());
    let mut out = vec![vec![Complex64::ZERO; ca * cb]; ra * rb];
    for ia in 0..ra {
        for ja in 0..ca {
            for ib in 0..rb {
                for jb in 0..cb {
                    out[ia * rb + ib][ja * cb + jb] = a[ia][ja] * b[ib][jb];
                }
            }
        }
    }
    out
}

fn single_gate_full(n: usize, qubit: usize, gate: &[[Complex64; 2]; 2]) -> Matrix {
    let g: Matrix = vec![
        vec![gate[0][0], gate[0][1]],
        vec![gate[1][0], gate[1][1]],
    ];
    // Qubit 0 is the least significant index bit, so it sits rightmost in the
    // Kronecker product: I_(2^(n-1-q)) (x) G (x) I_(2^q).
    let low = identity(1usize << qubit);
    let high = identity(1usize << (n - 1 - qubit));
    kron(&high, &kron(&g, &low))
}

fn cswap_full(n: usize, control: usize, a: usize, b: usize) -> Matrix {
    let dim = 1usize << n;
    let (cb, ab, bb) = (1usize << control, 1usize << a, 1usize << b);
    let mut m = vec![vec![Complex64::ZERO; dim]; dim];
    for col in 0..dim {
        let row = if col & cb != 0 && (col & ab != 0) != (col & bb != 0) {
            col ^ ab ^ bb
        } else {
            col
        };
        m[row][col] = Complex64::ONE;
    }
    m
}

fn matvec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Re-simulates a small circuit with dense matrices: every gate is expanded
/// to the full 2^n x 2^n operator and applied by matrix-vector product. This
/// route is deliberately independent of [`run_statevector`]'s in-place bit
/// tricks so the two can cross-check each other.
pub fn bruteforce_statevector(circuit: &QuantumCircuit) -> Result<StateVector, SimError> {
    let n = circuit.num_qubits();
    if n > BRUTEFORCE_MAX_QUBITS {
        return Err(SimError::TooManyQubits { requested: n, cap: BRUTEFORCE_MAX_QUBITS });
    }
    let mut v = vec![Complex64::ZERO; 1usize << n];
    v[0] = Complex64::ONE;
    for &(instr, _) in circuit.instructions() {
        let full = match instr {
            Instruction::U3 { qubit, theta, phi, lambda } => {
                single_gate_full(n, qubit, &u3_matrix(theta, phi, lambda))
            }
            Instruction::X { qubit } => single_gate_full(n, qubit, &X_MATRIX),
            Instruction::H { qubit } => single_gate_full(n, qubit, &h_matrix()),
            Instruction::Cswap { control, target_a, target_b } => {
                cswap_full(n, control, target_a, target_b)
            }
            Instruction::Measure { .. } => continue,
        };
        v = matvec(&full, &v);
    }
    Ok(StateVector { num_qubits: n, amps: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcir::BlockTag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_amp_dev(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn single_gate(n: usize, instr: Instruction) -> QuantumCircuit {
        let mut c = QuantumCircuit::new(n, 0);
        c.append(instr, BlockTag::Unitary).unwrap();
        c
    }

    #[test]
    fn x_flips_the_ground_state() {
        let state = run_statevector(&single_gate(1, Instruction::X { qubit: 0 })).unwrap();
        assert!((state.amplitudes()[0].norm()) < 1e-12);
        assert!((state.amplitudes()[1] - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn h_builds_an_equal_superposition() {
        let state = run_statevector(&single_gate(1, Instruction::H { qubit: 0 })).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((state.amplitudes()[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!((state.amplitudes()[1] - Complex64::new(r, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn u3_matches_its_closed_form() {
        // theta = pi/4, phi = 3pi/4: amplitudes (cos(t/2), e^(i phi) sin(t/2)).
        let theta = std::f64::consts::FRAC_PI_4;
        let phi = 3.0 * std::f64::consts::FRAC_PI_4;
        let state = run_statevector(&single_gate(
            1,
            Instruction::U3 { qubit: 0, theta, phi, lambda: 0.0 },
        ))
        .unwrap();
        let expect0 = Complex64::new((theta / 2.0).cos(), 0.0);
        let expect1 = exp_i(phi) * (theta / 2.0).sin();
        assert!((state.amplitudes()[0] - expect0).norm() < 1e-12);
        assert!((state.amplitudes()[1] - expect1).norm() < 1e-12);
        // Frozen decimal expansions for the same amplitudes.
        assert!((state.amplitudes()[0].re - 0.9238795325112867).abs() < 1e-12);
        assert!((state.amplitudes()[1].re - -0.27059805007309845).abs() < 1e-12);
        assert!((state.amplitudes()[1].im - 0.2705980500730985).abs() < 1e-12);
    }

    #[test]
    fn gates_only_touch_their_qubit() {
        let state = run_statevector(&single_gate(3, Instruction::X { qubit: 1 })).unwrap();
        assert!((state.amplitudes()[0b010] - Complex64::ONE).norm() < 1e-12);
        assert_eq!(state.norm_sqr().round() as i64, 1);
    }

    #[test]
    fn involutions_return_to_the_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(3..6usize);
            let mut c = QuantumCircuit::new(n, 0);
            // Random preparation layer.
            for q in 0..n {
                c.append(
                    Instruction::U3 {
                        qubit: q,
                        theta: rng.random::<f64>() * 3.0,
                        phi: rng.random::<f64>() * 6.0,
                        lambda: 0.0,
                    },
                    BlockTag::Encoding,
                )
                .unwrap();
            }
            let before = run_statevector(&c).unwrap();
            let doubled: Vec<Instruction> = match rng.random_range(0..3u8) {
                0 => vec![Instruction::X { qubit: rng.random_range(0..n) }],
                1 => vec![Instruction::H { qubit: rng.random_range(0..n) }],
                _ => vec![Instruction::Cswap { control: 0, target_a: 1, target_b: 2 }],
            };
            for instr in doubled.iter().chain(doubled.iter()) {
                c.append(*instr, BlockTag::Unitary).unwrap();
            }
            let after = run_statevector(&c).unwrap();
            assert!(max_amp_dev(&before, &after) < 1e-12);
        }
    }

    #[test]
    fn norm_is_preserved_after_every_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(2..6usize);
            let mut c = QuantumCircuit::new(n, 0);
            for _ in 0..rng.random_range(1..20usize) {
                // Cswap needs three distinct qubits, so skip it on 2-qubit
                // registers.
                let kinds = if n >= 3 { 4u8 } else { 3 };
                let instr = match rng.random_range(0..kinds) {
                    0 => Instruction::U3 {
                        qubit: rng.random_range(0..n),
                        theta: rng.random::<f64>() * 3.2,
                        phi: rng.random::<f64>() * 6.3,
                        lambda: rng.random::<f64>() * 6.3,
                    },
                    1 => Instruction::X { qubit: rng.random_range(0..n) },
                    2 => Instruction::H { qubit: rng.random_range(0..n) },
                    _ => {
                        let mut q = [0usize; 3];
                        loop {
                            for slot in q.iter_mut() {
                                *slot = rng.random_range(0..n);
                            }
                            if q[0] != q[1] && q[0] != q[2] && q[1] != q[2] {
                                break;
                            }
                        }
                        Instruction::Cswap { control: q[0], target_a: q[1], target_b: q[2] }
                    }
                };
                c.append(instr, BlockTag::Unitary).unwrap();
                // Rerun the whole prefix so the norm is checked after every
                // single gate application.
                let state = run_statevector(&c).unwrap();
                assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_many_qubits_is_rejected() {
        let c = QuantumCircuit::new(MAX_QUBITS + 1, 0);
        assert_eq!(
            run_statevector(&c),
            Err(SimError::TooManyQubits { requested: MAX_QUBITS + 1, cap: MAX_QUBITS })
        );
        let c = QuantumCircuit::new(BRUTEFORCE_MAX_QUBITS + 1, 0);
        assert_eq!(
            bruteforce_statevector(&c),
            Err(SimError::TooManyQubits {
                requested: BRUTEFORCE_MAX_QUBITS + 1,
                cap: BRUTEFORCE_MAX_QUBITS
            })
        );
    }

    #[test]
    fn marginal_reads_out_h_and_x() {
        let h = run_statevector(&single_gate(1, Instruction::H { qubit: 0 })).unwrap();
        let dist = marginal_probability(&h, &[(0, 0)]).unwrap();
        assert!((dist["0"] - 0.5).abs() < 1e-12);
        assert!((dist["1"] - 0.5).abs() < 1e-12);

        let x = run_statevector(&single_gate(1, Instruction::X { qubit: 0 })).unwrap();
        let dist = marginal_probability(&x, &[(0, 0)]).unwrap();
        assert_eq!(dist.get("0"), None);
        assert!((dist["1"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_respects_clbit_positions() {
        // X on qubit 0 puts q0=1, q1=0. Crossed mapping (q1 -> c0, q0 -> c1)
        // gives c1=1, c0=0, rendered MSB-first as "10".
        let state = run_statevector(&single_gate(2, Instruction::X { qubit: 0 })).unwrap();
        let dist = marginal_probability(&state, &[(1, 0), (0, 1)]).unwrap();
        assert!((dist["10"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_rejects_duplicates() {
        let state = StateVector::zero_state(2);
        assert_eq!(
            marginal_probability(&state, &[(0, 0), (0, 1)]),
            Err(SimError::DuplicateQubit(0))
        );
        assert_eq!(
            marginal_probability(&state, &[(0, 0), (1, 0)]),
            Err(SimError::DuplicateClbit(0))
        );
        assert_eq!(
            marginal_probability(&state, &[(2, 0)]),
            Err(SimError::QubitOutOfRange { qubit: 2, num_qubits: 2 })
        );
    }

    fn measured(mut c: QuantumCircuit, pairs: &[(usize, usize)]) -> QuantumCircuit {
        for &(q, cl) in pairs {
            c.append(Instruction::Measure { qubit: q, clbit: cl }, BlockTag::Measurement).unwrap();
        }
        c
    }

    #[test]
    fn sampling_a_deterministic_circuit_is_exact() {
        let mut c = QuantumCircuit::new(1, 1);
        c.append(Instruction::X { qubit: 0 }, BlockTag::Encoding).unwrap();
        let c = measured(c, &[(0, 0)]);
        let counts = sample_counts(&c, 5, 99).unwrap();
        assert_eq!(counts.get("1"), 5);
        assert_eq!(counts.get("0"), 0);
        assert_eq!(counts.shots(), 5);
        assert_eq!(counts.len(), 1);
    }

    #[test]
    fn sampling_is_reproducible_per_seed() {
        let mut c = QuantumCircuit::new(1, 1);
        c.append(Instruction::H { qubit: 0 }, BlockTag::Unitary).unwrap();
        let c = measured(c, &[(0, 0)]);
        let a = sample_counts(&c, 1000, 42).unwrap();
        let b = sample_counts(&c, 1000, 42).unwrap();
        assert_eq!(a, b);
        let other = sample_counts(&c, 1000, 43).unwrap();
        // Not a hard requirement, but with 1000 shots two seeds virtually
        // never tie exactly; a tie here would suggest the seed is ignored.
        assert_ne!(a, other);
    }

    #[test]
    fn sampled_frequencies_track_the_marginal() {
        let mut c = QuantumCircuit::new(1, 1);
        c.append(Instruction::H { qubit: 0 }, BlockTag::Unitary).unwrap();
        let c = measured(c, &[(0, 0)]);
        for seed in 0..20u64 {
            let counts = sample_counts(&c, 1000, seed).unwrap();
            let ones = counts.get("1") as f64;
            // 4 sigma around the mean of Binomial(1000, 0.5).
            assert!((ones - 500.0).abs() < 4.0 * (1000.0f64 * 0.25).sqrt() + 1.0);
        }
    }

    #[test]
    fn sampling_requires_measurements_and_shots() {
        let c = QuantumCircuit::new(1, 1);
        assert_eq!(sample_counts(&c, 10, 0), Err(SimError::NoMeasurements));
        let c = measured(QuantumCircuit::new(1, 1), &[(0, 0)]);
        assert_eq!(sample_counts(&c, 0, 0), Err(SimError::ZeroShots));
    }

    #[test]
    fn counts_render_over_the_full_register() {
        // Two clbits, only clbit 1 written: outcomes still render as two
        // characters, with c0 fixed at 0.
        let mut c = QuantumCircuit::new(2, 2);
        c.append(Instruction::X { qubit: 1 }, BlockTag::Encoding).unwrap();
        let c = measured(c, &[(1, 1)]);
        let counts = sample_counts(&c, 7, 0).unwrap();
        assert_eq!(counts.get("10"), 7);
    }

    #[test]
    fn counts_lines_round_trip() {
        let mut c = QuantumCircuit::new(2, 2);
        c.append(Instruction::H { qubit: 0 }, BlockTag::Unitary).unwrap();
        c.append(Instruction::H { qubit: 1 }, BlockTag::Unitary).unwrap();
        let c = measured(c, &[(0, 0), (1, 1)]);
        let counts = sample_counts(&c, 1000, 7).unwrap();
        let text = counts.to_lines();
        assert_eq!(CountsMap::parse_lines(&text), Some(counts));
        assert_eq!(CountsMap::parse_lines("01 3\n01 4\n"), None);
        assert_eq!(CountsMap::parse_lines("2x 3\n"), None);
        assert_eq!(CountsMap::parse_lines("01 -3\n"), None);
    }

    #[test]
    fn bruteforce_agrees_on_single_gates() {
        let cases = [
            single_gate(1, Instruction::X { qubit: 0 }),
            single_gate(2, Instruction::H { qubit: 1 }),
            single_gate(1, Instruction::U3 { qubit: 0, theta: 1.1, phi: 2.2, lambda: 0.4 }),
        ];
        for c in &cases {
            let fast = run_statevector(c).unwrap();
            let slow = bruteforce_statevector(c).unwrap();
            assert!(max_amp_dev(&fast, &slow) < 1e-12);
        }
        // CSWAP with the control set.
        let mut c = QuantumCircuit::new(3, 0);
        c.append(Instruction::X { qubit: 0 }, BlockTag::Encoding).unwrap();
        c.append(Instruction::X { qubit: 1 }, BlockTag::Encoding).unwrap();
        c.append(Instruction::Cswap { control: 0, target_a: 1, target_b: 2 }, BlockTag::Unitary)
            .unwrap();
        let fast = run_statevector(&c).unwrap();
        let slow = bruteforce_statevector(&c).unwrap();
        assert!(max_amp_dev(&fast, &slow) < 1e-12);
        assert!((fast.amplitudes()[0b101] - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn bruteforce_agrees_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(1..=4usize);
            let mut c = QuantumCircuit::new(n, 0);
            for _ in 0..rng.random_range(0..20usize) {
                let instr = match rng.random_range(0..4u8) {
                    0 => Instruction::U3 {
                        qubit: rng.random_range(0..n),
                        theta: rng.random::<f64>() * 3.2,
                        phi: rng.random::<f64>() * 6.3,
                        lambda: rng.random::<f64>() * 6.3,
                    },
                    1 => Instruction::X { qubit: rng.random_range(0..n) },
                    2 => Instruction::H { qubit: rng.random_range(0..n) },
                    _ if n >= 3 => {
                        let mut q = [0usize; 3];
                        loop {
                            for slot in q.iter_mut() {
                                *slot = rng.random_range(0..n);
                            }
                            if q[0] != q[1] && q[0] != q[2] && q[1] != q[2] {
                                break;
                            }
                        }
                        Instruction::Cswap { control: q[0], target_a: q[1], target_b: q[2] }
                    }
                    _ => Instruction::H { qubit: rng.random_range(0..n) },
                };
                c.append(instr, BlockTag::Unitary).unwrap();
            }
            let fast = run_statevector(&c).unwrap();
            let slow = bruteforce_statevector(&c).unwrap();
            assert!(max_amp_dev(&fast, &slow) < 1e-10, "routes diverged on {c:?}");
        }
    }

    #[test]
    fn empty_circuit_stays_in_the_ground_state() {
        let state = bruteforce_statevector(&QuantumCircuit::new(3, 0)).unwrap();
        assert!((state.amplitudes()[0] - Complex64::ONE).norm() < 1e-12);
        assert_eq!(state.amplitudes().len(), 8);
    }

    #[test]
    fn bitstring_renders_msb_first() {
        assert_eq!(bitstring(0b110, 3), "110");
        assert_eq!(bitstring(1, 3), "001");
        assert_eq!(bitstring(0, 0), "");
    }
}
