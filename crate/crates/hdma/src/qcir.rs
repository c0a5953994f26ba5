//! Gate-level circuit representation and the `hqc` text format.
//!
//! A [`QuantumCircuit`] is a fixed-width register pair (qubits, classical
//! bits) plus an ordered instruction list. Every instruction is tagged with
//! the block it belongs to, and blocks must appear in pipeline order:
//! encoding, then unitary transformation, then measurement. The gate set is
//! deliberately tiny: `u3`, `x`, `h`, `cswap`, `measure`.
//!
//! Circuits serialize to a line-based document ("hqc", version 1) that is the
//! wire format between the circuit generation service and backends:
//!
//! ```text
//! hqc 1
//! qubits 5
//! clbits 3
//! meta point_id=3 centroid_id=0
//! block encoding
//! u3 1 0.86393797973719322 2.2776546738526 0
//! ...
//! ```
//!
//! Angles are written with up to 17 significant digits (trailing zeros
//! trimmed), which is enough for an exact `f64` round trip.

use std::fmt;

/// Pipeline stage a given instruction belongs to. Blocks are ordered and a
/// circuit may only move forward through them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockTag {
    Encoding,
    Unitary,
    Measurement,
}

impl BlockTag {
    pub fn name(self) -> &'static str {
        match self {
            BlockTag::Encoding => "encoding",
            BlockTag::Unitary => "unitary",
            BlockTag::Measurement => "measurement",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "encoding" => Some(BlockTag::Encoding),
            "unitary" => Some(BlockTag::Unitary),
            "measurement" => Some(BlockTag::Measurement),
            _ => None,
        }
    }
}

impl fmt::Display for BlockTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate or measurement. Qubit indices are register positions; `Measure`
/// additionally names the classical bit that receives the outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
    X { qubit: usize },
    H { qubit: usize },
    Cswap { control: usize, target_a: usize, target_b: usize },
    Measure { qubit: usize, clbit: usize },
}

impl Instruction {
    /// Qubits touched by this instruction, in mnemonic order.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Instruction::U3 { qubit, .. }
            | Instruction::X { qubit }
            | Instruction::H { qubit }
            | Instruction::Measure { qubit, .. } => vec![qubit],
            Instruction::Cswap { control, target_a, target_b } => {
                vec![control, target_a, target_b]
            }
        }
    }

    /// Classical bit written by this instruction, if any.
    pub fn clbit(&self) -> Option<usize> {
        match *self {
            Instruction::Measure { clbit, .. } => Some(clbit),
            _ => None,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instruction::U3 { .. } => "u3",
            Instruction::X { .. } => "x",
            Instruction::H { .. } => "h",
            Instruction::Cswap { .. } => "cswap",
            Instruction::Measure { .. } => "measure",
        }
    }

    fn to_line(self) -> String {
        match self {
            Instruction::U3 { qubit, theta, phi, lambda } => format!(
                "u3 {} {} {} {}",
                qubit,
                format_angle(theta),
                format_angle(phi),
                format_angle(lambda)
            ),
            Instruction::X { qubit } => format!("x {qubit}"),
            Instruction::H { qubit } => format!("h {qubit}"),
            Instruction::Cswap { control, target_a, target_b } => {
                format!("cswap {control} {target_a} {target_b}")
            }
            Instruction::Measure { qubit, clbit } => format!("measure {qubit} {clbit}"),
        }
    }
}

/// Errors raised when an append would break a circuit invariant. A rejected
/// append leaves the circuit untouched.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("{kind} index {index} out of range (register holds {limit})")]
    IndexOutOfRange { kind: &'static str, index: usize, limit: usize },
    #[error("qubit {qubit} used twice in one instruction")]
    DuplicateQubit { qubit: usize },
    #[error("block {attempted} may not follow {current}")]
    BlockOrderViolation { current: BlockTag, attempted: BlockTag },
    #[error("measure belongs in the measurement block, not {given}")]
    MeasureOutsideMeasurement { given: BlockTag },
    #[error("classical bit {clbit} written more than once")]
    DuplicateClassicalBit { clbit: usize },
    #[error("u3 angles must be finite")]
    NonFiniteAngle,
    #[error("metadata keys and values may not be empty or contain whitespace, '#' or '='")]
    InvalidMetadata,
}

/// Errors raised while parsing an `hqc` document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("document does not start with an 'hqc 1' header")]
    HeaderMissing,
    #[error("line {line}: syntax error near '{token}'")]
    Syntax { line: usize, token: String },
    #[error("line {line}: unknown gate '{gate}'")]
    UnknownGate { line: usize, gate: String },
    #[error("line {line}: {gate} expects {expected} operands, got {got}")]
    ArityMismatch { line: usize, gate: String, expected: usize, got: usize },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: CircuitError,
    },
}

/// An immutable-once-built gate list over fixed qubit and classical registers.
///
/// Construction goes through [`QuantumCircuit::append`], which validates
/// indices, block ordering and classical-bit uniqueness before mutating, so a
/// value handed to the simulator is well formed by construction. Metadata is
/// an ordered key/value list carried verbatim through serialization; the
/// services use it for point/centroid ids and run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    num_qubits: usize,
    num_clbits: usize,
    instructions: Vec<(Instruction, BlockTag)>,
    metadata: Vec<(String, String)>,
}

impl QuantumCircuit {
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        QuantumCircuit { num_qubits, num_clbits, instructions: Vec::new(), metadata: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn instructions(&self) -> &[(Instruction, BlockTag)] {
        &self.instructions
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets a metadata entry, replacing an existing key in place. Keys and
    /// values form single tokens on the `meta` line, so whitespace, `#` and
    /// `=` are rejected.
    pub fn set_meta(&mut self, key: &str, value: &str) -> Result<(), CircuitError> {
        let bad = |s: &str| {
            s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '#' || c == '=')
        };
        if bad(key) || value.is_empty() || value.chars().any(|c| c.is_whitespace() || c == '#') {
            return Err(CircuitError::InvalidMetadata);
        }
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value.to_string(),
            None => self.metadata.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    fn last_block(&self) -> Option<BlockTag> {
        self.instructions.last().map(|(_, b)| *b)
    }

    /// Appends `instr` under `block`, enforcing every structural invariant
    /// before touching the instruction list:
    ///
    /// * all indices in range, qubits distinct within the instruction;
    /// * blocks non-decreasing over the lifetime of the circuit;
    /// * `measure` only inside the measurement block, each classical bit
    ///   written at most once;
    /// * `u3` angles finite.
    pub fn append(&mut self, instr: Instruction, block: BlockTag) -> Result<(), CircuitError> {
        let qubits = instr.qubits();
        for &q in &qubits {
            if q >= self.num_qubits {
                return Err(CircuitError::IndexOutOfRange {
                    kind: "qubit",
                    index: q,
                    limit: self.num_qubits,
                });
            }
        }
        for (i, &q) in qubits.iter().enumerate() {
            if qubits[..i].contains(&q) {
                return Err(CircuitError::DuplicateQubit { qubit: q });
            }
        }
        if let Some(current) = self.last_block() {
            if block < current {
                return Err(CircuitError::BlockOrderViolation { current, attempted: block });
            }
        }
        if let Instruction::U3 { theta, phi, lambda, .. } = instr {
            if !(theta.is_finite() && phi.is_finite() && lambda.is_finite()) {
                return Err(CircuitError::NonFiniteAngle);
            }
        }
        if let Instruction::Measure { clbit, .. } = instr {
            if block != BlockTag::Measurement {
                return Err(CircuitError::MeasureOutsideMeasurement { given: block });
            }
            if clbit >= self.num_clbits {
                return Err(CircuitError::IndexOutOfRange {
                    kind: "classical bit",
                    index: clbit,
                    limit: self.num_clbits,
                });
            }
            if self.instructions.iter().any(|(i, _)| i.clbit() == Some(clbit)) {
                return Err(CircuitError::DuplicateClassicalBit { clbit });
            }
        }
        self.instructions.push((instr, block));
        Ok(())
    }

    /// The `(qubit, clbit)` pairs of all measurements, in appearance order.
    pub fn measure_map(&self) -> Vec<(usize, usize)> {
        self.instructions
            .iter()
            .filter_map(|(i, _)| match *i {
                Instruction::Measure { qubit, clbit } => Some((qubit, clbit)),
                _ => None,
            })
            .collect()
    }

    /// Register width and circuit depth. Depth is the longest dependency
    /// chain where two instructions depend on each other iff they share a
    /// qubit; an empty circuit has depth 0.
    pub fn dimensions(&self) -> (usize, usize) {
        let mut chain = vec![0usize; self.num_qubits];
        let mut depth = 0;
        for (instr, _) in &self.instructions {
            let qubits = instr.qubits();
            let level = 1 + qubits.iter().map(|&q| chain[q]).max().unwrap_or(0);
            for &q in &qubits {
                chain[q] = level;
            }
            depth = depth.max(level);
        }
        (self.num_qubits, depth)
    }

    /// Renders the circuit as an `hqc` version 1 document. The output is
    /// deterministic: header, register sizes, one optional `meta` line (only
    /// when metadata exists), then each non-empty block introduced by a
    /// `block` line. Ends with a newline.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("hqc 1\n");
        out.push_str(&format!("qubits {}\n", self.num_qubits));
        out.push_str(&format!("clbits {}\n", self.num_clbits));
        if !self.metadata.is_empty() {
            out.push_str("meta");
            for (k, v) in &self.metadata {
                out.push(' ');
                out.push_str(k);
                out.push('=');
                out.push_str(v);
            }
            out.push('\n');
        }
        let mut current: Option<BlockTag> = None;
        for &(instr, block) in &self.instructions {
            if current != Some(block) {
                out.push_str("block ");
                out.push_str(block.name());
                out.push('\n');
                current = Some(block);
            }
            out.push_str(&instr.to_line());
            out.push('\n');
        }
        out
    }

    /// Parses an `hqc` document. Blank lines are skipped and `#` starts a
    /// comment that runs to end of line. The instruction stream is rebuilt
    /// through [`QuantumCircuit::append`], so every structural invariant is
    /// re-checked and violations surface as [`ParseError::Invalid`] with the
    /// offending line number.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut circuit: Option<QuantumCircuit> = None;
        let mut sizes: (Option<usize>, Option<usize>) = (None, None);
        let mut pending_meta: Vec<(String, String)> = Vec::new();
        let mut block: Option<BlockTag> = None;
        let mut saw_header = false;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let tokens: Vec<&str> = stripped.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            if !saw_header {
                if tokens[0] != "hqc" {
                    return Err(ParseError::HeaderMissing);
                }
                if tokens.len() != 2 || tokens[1] != "1" {
                    return Err(ParseError::Syntax {
                        line,
                        token: tokens.get(1).unwrap_or(&"hqc").to_string(),
                    });
                }
                saw_header = true;
                continue;
            }
            let syntax = |token: &str| ParseError::Syntax { line, token: token.to_string() };
            match tokens[0] {
                "hqc" => return Err(syntax("hqc")),
                "qubits" | "clbits" => {
                    if circuit.is_some() {
                        return Err(syntax(tokens[0]));
                    }
                    if tokens.len() != 2 {
                        return Err(syntax(tokens[0]));
                    }
                    let n: usize = tokens[1].parse().map_err(|_| syntax(tokens[1]))?;
                    let slot = if tokens[0] == "qubits" { &mut sizes.0 } else { &mut sizes.1 };
                    if slot.is_some() {
                        return Err(syntax(tokens[0]));
                    }
                    *slot = Some(n);
                }
                "meta" => {
                    for pair in &tokens[1..] {
                        let (k, v) = pair.split_once('=').ok_or_else(|| syntax(pair))?;
                        if k.is_empty() || v.is_empty() {
                            return Err(syntax(pair));
                        }
                        pending_meta.push((k.to_string(), v.to_string()));
                    }
                }
                "block" => {
                    if tokens.len() != 2 {
                        return Err(syntax("block"));
                    }
                    block =
                        Some(BlockTag::from_name(tokens[1]).ok_or_else(|| syntax(tokens[1]))?);
                }
                gate @ ("u3" | "x" | "h" | "cswap" | "measure") => {
                    if circuit.is_none() {
                        match sizes {
                            (Some(q), Some(c)) => {
                                let mut built = QuantumCircuit::new(q, c);
                                built.metadata = std::mem::take(&mut pending_meta);
                                circuit = Some(built);
                            }
                            _ => return Err(syntax(gate)),
                        }
                    }
                    let circuit = circuit.as_mut().expect("just initialized");
                    let expected = match gate {
                        "u3" => 4,
                        "x" | "h" => 1,
                        "cswap" => 3,
                        "measure" => 2,
                        _ => unreachable!(),
                    };
                    let operands = &tokens[1..];
                    if operands.len() != expected {
                        return Err(ParseError::ArityMismatch {
                            line,
                            gate: gate.to_string(),
                            expected,
                            got: operands.len(),
                        });
                    }
                    let index = |tok: &str| -> Result<usize, ParseError> {
                        tok.parse().map_err(|_| syntax(tok))
                    };
                    let angle = |tok: &str| -> Result<f64, ParseError> {
                        tok.parse().map_err(|_| syntax(tok))
                    };
                    let instr = match gate {
                        "u3" => Instruction::U3 {
                            qubit: index(operands[0])?,
                            theta: angle(operands[1])?,
                            phi: angle(operands[2])?,
                            lambda: angle(operands[3])?,
                        },
                        "x" => Instruction::X { qubit: index(operands[0])? },
                        "h" => Instruction::H { qubit: index(operands[0])? },
                        "cswap" => Instruction::Cswap {
                            control: index(operands[0])?,
                            target_a: index(operands[1])?,
                            target_b: index(operands[2])?,
                        },
                        "measure" => Instruction::Measure {
                            qubit: index(operands[0])?,
                            clbit: index(operands[1])?,
                        },
                        _ => unreachable!(),
                    };
                    // A gate before any block line defaults to the encoding
                    // block, matching hand-written documents.
                    let tag = block.unwrap_or(BlockTag::Encoding);
                    circuit
                        .append(instr, tag)
                        .map_err(|source| ParseError::Invalid { line, source })?;
                }
                other => return Err(ParseError::UnknownGate { line, gate: other.to_string() }),
            }
        }

        if !saw_header {
            return Err(ParseError::HeaderMissing);
        }
        match circuit {
            Some(c) => Ok(c),
            None => match sizes {
                (Some(q), Some(c)) => {
                    let mut built = QuantumCircuit::new(q, c);
                    built.metadata = pending_meta;
                    Ok(built)
                }
                _ => Err(ParseError::Syntax { line: 0, token: "qubits/clbits".to_string() }),
            },
        }
    }
}

/// Formats an angle with up to 17 significant digits, trailing zeros trimmed,
/// in plain decimal notation. 17 digits pin down an `f64` exactly, so
/// `format_angle` followed by `str::parse` is the identity on finite values.
pub fn format_angle(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponential form");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let mut out = if point <= 0 {
        format!("0.{}{}", "0".repeat(-point as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (head, tail) = digits.split_at(point as usize);
        format!("{head}.{tail}")
    };
    if out.contains('.') {
        out = out.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if neg {
        out.insert(0, '-');
    }
    out
}
