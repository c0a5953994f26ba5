//! Classical-to-quantum encodings and run profiles.
//!
//! Two encodings carry table rows onto the register:
//!
//! * [`angle_embed`] maps a two-feature row in [-1, 1]^2 to Bloch angles
//!   `theta = (Feature1 + 1) * pi / 2`, `phi = (Feature2 + 1) * pi / 2`; the
//!   prepared single-qubit state is `U3(theta, phi, 0)|0>` with amplitudes
//!   `(cos(theta/2), e^(i phi) sin(theta/2))`.
//! * [`basis_encode`] writes a tuple ID into computational basis qubits, most
//!   significant bit first.
//!
//! A [`Profile`] bundles the run limits (point budget, feature range, ID
//! width, shots, auto regeneration) and is read from a `key=value` file.
//! [`validate`] checks a table against a profile and reports violations as
//! data rather than failing fast, so the decision stage can route offending
//! problems to the classical path.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::datastore::{Role, Table};

/// A row's two features, in table order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub f1: f64,
    pub f2: f64,
}

impl FeatureVector {
    pub fn new(f1: f64, f2: f64) -> Self {
        FeatureVector { f1, f2 }
    }
}

/// Bloch angles produced by [`angle_embed`]; both lie in [0, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("feature value {value} outside [{min}, {max}]")]
    FeatureOutOfRange { value: f64, min: f64, max: f64 },
    #[error("id {id} does not fit in {width} basis qubits")]
    IdOverflow { id: u64, width: usize },
}

/// Maps features in [-1, 1] to the angle pair (theta, phi). Rejects values
/// outside the closed interval, including NaN.
pub fn angle_embed(features: FeatureVector) -> Result<AnglePair, EncodeError> {
    for value in [features.f1, features.f2] {
        if !(-1.0..=1.0).contains(&value) {
            return Err(EncodeError::FeatureOutOfRange { value, min: -1.0, max: 1.0 });
        }
    }
    Ok(AnglePair {
        theta: (features.f1 + 1.0) * PI / 2.0,
        phi: (features.f2 + 1.0) * PI / 2.0,
    })
}

/// Amplitudes of `U3(theta, phi, 0)|0>`: `(cos(theta/2), e^(i phi) sin(theta/2))`.
/// The state is normalized for any angle pair.
pub fn state_amplitudes(angles: AnglePair) -> (Complex64, Complex64) {
    let half = angles.theta / 2.0;
    (
        Complex64::new(half.cos(), 0.0),
        Complex64::new(angles.phi.cos(), angles.phi.sin()) * half.sin(),
    )
}

/// Expands `id` into `width` basis-state bits, most significant bit first.
/// The returned bits drive one X gate per set bit.
pub fn basis_encode(id: u64, width: usize) -> Result<Vec<bool>, EncodeError> {
    if width < 64 && id >> width != 0 {
        return Err(EncodeError::IdOverflow { id, width });
    }
    Ok((0..width).rev().map(|b| id >> b & 1 == 1).collect())
}

/// Run limits governing extraction and encoding.
///
/// `max_points` caps how many unassigned points one quantum run may take on
/// (0 is allowed and forces the classical route). `id_bit_width` of `None`
/// means "derive from the largest ID in the table". `auto_regenerate` asks
/// the watch loop to rerun the workflow when the table's change token moves.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub max_points: usize,
    pub feature_min: f64,
    pub feature_max: f64,
    pub id_bit_width: Option<usize>,
    pub shots: u64,
    pub auto_regenerate: bool,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            max_points: 16,
            feature_min: -1.0,
            feature_max: 1.0,
            id_bit_width: None,
            shots: 1000,
            auto_regenerate: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("profile line {line}: expected key=value, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("profile line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("profile line {line}: invalid value '{value}' for {key}")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("profile is inconsistent: {0}")]
    Inconsistent(String),
}

impl Profile {
    /// Parses the `key=value` profile format. Unknown keys are rejected,
    /// missing keys fall back to defaults, blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut profile = Profile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| ProfileError::Syntax { line, text: stripped.to_string() })?;
            let (key, value) = (key.trim(), value.trim());
            let invalid = || ProfileError::InvalidValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            match key {
                "max_points" => profile.max_points = value.parse().map_err(|_| invalid())?,
                "feature_min" => profile.feature_min = value.parse().map_err(|_| invalid())?,
                "feature_max" => profile.feature_max = value.parse().map_err(|_| invalid())?,
                "id_bit_width" => {
                    let width: usize = value.parse().map_err(|_| invalid())?;
                    if width == 0 {
                        return Err(invalid());
                    }
                    profile.id_bit_width = Some(width);
                }
                "shots" => {
                    let shots: u64 = value.parse().map_err(|_| invalid())?;
                    if shots == 0 {
                        return Err(invalid());
                    }
                    profile.shots = shots;
                }
                "auto_regenerate" => {
                    profile.auto_regenerate = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(invalid()),
                    }
                }
                _ => return Err(ProfileError::UnknownKey { line, key: key.to_string() }),
            }
        }
        if !(profile.feature_min < profile.feature_max) {
            return Err(ProfileError::Inconsistent(format!(
                "feature_min {} must be below feature_max {}",
                profile.feature_min, profile.feature_max
            )));
        }
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProfileError::Io { path: path.to_path_buf(), source })?;
        Profile::parse(&text)
    }

    /// Renders the profile in its own file format.
    pub fn to_text(&self) -> String {
        let width = match self.id_bit_width {
            Some(w) => format!("id_bit_width={w}\n"),
            None => String::new(),
        };
        format!(
            "max_points={}\nfeature_min={}\nfeature_max={}\n{}shots={}\nauto_regenerate={}\n",
            self.max_points,
            self.feature_min,
            self.feature_max,
            width,
            self.shots,
            self.auto_regenerate
        )
    }

    /// The ID register width this profile implies for a table whose largest
    /// ID is `max_id`: the configured width if set, otherwise just enough
    /// bits (at least one).
    pub fn effective_id_width(&self, max_id: u64) -> usize {
        self.id_bit_width.unwrap_or_else(|| (64 - max_id.leading_zeros() as usize).max(1))
    }

    /// Copy of this profile with `id_bit_width` pinned for `max_id`.
    pub fn with_resolved_id_width(&self, max_id: u64) -> Profile {
        Profile { id_bit_width: Some(self.effective_id_width(max_id)), ..self.clone() }
    }
}

/// One reason a table does not fit a profile. Violations are reported as
/// values, not errors: the caller decides whether they are fatal.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    FeatureOutOfRange { row_id: u64, column: &'static str, value: f64 },
    TooManyPoints { points: usize, max_points: usize },
    IdOverflow { row_id: u64, id_bit_width: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FeatureOutOfRange { row_id, column, value } => {
                write!(f, "row {row_id}: {column} value {value} outside the profile range")
            }
            Violation::TooManyPoints { points, max_points } => {
                write!(f, "{points} unassigned points exceed the budget of {max_points}")
            }
            Violation::IdOverflow { row_id, id_bit_width } => {
                write!(f, "row {row_id}: id does not fit in {id_bit_width} bits")
            }
        }
    }
}

/// Checks every row of `table` against `profile` and returns all violations:
/// features outside `[feature_min, feature_max]`, more unassigned points than
/// `max_points`, and IDs that overflow the effective ID register width. An
/// empty result means the table is quantum-encodable under this profile.
pub fn validate(table: &Table, profile: &Profile) -> Vec<Violation> {
    let mut violations = Vec::new();
    let max_id = table.rows().iter().map(|r| r.id).max().unwrap_or(0);
    let width = profile.effective_id_width(max_id);
    for row in table.rows() {
        for (column, value) in [("Feature1", row.f1), ("Feature2", row.f2)] {
            if !(profile.feature_min..=profile.feature_max).contains(&value) {
                violations.push(Violation::FeatureOutOfRange { row_id: row.id, column, value });
            }
        }
        if width < 64 && row.id >> width != 0 {
            violations.push(Violation::IdOverflow { row_id: row.id, id_bit_width: width });
        }
    }
    let points = table
        .rows()
        .iter()
        .filter(|r| r.role == Role::Point && r.cluster.is_none())
        .count();
    if points > profile.max_points {
        violations.push(Violation::TooManyPoints { points, max_points: profile.max_points });
    }
    violations
}
