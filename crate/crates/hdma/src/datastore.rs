//! CSV table store.
//!
//! The store holds one table with the fixed header
//! `ID,Feature1,Feature2,Cluster,Role`. `Cluster` is empty for unassigned
//! points; `Role` is `centroid` or `point` and may be omitted entirely, in
//! which case rows with a cluster label are read as centroids. Persisted
//! output is canonical: same header, same row order, shortest-round-trip
//! float rendering, so byte equality is meaningful and the SHA-256
//! [`ChangeToken`] doubles as a cheap "did anything change" probe for the
//! regeneration watcher.
//!
//! The format is deliberately dependency-free: five comma-separated fields,
//! no quoting. Labels are validated on the way in so the format stays closed
//! under persist/load.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::encode::{self, FeatureVector, Profile, Violation};

/// Whether a row anchors a cluster or awaits assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Centroid,
    Point,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Centroid => "centroid",
            Role::Point => "point",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One table row. `cluster` is `None` while a point is unassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: u64,
    pub f1: f64,
    pub f2: f64,
    pub cluster: Option<String>,
    pub role: Role,
}

/// A centroid extracted for distance estimation; always carries the cluster
/// label it anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidRecord {
    pub id: u64,
    pub features: FeatureVector,
    pub cluster_label: String,
}

/// An unassigned point extracted for distance estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: u64,
    pub features: FeatureVector,
}

/// SHA-256 digest of the canonical CSV rendering. Equal tokens mean equal
/// table content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChangeToken([u8; 32]);

impl fmt::Display for ChangeToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for byte in self.0 {
            write!(f, "{byte:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("table file not found: {path}")]
    FileNotFound { path: PathBuf },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv row {row}: {message}")]
    CsvSyntax { row: usize, message: String },
    #[error("csv row {row}: feature value '{value}' is not numeric")]
    NonNumericFeature { row: usize, value: String },
    #[error("csv row {row}: duplicate id {id}")]
    DuplicateId { row: usize, id: u64 },
    #[error("csv row {row}: centroid {id} has no cluster label")]
    CentroidWithoutCluster { row: usize, id: u64 },
    #[error("no row with id {0}")]
    UnknownId(u64),
    #[error("label '{0}' may not be empty or contain commas or line breaks")]
    InvalidLabel(String),
    #[error("table does not fit the profile: {}", join_violations(.0))]
    ProfileViolation(Vec<Violation>),
    #[error("table has no centroid rows")]
    NoCentroids,
}

fn join_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// In-memory table with a hash index from ID to row position. Mutation goes
/// through [`Table::update_cluster`], which touches exactly one row and never
/// reorders anything, so persisted output stays diffable.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: Vec<Row>,
    index: HashMap<u64, usize>,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty() && !label.contains(',') && !label.contains('\n') && !label.contains('\r')
}

impl Table {
    /// Builds a table from rows, checking ID uniqueness, label hygiene, and
    /// that every centroid carries a cluster label. Row numbers in errors
    /// count the header as row 1, matching [`Table::parse_csv`].
    pub fn new(rows: Vec<Row>) -> Result<Self, DataError> {
        let mut index = HashMap::with_capacity(rows.len());
        for (pos, row) in rows.iter().enumerate() {
            let csv_row = pos + 2;
            if let Some(label) = &row.cluster {
                if !valid_label(label) {
                    return Err(DataError::InvalidLabel(label.clone()));
                }
            }
            if row.role == Role::Centroid && row.cluster.is_none() {
                return Err(DataError::CentroidWithoutCluster { row: csv_row, id: row.id });
            }
            if index.insert(row.id, pos).is_some() {
                return Err(DataError::DuplicateId { row: csv_row, id: row.id });
            }
        }
        Ok(Table { rows, index })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn get(&self, id: u64) -> Option<&Row> {
        self.index.get(&id).map(|&pos| &self.rows[pos])
    }

    /// Parses CSV text. The header must be
    /// `ID,Feature1,Feature2,Cluster,Role` (or the four-column form without
    /// `Role`). Rows are numbered from 1 including the header.
    pub fn parse_csv(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(DataError::CsvSyntax { row: 1, message: "empty document".to_string() })?;
        let has_role = match header.trim_end_matches('\r') {
            "ID,Feature1,Feature2,Cluster,Role" => true,
            "ID,Feature1,Feature2,Cluster" => false,
            other => {
                return Err(DataError::CsvSyntax {
                    row: 1,
                    message: format!("unexpected header '{other}'"),
                })
            }
        };
        let expected_fields = if has_role { 5 } else { 4 };
        let mut rows = Vec::new();
        for (idx, raw) in lines {
            let row = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_fields {
                return Err(DataError::CsvSyntax {
                    row,
                    message: format!(
                        "expected {expected_fields} fields, got {}",
                        fields.len()
                    ),
                });
            }
            let id: u64 = fields[0].trim().parse().map_err(|_| DataError::CsvSyntax {
                row,
                message: format!("id '{}' is not a non-negative integer", fields[0]),
            })?;
            let feature = |text: &str| -> Result<f64, DataError> {
                let value: f64 = text
                    .trim()
                    .parse()
                    .map_err(|_| DataError::NonNumericFeature { row, value: text.to_string() })?;
                if !value.is_finite() {
                    return Err(DataError::NonNumericFeature { row, value: text.to_string() });
                }
                Ok(value)
            };
            let f1 = feature(fields[1])?;
            let f2 = feature(fields[2])?;
            let cluster = match fields[3].trim() {
                "" => None,
                label => Some(label.to_string()),
            };
            let role = if has_role {
                match fields[4].trim() {
                    "centroid" => Role::Centroid,
                    "point" => Role::Point,
                    other => {
                        return Err(DataError::CsvSyntax {
                            row,
                            message: format!("role must be 'centroid' or 'point', got '{other}'"),
                        })
                    }
                }
            } else if cluster.is_some() {
                Role::Centroid
            } else {
                Role::Point
            };
            rows.push(Row { id, f1, f2, cluster, role });
        }
        Table::new(rows)
    }

    /// Reads and parses a table file.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                DataError::FileNotFound { path: path.to_path_buf() }
            } else {
                DataError::Io { path: path.to_path_buf(), source }
            }
        })?;
        Table::parse_csv(&text)
    }

    /// Canonical CSV rendering: full five-column header, rows in table
    /// order, shortest-round-trip floats, trailing newline.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ID,Feature1,Feature2,Cluster,Role\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.id,
                row.f1,
                row.f2,
                row.cluster.as_deref().unwrap_or(""),
                row.role
            ));
        }
        out
    }

    /// Writes the canonical rendering to `path`.
    pub fn persist(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })
    }

    /// Assigns `label` as the cluster of row `id`. Only that row changes;
    /// order and every other field stay untouched.
    pub fn update_cluster(&mut self, id: u64, label: &str) -> Result<(), DataError> {
        if !valid_label(label) {
            return Err(DataError::InvalidLabel(label.to_string()));
        }
        let pos = *self.index.get(&id).ok_or(DataError::UnknownId(id))?;
        self.rows[pos].cluster = Some(label.to_string());
        Ok(())
    }

    /// SHA-256 over the canonical rendering.
    pub fn change_token(&self) -> ChangeToken {
        let digest = Sha256::digest(self.to_csv().as_bytes());
        ChangeToken(digest.into())
    }

    /// Splits the table into centroids and the quantum work list: every
    /// centroid row, plus the first `max_points` unassigned point rows in
    /// table order. Feature-range and ID-overflow violations are fatal here
    /// (the circuits could not encode such rows); the point budget is not,
    /// because this method realizes it by truncation.
    pub fn extract(
        &self,
        profile: &Profile,
    ) -> Result<(Vec<CentroidRecord>, Vec<PointRecord>), DataError> {
        let fatal: Vec<Violation> = encode::validate(self, profile)
            .into_iter()
            .filter(|v| !matches!(v, Violation::TooManyPoints { .. }))
            .collect();
        if !fatal.is_empty() {
            return Err(DataError::ProfileViolation(fatal));
        }
        let centroids: Vec<CentroidRecord> = self
            .rows
            .iter()
            .filter(|r| r.role == Role::Centroid)
            .map(|r| CentroidRecord {
                id: r.id,
                features: FeatureVector::new(r.f1, r.f2),
                cluster_label: r.cluster.clone().expect("centroids always carry a label"),
            })
            .collect();
        if centroids.is_empty() {
            return Err(DataError::NoCentroids);
        }
        let points: Vec<PointRecord> = self
            .rows
            .iter()
            .filter(|r| r.role == Role::Point && r.cluster.is_none())
            .take(profile.max_points)
            .map(|r| PointRecord { id: r.id, features: FeatureVector::new(r.f1, r.f2) })
            .collect();
        Ok((centroids, points))
    }

    /// All unassigned point rows, with no profile involvement. The classical
    /// route uses this: encodability limits do not apply to it.
    pub fn unassigned_points(&self) -> Vec<PointRecord> {
        self.rows
            .iter()
            .filter(|r| r.role == Role::Point && r.cluster.is_none())
            .map(|r| PointRecord { id: r.id, features: FeatureVector::new(r.f1, r.f2) })
            .collect()
    }

    /// All centroid rows regardless of profile.
    pub fn centroids(&self) -> Vec<CentroidRecord> {
        self.rows
            .iter()
            .filter(|r| r.role == Role::Centroid)
            .map(|r| CentroidRecord {
                id: r.id,
                features: FeatureVector::new(r.f1, r.f2),
                cluster_label: r.cluster.clone().expect("centroids always carry a label"),
            })
            .collect()
    }
}
