//! Serializable report shapes and the text encodings written to disk.
//!
//! Numbers are emitted in shortest round-trip form, so every printed
//! value parses back to the identical `f64`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct DirectionValue {
    pub direction: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct BestPr1Json {
    pub value: f64,
    pub direction: Vec<f64>,
    pub attained: bool,
}

#[derive(Debug, Serialize)]
pub struct BestPr2Json {
    pub value: f64,
    pub direction: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct QJson {
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub inertia: [usize; 3],
    pub trace_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct IdentitiesJson {
    /// `int (1 + <H, psi>) dV`; zero for every closed submanifold.
    pub minkowski_residual: f64,
    /// Relative deviation of `A_C` from `-A_T / n`.
    pub ac_identity_residual: f64,
    /// Largest absolute residual of the two gap identities over the
    /// coordinate axes and every requested direction.
    pub gap_residual_max: f64,
}

/// Everything `sbl bounds` reports, in output order.
#[derive(Debug, Serialize)]
pub struct BoundReportJson {
    pub shape: String,
    pub params: BTreeMap<String, f64>,
    pub grid: Vec<usize>,
    pub reilly: f64,
    pub pr1_at: Vec<DirectionValue>,
    pub pr2_at: Vec<DirectionValue>,
    pub best_pr1: BestPr1Json,
    pub best_pr2: BestPr2Json,
    pub q: QJson,
    pub identities: IdentitiesJson,
    pub mesh_lambda1: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ScanRow {
    pub direction: Vec<f64>,
    pub q: f64,
    pub pr1: f64,
    pub pr2: f64,
}

#[derive(Debug, Serialize)]
pub struct ScanJson {
    pub shape: String,
    pub params: BTreeMap<String, f64>,
    pub grid: Vec<usize>,
    pub rows: Vec<ScanRow>,
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub r_major: f64,
    pub reilly: f64,
    pub best_pr1: f64,
    pub best_pr2: f64,
    pub mesh_lambda1: f64,
    pub regime: String,
}

#[derive(Debug, Serialize)]
pub struct TableJson {
    pub grid: Vec<usize>,
    pub mesh: [usize; 2],
    pub rows: Vec<TableRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct MeshJson {
    pub source: String,
    pub params: BTreeMap<String, f64>,
    pub resolution: Option<[usize; 2]>,
    pub vertices: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    pub total_area: f64,
    pub lambda1: f64,
}

#[derive(Debug, Serialize)]
pub struct QformJson {
    pub shape: String,
    pub params: BTreeMap<String, f64>,
    pub grid: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors, one per entry, in eigenvalue order.
    pub eigenvectors: Vec<Vec<f64>>,
    pub inertia: [usize; 3],
    pub tau: f64,
    pub vanishes: bool,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are always serializable");
    s.push('\n');
    s
}

/// Shortest round-trip decimal; `NaN`/`inf` spelled out for CSV readers.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        x.to_string()
    }
}

/// Header plus records, comma separated with `.` decimals.
pub fn to_csv(header: &[String], records: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::from(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
