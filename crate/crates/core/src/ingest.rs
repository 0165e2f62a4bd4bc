//! Loading descriptor and similarity matrices from disk.
//!
//! A matrix is stored as a headerless payload of little-endian `f32` values in
//! row-major order, next to a JSON sidecar `<name>.meta.json` carrying its shape.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GroundTruth, SimilarityTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixRole {
    Query,
    Database,
    Similarity,
}

/// Sidecar contents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub rows: usize,
    pub cols: usize,
    pub role: MatrixRole,
    pub technique: String,
}

/// A dense row-major matrix as read from disk. With role `query` or `database`
/// the rows are image descriptors; with role `similarity` they are per-query scores.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub meta: MatrixMeta,
    pub data: Vec<f32>,
}

pub type DescriptorMatrix = Matrix;

impl Matrix {
    pub fn new(meta: MatrixMeta, data: Vec<f32>) -> Result<Self> {
        if meta.rows.checked_mul(meta.cols) != Some(data.len()) {
            return Err(Error::DimensionMismatch(format!(
                "{} x {} matrix needs {} values, got {}",
                meta.rows,
                meta.cols,
                meta.rows.saturating_mul(meta.cols),
                data.len()
            )));
        }
        Ok(Self { meta, data })
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.meta.cols..(r + 1) * self.meta.cols]
    }
}

/// `dir/name.bin` -> `dir/name.meta.json`.
pub fn sidecar_path(payload: &Path) -> PathBuf {
    let stem = payload
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    payload.with_file_name(format!("{stem}.meta.json"))
}

pub fn read_meta(path: &Path) -> Result<MatrixMeta> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptHeader {
        path: sidecar,
        reason: e.to_string(),
    })
}

/// Reads a payload and its sidecar. When `expected` is given, the sidecar must agree with it.
pub fn load_matrix(path: &Path, expected: Option<&MatrixMeta>) -> Result<Matrix> {
    let meta = read_meta(path)?;
    if let Some(exp) = expected {
        if exp.rows != meta.rows || exp.cols != meta.cols || exp.role != meta.role {
            return Err(Error::CorruptHeader {
                path: sidecar_path(path),
                reason: format!(
                    "sidecar describes {} x {} {:?}, expected {} x {} {:?}",
                    meta.rows, meta.cols, meta.role, exp.rows, exp.cols, exp.role
                ),
            });
        }
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected_bytes = meta
        .rows
        .checked_mul(meta.cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::CorruptHeader {
            path: sidecar_path(path),
            reason: "shape overflows".into(),
        })?;
    if bytes.len() != expected_bytes {
        return Err(Error::ShapeMismatch {
            path: path.to_path_buf(),
            expected: expected_bytes,
            actual: bytes.len(),
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(index) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    Ok(Matrix { meta, data })
}

/// Writes the payload and its sidecar.
pub fn write_matrix(path: &Path, matrix: &Matrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.data.len() * 4);
    for x in &matrix.data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let text = serde_json::to_string_pretty(&matrix.meta).map_err(|e| Error::json(&sidecar, e))?;
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

/// Reads a CSV with a header row and one numeric row per image.
pub fn load_csv(path: &Path, role: MatrixRole, technique: &str) -> Result<Matrix> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let cols = reader.headers().map_err(csv_err)?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        for field in record.iter() {
            let x: f32 = field.trim().parse().map_err(|_| Error::CorruptHeader {
                path: path.to_path_buf(),
                reason: format!("row {rows}: `{field}` is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::NonFiniteValue { index: data.len() });
            }
            data.push(x);
        }
        rows += 1;
    }
    Matrix::new(
        MatrixMeta {
            rows,
            cols,
            role,
            technique: technique.to_string(),
        },
        data,
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Cosine,
    NegativeEuclidean,
}

/// Query x database similarity scores, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub queries: usize,
    pub database_size: usize,
    pub data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            queries: m.meta.rows,
            database_size: m.meta.cols,
            data: m.data.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.database_size..(q + 1) * self.database_size]
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scores every query descriptor against every database descriptor. Larger is more
/// similar under both metrics. Under cosine a zero-norm row scores 0 everywhere.
pub fn compute_similarity(q: &Matrix, db: &Matrix, metric: Metric) -> Result<SimilarityMatrix> {
    if q.meta.cols != db.meta.cols {
        return Err(Error::DimensionMismatch(format!(
            "query descriptors have dim {}, database descriptors {}",
            q.meta.cols, db.meta.cols
        )));
    }
    let d = db.meta.rows;
    let db_norms: Vec<f64> = (0..d).map(|r| norm(db.row(r))).collect();
    if metric == Metric::Cosine {
        for (r, _) in db_norms.iter().enumerate().filter(|(_, &n)| n == 0.0) {
            warn!("{}: database row {r} has zero norm", db.meta.technique);
        }
    }
    let mut data = vec![0.0; q.meta.rows * d];
    if d > 0 {
        data.par_chunks_mut(d).enumerate().for_each(|(qi, out)| {
            let qrow = q.row(qi);
            let qn = norm(qrow);
            if metric == Metric::Cosine && qn == 0.0 {
                warn!("{}: query row {qi} has zero norm", q.meta.technique);
            }
            for (j, o) in out.iter_mut().enumerate() {
                let drow = db.row(j);
                *o = match metric {
                    Metric::Cosine => {
                        if qn == 0.0 || db_norms[j] == 0.0 {
                            0.0
                        } else {
                            let dot: f64 = qrow
                                .iter()
                                .zip(drow)
                                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                                .sum();
                            dot / (qn * db_norms[j])
                        }
                    }
                    Metric::NegativeEuclidean => -qrow
                        .iter()
                        .zip(drow)
                        .map(|(&a, &b)| {
                            let diff = f64::from(a) - f64::from(b);
                            diff * diff
                        })
                        .sum::<f64>()
                        .sqrt(),
                };
            }
        });
    }
    Ok(SimilarityMatrix {
        queries: q.meta.rows,
        database_size: d,
        data,
    })
}

/// Stacks per-technique similarity matrices into a tensor.
pub fn assemble_tensor(
    per_technique: Vec<SimilarityMatrix>,
    names: Vec<String>,
) -> Result<SimilarityTensor> {
    let Some(first) = per_technique.first() else {
        return Err(Error::EmptyEnsemble);
    };
    if names.len() != per_technique.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} techniques",
            names.len(),
            per_technique.len()
        )));
    }
    let (q, d) = (first.queries, first.database_size);
    for (m, name) in per_technique.iter().zip(&names) {
        if m.queries != q || m.database_size != d {
            return Err(Error::DimensionMismatch(format!(
                "technique `{name}` is {} x {}, expected {q} x {d}",
                m.queries, m.database_size
            )));
        }
    }
    let data = per_technique.into_iter().flat_map(|m| m.data).collect();
    SimilarityTensor::from_flat(names, q, d, data)
}

pub fn load_ground_truth(path: &Path, database_size: usize) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sets: Vec<Vec<usize>> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    GroundTruth::new(sets, database_size)
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let text = serde_json::to_string(gt).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
