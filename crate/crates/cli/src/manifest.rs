//! The JSON run manifest and its flag overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dynfuse::ingest::{self, Metric, MatrixRole, SimilarityMatrix};
use dynfuse::{FusionConfig, GroundTruth, SimilarityTensor};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// One technique: either a similarity matrix, or query and database descriptors.
/// Files ending in `.csv` are read as CSV, anything else as a raw matrix with sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database: Option<PathBuf>,
    #[serde(default)]
    pub metric: Metric,
}

fn default_strategies() -> Vec<String> {
    vec!["dyn-mpf".into()]
}

fn default_recall_k() -> Vec<usize> {
    vec![1, 5, 10]
}

fn default_bins() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub techniques: Vec<TechniqueInput>,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub config: FusionConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    /// Per-strategy parameters keyed by strategy name.
    #[serde(default)]
    pub strategy_params: BTreeMap<String, Value>,
    #[serde(default = "default_recall_k")]
    pub recall_k: Vec<usize>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub rank_depth: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Command-line values that take precedence over the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub strategies: Vec<String>,
    pub r_window: Option<usize>,
    pub frame_separation: Option<usize>,
    pub recall_k: Option<Vec<usize>>,
}

impl RunManifest {
    /// Reads a manifest and makes its relative paths relative to the manifest's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::config("manifest", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for t in &mut m.techniques {
            t.similarity.as_mut().map(fix);
            t.query.as_mut().map(fix);
            t.database.as_mut().map(fix);
        }
        m.ground_truth.as_mut().map(fix);
        m.out.as_mut().map(fix);
        Ok(m)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if let Some(seed) = o.seed {
            self.config.rng_seed = seed;
        }
        if !o.strategies.is_empty() {
            self.strategies = o.strategies.clone();
        }
        if let Some(r) = o.r_window {
            self.config.r_window = r;
        }
        if let Some(f) = o.frame_separation {
            self.config.frame_separation = f;
        }
        if let Some(k) = &o.recall_k {
            self.recall_k = k.clone();
        }
    }

    /// Checks everything that can be checked without reading data.
    pub fn check(&self) -> CliResult<()> {
        if self.techniques.is_empty() {
            return Err(CliError::config("techniques", "at least one technique is required"));
        }
        for (i, t) in self.techniques.iter().enumerate() {
            let field = |f: &str| format!("techniques[{i}].{f}");
            match (&t.similarity, &t.query, &t.database) {
                (Some(p), None, None) => require_file(&field("similarity"), p)?,
                (None, Some(q), Some(d)) => {
                    require_file(&field("query"), q)?;
                    require_file(&field("database"), d)?;
                }
                _ => {
                    return Err(CliError::config(
                        format!("techniques[{i}]"),
                        "give either `similarity` or both `query` and `database`",
                    ))
                }
            }
        }
        match &self.ground_truth {
            None => return Err(CliError::config("ground_truth", "a ground-truth file is required")),
            Some(p) => require_file("ground_truth", p)?,
        }
        if self.strategies.is_empty() {
            return Err(CliError::config("strategies", "no strategy selected"));
        }
        if self.recall_k.is_empty() || self.recall_k.contains(&0) {
            return Err(CliError::config("recall_k", "values must be positive and non-empty"));
        }
        if self.histogram_bins == 0 {
            return Err(CliError::config("histogram_bins", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers", "must be positive"));
        }
        if self.out.is_none() {
            return Err(CliError::config("out", "no output directory given"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().expect("checked by RunManifest::check")
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        })
    }

    pub fn rank_depth(&self) -> usize {
        let kmax = self.recall_k.iter().copied().max().unwrap_or(1);
        self.rank_depth
            .unwrap_or(dynfuse::engine::DEFAULT_RANK_DEPTH)
            .max(kmax)
    }

    /// Loads every technique and the ground truth.
    pub fn load_data(&self) -> CliResult<(SimilarityTensor, GroundTruth)> {
        let mut matrices = Vec::with_capacity(self.techniques.len());
        let mut names = Vec::with_capacity(self.techniques.len());
        for t in &self.techniques {
            let (m, name) = load_technique(t)?;
            matrices.push(m);
            names.push(name);
        }
        let tensor = ingest::assemble_tensor(matrices, names)?;
        let gt_path = self.ground_truth.as_ref().expect("checked by RunManifest::check");
        let gt = ingest::load_ground_truth(gt_path, tensor.database_size())?;
        if gt.queries() != tensor.queries() {
            return Err(CliError::config(
                "ground_truth",
                format!(
                    "{} query entries for {} queries",
                    gt.queries(),
                    tensor.queries()
                ),
            ));
        }
        Ok((tensor, gt))
    }
}

fn require_file(field: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(
            field,
            format!("no such file: {}", path.display()),
        ))
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_one(path: &Path, role: MatrixRole, name: &str) -> CliResult<ingest::Matrix> {
    if is_csv(path) {
        Ok(ingest::load_csv(path, role, name)?)
    } else {
        Ok(ingest::load_matrix(path, None)?)
    }
}

fn load_technique(t: &TechniqueInput) -> CliResult<(SimilarityMatrix, String)> {
    if let Some(p) = &t.similarity {
        let name = t.name.clone().unwrap_or_else(|| stem(p));
        let m = load_one(p, MatrixRole::Similarity, &name)?;
        let name = t.name.clone().unwrap_or_else(|| m.meta.technique.clone());
        return Ok((SimilarityMatrix::from_matrix(&m), name));
    }
    let (qp, dp) = (t.query.as_ref().unwrap(), t.database.as_ref().unwrap());
    let name = t.name.clone().unwrap_or_else(|| stem(qp));
    let q = load_one(qp, MatrixRole::Query, &name)?;
    let d = load_one(dp, MatrixRole::Database, &name)?;
    let name = t.name.clone().unwrap_or_else(|| q.meta.technique.clone());
    Ok((ingest::compute_similarity(&q, &d, t.metric)?, name))
}
