//! Domain types shared by every stage of the pipeline.

use std::collections::HashSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position and label of one technique inside a [`SimilarityTensor`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TechniqueId {
    pub index: usize,
    pub name: String,
}

/// Scores of one query against every database entry; larger is more similar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimilarityVector(Vec<f64>);

impl SimilarityVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        check_scores(&scores)?;
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimilarityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimilarityVector {
    type Error = Error;

    fn try_from(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores)
    }
}

impl From<SimilarityVector> for Vec<f64> {
    fn from(v: SimilarityVector) -> Self {
        v.0
    }
}

/// Length >= 2 and every entry finite.
pub(crate) fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.len() < 2 {
        return Err(Error::VectorTooShort { len: scores.len() });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    Ok(())
}

/// Technique x query x database similarity scores, stored densely in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTensor {
    techniques: Vec<TechniqueId>,
    queries: usize,
    database_size: usize,
    data: Vec<f64>,
}

impl SimilarityTensor {
    /// Builds a tensor from a flat technique-major buffer.
    pub fn from_flat(
        names: Vec<String>,
        queries: usize,
        database_size: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate technique name `{name}`"
                )));
            }
        }
        if queries == 0 {
            return Err(Error::DimensionMismatch("tensor has no queries".into()));
        }
        let expected = names.len() * queries * database_size;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} values for {} x {queries} x {database_size}, got {}",
                names.len(),
                data.len()
            )));
        }
        if database_size < 2 {
            return Err(Error::VectorTooShort { len: database_size });
        }
        if let Some(pos) = data.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteValue {
                index: pos % database_size,
            });
        }
        let techniques = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| TechniqueId { index, name })
            .collect();
        Ok(Self {
            techniques,
            queries,
            database_size,
            data,
        })
    }

    pub fn techniques(&self) -> &[TechniqueId] {
        &self.techniques
    }

    pub fn names(&self) -> Vec<String> {
        self.techniques.iter().map(|t| t.name.clone()).collect()
    }

    pub fn n_techniques(&self) -> usize {
        self.techniques.len()
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn database_size(&self) -> usize {
        self.database_size
    }

    pub fn technique_index(&self, name: &str) -> Option<usize> {
        self.techniques.iter().position(|t| t.name == name)
    }

    /// Raw scores of `technique` for `query`.
    pub fn slice(&self, technique: usize, query: usize) -> &[f64] {
        let start = (technique * self.queries + query) * self.database_size;
        &self.data[start..start + self.database_size]
    }

    /// Copy of the tensor with `f` applied to every slice in place.
    pub fn map_slices(&self, mut f: impl FnMut(usize, usize, &mut [f64])) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, chunk) in data.chunks_mut(self.database_size).enumerate() {
            f(i / self.queries, i % self.queries, chunk);
        }
        Self::from_flat(self.names(), self.queries, self.database_size, data)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Equal ratio scores resolve to the lexicographically first member list.
    LowestIndex,
    /// Equal ratio scores resolve to the smaller subset, then lexicographic order.
    #[default]
    SmallestSubsetThenLexicographic,
}

/// How per-technique weights are assigned before the final weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Each member is weighted by its own ratio score.
    #[default]
    Ratio,
    /// Every member gets weight 1.
    Uniform,
}

fn default_frame_separation() -> usize {
    1
}
fn default_min_subset() -> usize {
    2
}
fn default_epsilon() -> f64 {
    1e-12
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    /// Half-width, in database indices, of the region excluded around the best match.
    #[serde(default)]
    pub r_window: usize,
    /// Calibrate every `frame_separation` queries.
    #[serde(default = "default_frame_separation")]
    pub frame_separation: usize,
    #[serde(default = "default_min_subset")]
    pub min_subset_size: usize,
    /// `None` means the number of techniques.
    #[serde(default)]
    pub max_subset_size: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub weighting: Weighting,
    /// Standard-score the final weighted vector.
    #[serde(default = "default_true")]
    pub zscore_output: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            r_window: 0,
            frame_separation: default_frame_separation(),
            min_subset_size: default_min_subset(),
            max_subset_size: None,
            epsilon: default_epsilon(),
            rng_seed: 0,
            tie_break: TieBreak::default(),
            weighting: Weighting::default(),
            zscore_output: true,
        }
    }
}

impl FusionConfig {
    pub fn max_subset_size_for(&self, n_techniques: usize) -> usize {
        self.max_subset_size.unwrap_or(n_techniques)
    }

    /// Checks the parameters every strategy depends on.
    pub fn validate_common(&self, database_size: usize) -> Result<()> {
        if self.frame_separation == 0 {
            return Err(Error::InvalidConfig(
                "frame_separation must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.r_window >= database_size {
            return Err(Error::InvalidConfig(format!(
                "r_window {} must be smaller than the database size {database_size}",
                self.r_window
            )));
        }
        Ok(())
    }

    /// Full validation including subset-size bounds.
    pub fn validate(&self, n_techniques: usize, database_size: usize) -> Result<()> {
        self.validate_common(database_size)?;
        let max = self.max_subset_size_for(n_techniques);
        if self.min_subset_size < 2 {
            return Err(Error::InvalidConfig(
                "min_subset_size must be at least 2".into(),
            ));
        }
        if self.min_subset_size > max || max > n_techniques {
            return Err(Error::InvalidConfig(format!(
                "subset size bounds must satisfy {} <= {max} <= {n_techniques}",
                self.min_subset_size
            )));
        }
        Ok(())
    }
}

/// Per query, the database indices accepted as a correct match.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    acceptable: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn new(mut acceptable: Vec<Vec<usize>>, database_size: usize) -> Result<Self> {
        for (q, set) in acceptable.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&i| i >= database_size) {
                return Err(Error::InvalidGroundTruth(format!(
                    "query {q}: index {bad} outside database of size {database_size}"
                )));
            }
        }
        Ok(Self { acceptable })
    }

    /// Expands `(index, tolerance)` pairs to `{index - tol ..= index + tol}` clipped to the database.
    pub fn from_tolerance(indices: &[usize], tolerance: usize, database_size: usize) -> Result<Self> {
        let sets = indices
            .iter()
            .map(|&g| {
                let lo = g.saturating_sub(tolerance);
                let hi = (g + tolerance).min(database_size.saturating_sub(1));
                (lo..=hi).collect()
            })
            .collect();
        Self::new(sets, database_size)
    }

    pub fn queries(&self) -> usize {
        self.acceptable.len()
    }

    pub fn acceptable(&self, query: usize) -> &[usize] {
        self.acceptable.get(query).map_or(&[], Vec::as_slice)
    }

    /// Queries with an empty acceptable set are not evaluated.
    pub fn is_evaluated(&self, query: usize) -> bool {
        !self.acceptable(query).is_empty()
    }

    pub fn is_correct(&self, query: usize, index: usize) -> bool {
        self.acceptable(query).binary_search(&index).is_ok()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let acceptable = self
            .acceptable
            .iter()
            .map(|set| {
                let mut s: Vec<usize> = set.iter().map(|&i| perm[i]).collect();
                s.sort_unstable();
                s
            })
            .collect();
        Self { acceptable }
    }
}

/// Outcome of one strategy on one query.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRecord {
    pub query: usize,
    /// Technique indices, ascending.
    pub subset: Vec<usize>,
    /// Weight of each `subset` member, same order.
    pub weights: Vec<f64>,
    pub ratio_score: Option<f64>,
    pub match_index: Option<usize>,
    /// Mean and sample standard deviation of the fused vector before the final normalization.
    pub fused_stats: Option<(f64, f64)>,
    /// Database indices ordered best first, truncated to the ranking depth.
    pub ranking: Vec<usize>,
    /// Techniques whose similarity vectors were read for this query.
    pub techniques_touched: Vec<usize>,
    pub calibrated: bool,
    pub error: Option<String>,
}

impl SelectionRecord {
    pub fn invalid(query: usize, error: &Error) -> Self {
        Self {
            query,
            subset: Vec::new(),
            weights: Vec::new(),
            ratio_score: None,
            match_index: None,
            fused_stats: None,
            ranking: Vec::new(),
            techniques_touched: Vec::new(),
            calibrated: false,
            error: Some(error.to_string()),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none() && self.match_index.is_some()
    }

    pub fn weight_of(&self, technique: usize) -> Option<f64> {
        self.subset
            .iter()
            .position(|&m| m == technique)
            .map(|i| self.weights[i])
    }
}
