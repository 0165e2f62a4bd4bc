//! Seeded generator for technique ensembles with controllable perceptual aliasing.
//!
//! Every technique sees the same traverse: the ground-truth database index of query
//! `q` is `floor(q * D / Q)`. Each similarity vector is uniform noise in
//! `[0, noise_sigma)`, plus a peak of `peak_strength` at the ground-truth index
//! (unless the technique is failing on that query), plus a distractor plateau of
//! height `alias_strength` and half-width `alias_width` somewhere else. With
//! probability `alias_correlation` a technique's distractor sits at a location
//! shared by all techniques on that query; otherwise it gets a private location
//! that does not overlap any other distractor.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_ground_truth, write_matrix, Matrix, MatrixMeta, MatrixRole};
use crate::types::{GroundTruth, SimilarityTensor};

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// A value given once for all techniques or once per technique.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerTechnique<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Copy> PerTechnique<T> {
    pub fn get(&self, technique: usize) -> T {
        match self {
            PerTechnique::All(x) => *x,
            PerTechnique::Each(v) => v[technique],
        }
    }

    fn check_len(&self, n: usize, field: &str) -> Result<()> {
        match self {
            PerTechnique::Each(v) if v.len() != n => Err(Error::InvalidSpec(format!(
                "{field} has {} entries for {n} techniques",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

impl<T: Default> Default for PerTechnique<T> {
    fn default() -> Self {
        PerTechnique::All(T::default())
    }
}

/// Half-open query range `[start, end)`.
pub type QueryRange = [usize; 2];

fn default_drift_failure() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_techniques: usize,
    pub queries: usize,
    pub database_size: usize,
    /// Technique names; `t0`, `t1`, ... when absent.
    #[serde(default)]
    pub names: Option<Vec<String>>,
    pub peak_strength: PerTechnique<f64>,
    pub alias_strength: PerTechnique<f64>,
    /// Distractor plateau half-width in database indices; 0 gives a single spike.
    #[serde(default)]
    pub alias_width: PerTechnique<usize>,
    pub alias_correlation: f64,
    pub noise_sigma: f64,
    /// Per technique, query ranges where its ground-truth peak is suppressed.
    #[serde(default)]
    pub failure_schedule: Vec<Vec<QueryRange>>,
    /// Queries between condition shifts. At each shift every technique independently
    /// starts failing with probability `drift_failure_prob`; at least one keeps working.
    #[serde(default)]
    pub drift_period: Option<usize>,
    #[serde(default = "default_drift_failure")]
    pub drift_failure_prob: f64,
    /// Exclusion half-width the data is meant for; distractors stay `2 * r_window + 2`
    /// indices clear of the acceptable region.
    #[serde(default)]
    pub r_window: usize,
    /// Ground truth accepts `gt +/- gt_tolerance`.
    #[serde(default)]
    pub gt_tolerance: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Four techniques over `Q = 200`, `D = 100`. `t0` and `t1` are reliable but fail on
    /// complementary halves of the traverse; `t2` and `t3` carry a weak ground-truth
    /// peak under a stronger, broad distractor. Half of all distractors land on a shared
    /// location, so summing everything stacks aliasing.
    pub fn complementary(seed: u64) -> Self {
        Self {
            n_techniques: 4,
            queries: 200,
            database_size: 100,
            names: Some(vec![
                "steady_a".into(),
                "steady_b".into(),
                "aliased_c".into(),
                "aliased_d".into(),
            ]),
            peak_strength: PerTechnique::Each(vec![1.0, 1.0, 0.36, 0.36]),
            alias_strength: PerTechnique::Each(vec![0.5, 0.5, 0.6, 0.6]),
            alias_width: PerTechnique::All(4),
            alias_correlation: 0.5,
            noise_sigma: 0.01,
            failure_schedule: vec![vec![[0, 100]], vec![[100, 200]], vec![], vec![]],
            drift_period: None,
            drift_failure_prob: default_drift_failure(),
            r_window: 2,
            gt_tolerance: 0,
            seed,
        }
    }

    /// Five reliable techniques over `Q = 500`, `D = 100` whose failures reshuffle every
    /// `drift_period` queries. All distractors share one location per query, so a subset
    /// chosen before a shift breaks once most of its members start failing.
    pub fn drifting(seed: u64, drift_period: usize) -> Self {
        Self {
            n_techniques: 5,
            queries: 500,
            database_size: 100,
            names: None,
            peak_strength: PerTechnique::All(1.0),
            alias_strength: PerTechnique::All(0.6),
            alias_width: PerTechnique::All(4),
            alias_correlation: 1.0,
            noise_sigma: 0.05,
            failure_schedule: Vec::new(),
            drift_period: Some(drift_period),
            drift_failure_prob: 0.5,
            r_window: 2,
            gt_tolerance: 0,
            seed,
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.names
            .clone()
            .unwrap_or_else(|| (0..self.n_techniques).map(|i| format!("t{i}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let n = self.n_techniques;
        if n == 0 || self.queries == 0 {
            return bad("need at least one technique and one query".into());
        }
        if self.database_size <= 2 * self.r_window + 1 {
            return bad(format!(
                "database_size {} must exceed 2 * r_window + 1",
                self.database_size
            ));
        }
        if let Some(names) = &self.names {
            if names.len() != n {
                return bad(format!("{} names for {n} techniques", names.len()));
            }
        }
        self.peak_strength.check_len(n, "peak_strength")?;
        self.alias_strength.check_len(n, "alias_strength")?;
        self.alias_width.check_len(n, "alias_width")?;
        for t in 0..n {
            let p = self.peak_strength.get(t);
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("peak_strength {p} outside [0, 1]"));
            }
            let a = self.alias_strength.get(t);
            if !(a >= 0.0 && a.is_finite()) {
                return bad(format!("alias_strength {a} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.alias_correlation) {
            return bad("alias_correlation outside [0, 1]".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative".into());
        }
        if !self.failure_schedule.is_empty() && self.failure_schedule.len() != n {
            return bad(format!(
                "failure_schedule has {} entries for {n} techniques",
                self.failure_schedule.len()
            ));
        }
        for range in self.failure_schedule.iter().flatten() {
            if range[0] >= range[1] || range[1] > self.queries {
                return bad(format!(
                    "failure range {range:?} not within [0, {})",
                    self.queries
                ));
            }
        }
        if self.drift_period == Some(0) {
            return bad("drift_period must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.drift_failure_prob) {
            return bad("drift_failure_prob outside [0, 1]".into());
        }
        Ok(())
    }

    pub fn gt_index(&self, query: usize) -> usize {
        query * self.database_size / self.queries
    }
}

/// Picks a distractor centre whose plateau stays inside the database, clear of the
/// ground-truth region, and disjoint from the plateaus in `taken`.
fn place(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    gt: usize,
    width: usize,
    taken: &[(usize, usize)],
) -> Result<usize> {
    let d = spec.database_size;
    let clearance = 2 * spec.r_window.max(spec.gt_tolerance) + 2 + width;
    if d <= 2 * width {
        return Err(Error::InvalidSpec(format!(
            "alias_width {width} does not fit a database of {d}"
        )));
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let c = rng.gen_range(width..d - width);
        let clear_of_gt = c.abs_diff(gt) >= clearance;
        let clear_of_others = taken.iter().all(|&(o, w)| c.abs_diff(o) > width + w);
        if clear_of_gt && clear_of_others {
            return Ok(c);
        }
    }
    Err(Error::InvalidSpec(format!(
        "could not place {} disjoint distractors in a database of {d}",
        taken.len() + 1
    )))
}

/// Builds the tensor and ground truth described by `spec`. Bitwise reproducible per seed.
pub fn generate(spec: &SynthSpec) -> Result<(SimilarityTensor, GroundTruth)> {
    spec.validate()?;
    let (n, q_count, d) = (spec.n_techniques, spec.queries, spec.database_size);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut failing = vec![vec![false; q_count]; n];
    for (t, ranges) in spec.failure_schedule.iter().enumerate() {
        for r in ranges {
            failing[t][r[0]..r[1]].iter_mut().for_each(|f| *f = true);
        }
    }
    if let Some(period) = spec.drift_period {
        for start in (0..q_count).step_by(period) {
            let mut mask: Vec<bool> = (0..n)
                .map(|_| rng.gen_bool(spec.drift_failure_prob))
                .collect();
            if mask.iter().all(|&m| m) {
                mask[rng.gen_range(0..n)] = false;
            }
            for (t, &m) in mask.iter().enumerate() {
                if m {
                    let end = (start + period).min(q_count);
                    failing[t][start..end].iter_mut().for_each(|f| *f = true);
                }
            }
        }
    }

    let max_width = (0..n).map(|t| spec.alias_width.get(t)).max().unwrap_or(0);
    let mut data = vec![0.0; n * q_count * d];
    let mut gt_indices = Vec::with_capacity(q_count);
    for q in 0..q_count {
        let g = spec.gt_index(q);
        gt_indices.push(g);
        let shared = place(&mut rng, spec, g, max_width, &[])?;
        let mut taken = vec![(shared, max_width)];
        for t in 0..n {
            let width = spec.alias_width.get(t);
            let centre = if rng.gen_bool(spec.alias_correlation) {
                shared
            } else {
                let c = place(&mut rng, spec, g, width, &taken)?;
                taken.push((c, width));
                c
            };
            let v = &mut data[(t * q_count + q) * d..(t * q_count + q + 1) * d];
            if spec.noise_sigma > 0.0 {
                v.iter_mut()
                    .for_each(|x| *x = rng.gen_range(0.0..spec.noise_sigma));
            }
            if !failing[t][q] {
                v[g] += spec.peak_strength.get(t);
            }
            let a = spec.alias_strength.get(t);
            if a > 0.0 {
                for x in &mut v[centre - width..=centre + width] {
                    *x += a;
                }
            }
        }
    }

    let tensor = SimilarityTensor::from_flat(spec.names(), q_count, d, data)?;
    let gt = GroundTruth::from_tolerance(&gt_indices, spec.gt_tolerance, d)?;
    Ok((tensor, gt))
}

/// Writes one similarity matrix per technique plus `ground_truth.json` into `dir`.
/// Returns the payload paths in technique order.
pub fn write_dataset(dir: &Path, tensor: &SimilarityTensor, gt: &GroundTruth) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let (q, d) = (tensor.queries(), tensor.database_size());
    let mut paths = Vec::with_capacity(tensor.n_techniques());
    for tech in tensor.techniques() {
        let data: Vec<f32> = (0..q)
            .flat_map(|qq| tensor.slice(tech.index, qq).iter().map(|&x| x as f32))
            .collect();
        let matrix = Matrix::new(
            MatrixMeta {
                rows: q,
                cols: d,
                role: MatrixRole::Similarity,
                technique: tech.name.clone(),
            },
            data,
        )?;
        let path = dir.join(format!("{}.bin", tech.name));
        write_matrix(&path, &matrix)?;
        paths.push(path);
    }
    write_ground_truth(&dir.join("ground_truth.json"), gt)?;
    Ok(paths)
}
