//! Comparison strategies: unweighted fusion over fixed or random technique sets,
//! and ground-truth oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    normalize_techniques, parse_params, per_query, NoParams, RunContext, Strategy, StrategyResult,
};
use crate::error::{Error, Result};
use crate::fusion::{enumerate_subsets, fuse_subset, ratio_score};
use crate::types::{GroundTruth, SelectionRecord, SimilarityTensor};
use crate::vector::{argmax_lowest_index, top_k};

/// Unweighted sum of the min-max normalized `subset` for one query. Constant
/// techniques contribute zeros.
fn plain_fusion_record(
    ctx: &RunContext<'_>,
    query: usize,
    subset: &[usize],
    touched: &[usize],
) -> SelectionRecord {
    let normalized = normalize_techniques(ctx.tensor, query, subset);
    let positions: Vec<usize> = (0..subset.len()).collect();
    let fused = fuse_subset(&normalized, &positions);
    SelectionRecord {
        query,
        subset: subset.to_vec(),
        weights: vec![1.0; subset.len()],
        ratio_score: ratio_score(&fused, ctx.config.r_window, ctx.config.epsilon).ok(),
        match_index: Some(argmax_lowest_index(&fused)),
        fused_stats: Some(crate::vector::mean_std(&fused)),
        ranking: top_k(&fused, ctx.rank_depth),
        techniques_touched: touched.to_vec(),
        calibrated: false,
        error: None,
    }
}

/// Fuses every technique on every query with equal weight.
pub fn run_full_mpf(ctx: &RunContext<'_>) -> Result<StrategyResult> {
    ctx.config.validate_common(ctx.tensor.database_size())?;
    let all: Vec<usize> = (0..ctx.tensor.n_techniques()).collect();
    let records = per_query(ctx.tensor.queries(), |q| {
        Ok(plain_fusion_record(ctx, q, &all, &all))
    });
    Ok(StrategyResult::new(FullMpf::NAME, ctx, Value::Null, records))
}

/// Fuses the same fixed subset on every query.
pub fn run_static_subset(ctx: &RunContext<'_>, subset: &[usize]) -> Result<StrategyResult> {
    ctx.config.validate_common(ctx.tensor.database_size())?;
    let n = ctx.tensor.n_techniques();
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    if subset.is_empty() || subset.iter().any(|&t| t >= n) {
        return Err(Error::StrategyParams {
            strategy: StaticSubset::NAME.into(),
            reason: format!("subset {subset:?} must be non-empty and within 0..{n}"),
        });
    }
    let records = per_query(ctx.tensor.queries(), |q| {
        Ok(plain_fusion_record(ctx, q, &subset, &subset))
    });
    let params = serde_json::json!({ "subset": names_of(ctx.tensor, &subset) });
    Ok(StrategyResult::new(StaticSubset::NAME, ctx, params, records))
}

/// Fuses a uniformly drawn pair of non-constant techniques per query. The pair for
/// query `q` comes from stream `q` of a ChaCha8 generator keyed by the run seed, so
/// the sequence does not depend on scheduling.
pub fn run_random_pair(ctx: &RunContext<'_>) -> Result<StrategyResult> {
    ctx.config.validate_common(ctx.tensor.database_size())?;
    let n = ctx.tensor.n_techniques();
    if n < 2 {
        return Err(Error::TooFewTechniques {
            available: n,
            required: 2,
        });
    }
    let all: Vec<usize> = (0..n).collect();
    let seed = ctx.config.rng_seed;
    let records = per_query(ctx.tensor.queries(), |q| {
        let usable: Vec<usize> = normalize_techniques(ctx.tensor, q, &all)
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.degenerate)
            .map(|(i, _)| i)
            .collect();
        if usable.len() < 2 {
            return Err(Error::TooFewTechniques {
                available: usable.len(),
                required: 2,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(q as u64);
        let [a, b] = draw_pair(&mut rng, usable.len());
        let pair = [usable[a], usable[b]];
        Ok(plain_fusion_record(ctx, q, &pair, &all))
    });
    Ok(StrategyResult::new(RandomPair::NAME, ctx, Value::Null, records))
}

/// Uniform unordered pair of distinct indices in `0..m`, smaller first.
fn draw_pair(rng: &mut impl Rng, m: usize) -> [usize; 2] {
    let a = rng.gen_range(0..m);
    let mut b = rng.gen_range(0..m - 1);
    if b >= a {
        b += 1;
    }
    [a.min(b), a.max(b)]
}

fn recall_at_1(matches: impl Iterator<Item = (usize, usize)>, gt: &GroundTruth) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (q, m) in matches {
        if gt.is_evaluated(q) {
            total += 1;
            hit += usize::from(gt.is_correct(q, m));
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// The single technique with the highest Recall@1 under `gt` (lowest index on ties).
pub fn oracle_best_single(tensor: &SimilarityTensor, gt: &GroundTruth) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..tensor.n_techniques() {
        let r = recall_at_1(
            (0..tensor.queries()).map(|q| (q, argmax_lowest_index(tensor.slice(t, q)))),
            gt,
        );
        if r > best.1 {
            best = (t, r);
        }
    }
    best
}

/// The fixed subset of `size` techniques with the highest Recall@1 under `gt`,
/// found by exhausting every subset of that size (first in lexicographic order on ties).
pub fn oracle_best_static(
    tensor: &SimilarityTensor,
    gt: &GroundTruth,
    size: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = tensor.n_techniques();
    let candidates = if size == 1 {
        (0..n).map(|t| vec![t]).collect()
    } else {
        enumerate_subsets(n, size, size, &[])?
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in candidates {
        let r = recall_at_1(
            (0..tensor.queries()).map(|q| {
                let normalized = normalize_techniques(tensor, q, &subset);
                let positions: Vec<usize> = (0..subset.len()).collect();
                (q, argmax_lowest_index(&fuse_subset(&normalized, &positions)))
            }),
            gt,
        );
        if best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((subset, r));
        }
    }
    best.ok_or(Error::TooFewTechniques {
        available: n,
        required: size,
    })
}

fn names_of(tensor: &SimilarityTensor, subset: &[usize]) -> Vec<String> {
    subset
        .iter()
        .map(|&t| tensor.techniques()[t].name.clone())
        .collect()
}

fn resolve_names(tensor: &SimilarityTensor, strategy: &str, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            tensor
                .technique_index(name)
                .ok_or_else(|| Error::StrategyParams {
                    strategy: strategy.to_string(),
                    reason: format!("unknown technique `{name}`"),
                })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct FullMpf;

impl FullMpf {
    pub const NAME: &'static str = "full-mpf";

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        parse_params::<NoParams>(Self::NAME, params)?;
        Ok(Box::new(FullMpf))
    }
}

impl Strategy for FullMpf {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        run_full_mpf(ctx)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RandomPair;

impl RandomPair {
    pub const NAME: &'static str = "random-pair";

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        parse_params::<NoParams>(Self::NAME, params)?;
        Ok(Box::new(RandomPair))
    }
}

impl Strategy for RandomPair {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        run_random_pair(ctx)
    }
}

/// Either an explicit member list or an oracle search over subsets of a given size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSubsetParams {
    #[serde(default)]
    pub subset: Option<Vec<String>>,
    /// Pick the best subset of this size using ground truth.
    #[serde(default)]
    pub oracle_size: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct StaticSubset {
    params: StaticSubsetParams,
}

impl StaticSubset {
    pub const NAME: &'static str = "static-subset";

    pub fn new(params: StaticSubsetParams) -> Result<Self> {
        match (&params.subset, params.oracle_size) {
            (Some(_), None) | (None, Some(_)) => Ok(Self { params }),
            _ => Err(Error::StrategyParams {
                strategy: Self::NAME.into(),
                reason: "exactly one of `subset` or `oracle_size` is required".into(),
            }),
        }
    }

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        Ok(Box::new(Self::new(parse_params(Self::NAME, params)?)?))
    }
}

impl Strategy for StaticSubset {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Value {
        serde_json::to_value(&self.params).unwrap_or(Value::Null)
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        let subset = match (&self.params.subset, self.params.oracle_size) {
            (Some(names), _) => resolve_names(ctx.tensor, Self::NAME, names)?,
            (None, Some(size)) => {
                let gt = ctx
                    .ground_truth
                    .ok_or_else(|| Error::MissingGroundTruth(Self::NAME.into()))?;
                oracle_best_static(ctx.tensor, gt, size)?.0
            }
            (None, None) => unreachable!("validated in StaticSubset::new"),
        };
        let mut result = run_static_subset(ctx, &subset)?;
        if let Value::Object(map) = &mut result.params {
            if let Some(size) = self.params.oracle_size {
                map.insert("oracle_size".into(), size.into());
            }
        }
        Ok(result)
    }
}

/// Runs the technique with the best Recall@1 alone.
#[derive(Clone, Debug, Default)]
pub struct BestSingleOracle;

impl BestSingleOracle {
    pub const NAME: &'static str = "best-single-oracle";

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        parse_params::<NoParams>(Self::NAME, params)?;
        Ok(Box::new(BestSingleOracle))
    }
}

impl Strategy for BestSingleOracle {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        let gt = ctx
            .ground_truth
            .ok_or_else(|| Error::MissingGroundTruth(Self::NAME.into()))?;
        let (best, recall) = oracle_best_single(ctx.tensor, gt);
        let mut result = run_static_subset(ctx, &[best])?;
        result.strategy = Self::NAME.to_string();
        result.params = serde_json::json!({
            "technique": ctx.tensor.techniques()[best].name,
            "oracle_recall_at_1": recall,
        });
        Ok(result)
    }
}
