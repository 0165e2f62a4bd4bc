//! Per-query orchestration of fusion strategies over a traverse.
//!
//! Each strategy implements [`Strategy`] and is registered by name in a
//! [`StrategyRegistry`]; the CLI and the evaluation harness pick strategies by
//! name at runtime.

mod baselines;
mod dyn_mpf;
mod hier;
mod output;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{FusionConfig, GroundTruth, SelectionRecord, SimilarityTensor};
use crate::vector::{minmax_normalize, MinMax};

pub use baselines::{
    oracle_best_single, oracle_best_static, run_full_mpf, run_random_pair, run_static_subset,
    BestSingleOracle, FullMpf, RandomPair, StaticSubset, StaticSubsetParams,
};
pub use dyn_mpf::{run_dyn_mpf, DynMpf};
pub use hier::{default_tier_sizes, run_hier_mpf, HierMpf, HierParams};
pub use output::{RecordDocument, ResultDocument};

/// Default number of ranked database indices kept per query.
pub const DEFAULT_RANK_DEPTH: usize = 25;

/// Everything a strategy may read while running.
#[derive(Clone, Copy, Debug)]
pub struct RunContext<'a> {
    pub tensor: &'a SimilarityTensor,
    pub config: &'a FusionConfig,
    pub ground_truth: Option<&'a GroundTruth>,
    pub rank_depth: usize,
}

impl<'a> RunContext<'a> {
    pub fn new(tensor: &'a SimilarityTensor, config: &'a FusionConfig) -> Self {
        Self {
            tensor,
            config,
            ground_truth: None,
            rank_depth: DEFAULT_RANK_DEPTH,
        }
    }

    pub fn with_ground_truth(mut self, gt: &'a GroundTruth) -> Self {
        self.ground_truth = Some(gt);
        self
    }

    pub fn with_rank_depth(mut self, depth: usize) -> Self {
        self.rank_depth = depth.max(1);
        self
    }
}

/// Output of one strategy over a whole traverse: one record per query, in query order.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyResult {
    pub strategy: String,
    pub techniques: Vec<String>,
    pub database_size: usize,
    pub config: FusionConfig,
    pub params: Value,
    pub records: Vec<SelectionRecord>,
}

impl StrategyResult {
    pub(crate) fn new(
        strategy: &str,
        ctx: &RunContext<'_>,
        params: Value,
        mut records: Vec<SelectionRecord>,
    ) -> Self {
        records.sort_by_key(|r| r.query);
        Self {
            strategy: strategy.to_string(),
            techniques: ctx.tensor.names(),
            database_size: ctx.tensor.database_size(),
            config: ctx.config.clone(),
            params,
            records,
        }
    }

    pub fn match_indices(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.match_index).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_valid()).count()
    }
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Strategy-specific parameters, echoed into the result.
    fn params(&self) -> Value {
        Value::Null
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult>;
}

/// Builds a strategy from its per-strategy manifest parameters (`null` when absent).
pub type StrategyFactory = fn(&Value) -> Result<Box<dyn Strategy>>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in strategy.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        let builtins: [(&str, StrategyFactory); 6] = [
            (DynMpf::NAME, DynMpf::from_params),
            (FullMpf::NAME, FullMpf::from_params),
            (RandomPair::NAME, RandomPair::from_params),
            (HierMpf::NAME, HierMpf::from_params),
            (StaticSubset::NAME, StaticSubset::from_params),
            (BestSingleOracle::NAME, BestSingleOracle::from_params),
        ];
        for (name, f) in builtins {
            r.register(name, f).expect("builtin names are unique");
        }
        r
    }

    pub fn register(&mut self, name: &str, factory: StrategyFactory) -> Result<()> {
        if self.factories.contains_key(name) {
            return Err(Error::DuplicateStrategy(name.to_string()));
        }
        self.factories.insert(name.to_string(), factory);
        Ok(())
    }

    pub fn create(&self, name: &str, params: &Value) -> Result<Box<dyn Strategy>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))?;
        factory(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn parse_params<T: serde::de::DeserializeOwned + Default>(
    strategy: &str,
    params: &Value,
) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| Error::StrategyParams {
        strategy: strategy.to_string(),
        reason: e.to_string(),
    })
}

/// Min-max normalizes the given techniques' slices for one query.
pub(crate) fn normalize_techniques(
    tensor: &SimilarityTensor,
    query: usize,
    techniques: &[usize],
) -> Vec<MinMax> {
    techniques
        .iter()
        .map(|&t| minmax_normalize(tensor.slice(t, query)))
        .collect()
}

/// Maps every query through `frame` in parallel; errors become invalid records.
pub(crate) fn per_query(
    queries: usize,
    frame: impl Fn(usize) -> Result<SelectionRecord> + Sync,
) -> Vec<SelectionRecord> {
    (0..queries)
        .into_par_iter()
        .map(|q| frame(q).unwrap_or_else(|e| SelectionRecord::invalid(q, &e)))
        .collect()
}

/// Parameters of strategies that take none.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NoParams {}
