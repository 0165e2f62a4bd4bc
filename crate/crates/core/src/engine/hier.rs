//! Coarse-to-fine fusion: each tier fuses its own techniques over the candidates
//! that survived the previous tier and keeps a fraction of them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_params, per_query, RunContext, Strategy, StrategyResult};
use crate::error::{Error, Result};
use crate::types::{SelectionRecord, SimilarityTensor};
use crate::vector::{argmax_lowest_index, mean_std, minmax_normalize, top_k};

const TIER_SHUFFLE_STREAM: u64 = 0x6869_6572;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierParams {
    /// Technique names per tier. Drawn from the run seed when absent.
    #[serde(default)]
    pub tiers: Option<Vec<Vec<String>>>,
    /// Tier sizes used for the random assignment; defaults to an even three-way split.
    #[serde(default)]
    pub tier_sizes: Option<Vec<usize>>,
    /// Fraction of candidates kept after each tier but the last.
    #[serde(default = "default_fractions")]
    pub shortlist_fractions: Vec<f64>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.1, 0.1]
}

impl Default for HierParams {
    fn default() -> Self {
        Self {
            tiers: None,
            tier_sizes: None,
            shortlist_fractions: default_fractions(),
        }
    }
}

/// Splits `n` techniques into `min(3, n)` tiers as evenly as possible, larger tiers
/// last (10 -> 3, 3, 4).
pub fn default_tier_sizes(n: usize) -> Vec<usize> {
    let tiers = n.min(3);
    if tiers == 0 {
        return Vec::new();
    }
    let (base, rem) = (n / tiers, n % tiers);
    (0..tiers)
        .map(|i| base + usize::from(i >= tiers - rem))
        .collect()
}

fn random_tiers(n: usize, sizes: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TIER_SHUFFLE_STREAM);
    order.shuffle(&mut rng);
    let mut tiers = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        let mut tier = order[start..start + s].to_vec();
        tier.sort_unstable();
        tiers.push(tier);
        start += s;
    }
    tiers
}

fn shortlist_len(fraction: f64, len: usize) -> usize {
    // the small slack keeps products like 0.1 * 100 from rounding up to 11
    let k = (fraction * len as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(len)
}

/// Resolved tier assignment as technique indices.
fn resolve_tiers(tensor: &SimilarityTensor, params: &HierParams, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = tensor.n_techniques();
    let bad = |reason: String| Error::StrategyParams {
        strategy: HierMpf::NAME.into(),
        reason,
    };
    let tiers = match &params.tiers {
        Some(named) => named
            .iter()
            .map(|tier| {
                tier.iter()
                    .map(|name| {
                        tensor
                            .technique_index(name)
                            .ok_or_else(|| bad(format!("unknown technique `{name}`")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?,
        None => {
            let sizes = params
                .tier_sizes
                .clone()
                .unwrap_or_else(|| default_tier_sizes(n));
            if sizes.iter().sum::<usize>() != n {
                return Err(bad(format!("tier sizes {sizes:?} do not sum to {n}")));
            }
            random_tiers(n, &sizes, seed)
        }
    };
    let mut seen = vec![false; n];
    for tier in &tiers {
        if tier.is_empty() {
            return Err(bad("empty tier".into()));
        }
        for &t in tier {
            if std::mem::replace(&mut seen[t], true) {
                return Err(bad(format!("technique {t} appears in more than one tier")));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(bad("tiers must cover every technique".into()));
    }
    if params.shortlist_fractions.len() + 1 != tiers.len() {
        return Err(bad(format!(
            "{} tiers need {} shortlist fractions, got {}",
            tiers.len(),
            tiers.len() - 1,
            params.shortlist_fractions.len()
        )));
    }
    if let Some(f) = params
        .shortlist_fractions
        .iter()
        .find(|&&f| !(f > 0.0 && f <= 1.0))
    {
        return Err(bad(format!("shortlist fraction {f} outside (0, 1]")));
    }
    Ok(tiers)
}

/// Runs the tiered fusion. The record's ranking lists the final tier's order
/// followed by candidates dropped at earlier tiers, latest tier first.
pub fn run_hier_mpf(ctx: &RunContext<'_>, params: &HierParams) -> Result<StrategyResult> {
    let tensor = ctx.tensor;
    ctx.config.validate_common(tensor.database_size())?;
    let tiers = resolve_tiers(tensor, params, ctx.config.rng_seed)?;
    let all: Vec<usize> = (0..tensor.n_techniques()).collect();

    let records = per_query(tensor.queries(), |q| {
        let mut candidates: Vec<usize> = (0..tensor.database_size()).collect();
        let mut dropped: Vec<Vec<usize>> = Vec::new();
        let mut fused = Vec::new();
        for (t, tier) in tiers.iter().enumerate() {
            fused = vec![0.0; candidates.len()];
            for &tech in tier {
                let slice = tensor.slice(tech, q);
                let scores: Vec<f64> = candidates.iter().map(|&c| slice[c]).collect();
                for (a, x) in fused.iter_mut().zip(minmax_normalize(&scores).values) {
                    *a += x;
                }
            }
            if t + 1 == tiers.len() {
                break;
            }
            let keep = shortlist_len(params.shortlist_fractions[t], candidates.len());
            let order = top_k(&fused, candidates.len());
            let mut survivors: Vec<usize> = order[..keep].iter().map(|&i| candidates[i]).collect();
            dropped.push(order[keep..].iter().map(|&i| candidates[i]).collect());
            survivors.sort_unstable();
            candidates = survivors;
        }

        let best = argmax_lowest_index(&fused);
        let ranking: Vec<usize> = top_k(&fused, fused.len())
            .into_iter()
            .map(|i| candidates[i])
            .chain(dropped.into_iter().rev().flatten())
            .take(ctx.rank_depth)
            .collect();
        Ok(SelectionRecord {
            query: q,
            subset: all.clone(),
            weights: vec![1.0; all.len()],
            ratio_score: windowed_ratio(&fused, &candidates, ctx.config.r_window, ctx.config.epsilon),
            match_index: Some(candidates[best]),
            fused_stats: Some(mean_std(&fused)),
            ranking,
            techniques_touched: all.clone(),
            calibrated: false,
            error: None,
        })
    });

    let tier_names: Vec<Vec<String>> = tiers
        .iter()
        .map(|tier| tier.iter().map(|&t| tensor.techniques()[t].name.clone()).collect())
        .collect();
    let params = serde_json::json!({
        "tiers": tier_names,
        "shortlist_fractions": params.shortlist_fractions,
    });
    Ok(StrategyResult::new(HierMpf::NAME, ctx, params, records))
}

/// Ratio over a sparse candidate set, with the window measured in global indices.
fn windowed_ratio(values: &[f64], global: &[usize], r_window: usize, epsilon: f64) -> Option<f64> {
    let best = argmax_lowest_index(values);
    let centre = global[best];
    values
        .iter()
        .zip(global)
        .filter(|(_, &g)| g.abs_diff(centre) > r_window)
        .map(|(&v, _)| v)
        .reduce(f64::max)
        .map(|runner_up| values[best] / runner_up.max(epsilon))
}

#[derive(Clone, Debug, Default)]
pub struct HierMpf {
    params: HierParams,
}

impl HierMpf {
    pub const NAME: &'static str = "hier-mpf";

    pub fn new(params: HierParams) -> Self {
        Self { params }
    }

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        Ok(Box::new(Self::new(parse_params(Self::NAME, params)?)))
    }
}

impl Strategy for HierMpf {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn params(&self) -> Value {
        serde_json::to_value(&self.params).unwrap_or(Value::Null)
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        run_hier_mpf(ctx, &self.params)
    }
}
