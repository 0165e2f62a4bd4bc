use serde_json::Value;

use super::{normalize_techniques, parse_params, per_query, NoParams, RunContext, Strategy, StrategyResult};
use crate::error::{Error, Result};
use crate::fusion::{
    fuse_subset, ratio_score, select_best_subset, technique_weights, weighted_fuse_and_match,
    SubsetScore,
};
use crate::types::SelectionRecord;
use crate::vector::top_k;

/// Dynamic subset selection with periodic calibration and per-frame weighting.
#[derive(Clone, Debug, Default)]
pub struct DynMpf;

impl DynMpf {
    pub const NAME: &'static str = "dyn-mpf";

    pub fn from_params(params: &Value) -> Result<Box<dyn Strategy>> {
        parse_params::<NoParams>(Self::NAME, params)?;
        Ok(Box::new(DynMpf))
    }
}

impl Strategy for DynMpf {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<StrategyResult> {
        run_dyn_mpf(ctx)
    }
}

/// Runs the traverse. Query `q` re-selects the subset when `q % F == 0`; other
/// queries reuse the latest successful calibration and only read that subset's
/// similarity vectors. Weights and the match are recomputed on every query.
pub fn run_dyn_mpf(ctx: &RunContext<'_>) -> Result<StrategyResult> {
    let tensor = ctx.tensor;
    let config = ctx.config;
    let n = tensor.n_techniques();
    config.validate(n, tensor.database_size())?;
    let f = config.frame_separation;
    let all: Vec<usize> = (0..n).collect();

    use rayon::prelude::*;
    let calibrations: Vec<Result<SubsetScore>> = (0..tensor.queries())
        .into_par_iter()
        .step_by(f)
        .map(|q| select_best_subset(&normalize_techniques(tensor, q, &all), config))
        .collect();

    // subset in force for each calibration block
    let mut cached: Vec<Option<Vec<usize>>> = Vec::with_capacity(calibrations.len());
    for cal in &calibrations {
        let prev = cached.last().cloned().flatten();
        cached.push(match cal {
            Ok(s) => Some(s.subset.clone()),
            Err(_) => prev,
        });
    }

    let records = per_query(tensor.queries(), |q| {
        let block = q / f;
        let calibrated = q % f == 0;
        let subset = match &calibrations[block] {
            Err(e) if calibrated || cached[block].is_none() => {
                return Ok(SelectionRecord::invalid(q, e));
            }
            _ => cached[block]
                .as_ref()
                .expect("a successful calibration caches its subset"),
        };

        let normalized = normalize_techniques(tensor, q, subset);
        // a cached member may be constant on this frame; it is dropped for the frame
        let (members, vectors): (Vec<usize>, Vec<&[f64]>) = subset
            .iter()
            .zip(&normalized)
            .filter(|(_, m)| !m.degenerate)
            .map(|(&t, m)| (t, m.values.as_slice()))
            .unzip();
        if members.len() < config.min_subset_size {
            return Err(Error::TooFewTechniques {
                available: members.len(),
                required: config.min_subset_size,
            });
        }

        let ratio = match (&calibrations[block], calibrated) {
            (Ok(s), true) => s.score,
            _ => {
                let kept: Vec<usize> = (0..subset.len())
                    .filter(|&i| !normalized[i].degenerate)
                    .collect();
                ratio_score(&fuse_subset(&normalized, &kept), config.r_window, config.epsilon)?
            }
        };
        let weights = technique_weights(&vectors, config)?;
        let fused = weighted_fuse_and_match(&vectors, &weights, config);
        Ok(SelectionRecord {
            query: q,
            subset: members,
            weights,
            ratio_score: Some(ratio),
            match_index: Some(fused.match_index),
            fused_stats: Some(fused.stats),
            ranking: top_k(&fused.raw, ctx.rank_depth),
            techniques_touched: if calibrated { all.clone() } else { subset.clone() },
            calibrated,
            error: None,
        })
    });

    Ok(StrategyResult::new(DynMpf::NAME, ctx, Value::Null, records))
}
