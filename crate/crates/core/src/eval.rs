//! Recall@K, ratio-score histograms split by match correctness, and calibration
//! frequency sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{run_dyn_mpf, RunContext, StrategyResult};
use crate::error::{Error, Result};
use crate::types::{FusionConfig, GroundTruth, SimilarityTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query: usize,
    /// Valid record with a non-empty ground-truth set.
    pub evaluated: bool,
    /// Rank (0-based) of the first acceptable index in the query's ranking.
    pub first_hit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub strategy: String,
    pub valid_queries: usize,
    pub recall_at: BTreeMap<usize, f64>,
    pub per_query: Vec<QueryOutcome>,
}

impl RecallReport {
    pub fn recall(&self, k: usize) -> Option<f64> {
        self.recall_at.get(&k).copied()
    }

    /// `None` for queries that were not evaluated.
    pub fn correct_at(&self, query: usize, k: usize) -> Option<bool> {
        self.per_query
            .iter()
            .find(|o| o.query == query)
            .filter(|o| o.evaluated)
            .map(|o| o.first_hit.is_some_and(|r| r < k))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,K,recall\n");
        self.append_csv_rows(&mut out);
        out
    }

    pub fn append_csv_rows(&self, out: &mut String) {
        for (k, r) in &self.recall_at {
            let _ = writeln!(out, "{},{k},{r}", self.strategy);
        }
    }
}

/// Fraction of evaluated queries whose top-K ranking contains an acceptable index.
///
/// Invalid records and queries with an empty acceptable set are left out of both
/// numerator and denominator.
pub fn recall_at_k(result: &StrategyResult, gt: &GroundTruth, ks: &[usize]) -> Result<RecallReport> {
    if ks.contains(&0) {
        return Err(Error::InvalidConfig("Recall@K needs K >= 1".into()));
    }
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let mut records: Vec<_> = result.records.iter().collect();
    records.sort_by_key(|r| r.query);

    let mut per_query = Vec::with_capacity(records.len());
    for rec in records {
        let evaluated = rec.is_valid() && gt.is_evaluated(rec.query);
        let first_hit = if evaluated {
            let hit = rec.ranking.iter().position(|&i| gt.is_correct(rec.query, i));
            let needed = k_max.min(result.database_size);
            if hit.is_none() && rec.ranking.len() < needed {
                return Err(Error::MissingRanking {
                    query: rec.query,
                    k: k_max,
                });
            }
            hit
        } else {
            None
        };
        per_query.push(QueryOutcome {
            query: rec.query,
            evaluated,
            first_hit,
        });
    }

    let valid = per_query.iter().filter(|o| o.evaluated).count();
    let recall_at = ks
        .iter()
        .map(|&k| {
            let hits = per_query
                .iter()
                .filter(|o| o.evaluated && o.first_hit.is_some_and(|r| r < k))
                .count();
            let recall = if valid == 0 {
                0.0
            } else {
                hits as f64 / valid as f64
            };
            (k, recall)
        })
        .collect();
    Ok(RecallReport {
        strategy: result.strategy.clone(),
        valid_queries: valid,
        recall_at,
        per_query,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliasingHistogram {
    pub strategy: String,
    /// `bins + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub correct: Vec<usize>,
    pub incorrect: Vec<usize>,
    pub mean_ratio_correct: Option<f64>,
    pub mean_ratio_incorrect: Option<f64>,
}

impl AliasingHistogram {
    pub fn total(&self) -> usize {
        self.correct.iter().sum::<usize>() + self.incorrect.iter().sum::<usize>()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,correct,incorrect\n");
        for i in 0..self.correct.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.correct[i],
                self.incorrect[i]
            );
        }
        out
    }
}

/// Histogram of the per-query ratio score, split by whether the top-1 match is acceptable.
/// Queries without a ratio score, invalid records and queries without ground truth are skipped.
pub fn aliasing_histogram(
    result: &StrategyResult,
    gt: &GroundTruth,
    bins: usize,
) -> Result<AliasingHistogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let samples: Vec<(f64, bool)> = result
        .records
        .iter()
        .filter(|r| r.is_valid() && gt.is_evaluated(r.query))
        .filter_map(|r| {
            let m = r.match_index?;
            r.ratio_score.map(|s| (s, gt.is_correct(r.query, m)))
        })
        .collect();

    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if samples.is_empty() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();

    let mut correct = vec![0; bins];
    let mut incorrect = vec![0; bins];
    for &(s, ok) in &samples {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        if ok {
            correct[b] += 1;
        } else {
            incorrect[b] += 1;
        }
    }
    let mean = |want: bool| {
        let v: Vec<f64> = samples.iter().filter(|s| s.1 == want).map(|s| s.0).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(AliasingHistogram {
        strategy: result.strategy.clone(),
        edges,
        correct,
        incorrect,
        mean_ratio_correct: mean(true),
        mean_ratio_incorrect: mean(false),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub frame_separation: usize,
    pub report: RecallReport,
}

/// Runs Dyn-MPF once per calibration interval and evaluates each run.
pub fn frame_separation_sweep(
    tensor: &SimilarityTensor,
    gt: &GroundTruth,
    config: &FusionConfig,
    f_values: &[usize],
    ks: &[usize],
) -> Result<Vec<SweepPoint>> {
    if let Some(&f) = f_values.iter().find(|&&f| f == 0) {
        return Err(Error::InvalidConfig(format!(
            "frame separation must be positive, got {f}"
        )));
    }
    let depth = ks.iter().copied().max().unwrap_or(1);
    f_values
        .iter()
        .map(|&f| {
            let cfg = FusionConfig {
                frame_separation: f,
                ..config.clone()
            };
            let ctx = RunContext::new(tensor, &cfg).with_rank_depth(depth);
            let report = recall_at_k(&run_dyn_mpf(&ctx)?, gt, ks)?;
            Ok(SweepPoint {
                frame_separation: f,
                report,
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint], ks: &[usize]) -> String {
    let mut out = String::from("frame_separation,valid_queries");
    for k in ks {
        let _ = write!(out, ",recall_at_{k}");
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{},{}", p.frame_separation, p.report.valid_queries);
        for k in ks {
            let _ = write!(out, ",{}", p.report.recall(*k).unwrap_or(0.0));
        }
        out.push('\n');
    }
    out
}
