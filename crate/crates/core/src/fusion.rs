//! Ratio scoring, exhaustive subset search, confidence weighting and fused matching.
//!
//! All functions here work on one query at a time and expect min-max normalized
//! inputs (see [`crate::vector::minmax_normalize`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FusionConfig, TieBreak, Weighting};
use crate::vector::{argmax_lowest_index, mean_std, zscore_normalize, MinMax};

/// A candidate subset together with the ratio score of its summed vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    /// Technique indices, ascending.
    pub subset: Vec<usize>,
    pub score: f64,
}

/// Peak-to-runner-up ratio of `v`.
///
/// The runner-up is the largest value at an index more than `r_window` away from
/// the (lowest-index) argmax. The denominator is clamped below at `epsilon`.
pub fn ratio_score(v: &[f64], r_window: usize, epsilon: f64) -> Result<f64> {
    let best = argmax_lowest_index(v);
    let lo = best.saturating_sub(r_window);
    let hi = best.saturating_add(r_window).min(v.len().saturating_sub(1));
    let outside = v[..lo]
        .iter()
        .chain(v.get(hi + 1..).unwrap_or(&[]))
        .copied()
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    match outside {
        Some(runner_up) => Ok(v[best] / runner_up.max(epsilon)),
        None => Err(Error::WindowCoversAll {
            len: v.len(),
            argmax: best,
            r_window,
        }),
    }
}

/// Every subset of the non-degenerate techniques with size in `[min_size, max_size]`,
/// ordered by cardinality and then lexicographically by member indices.
pub fn enumerate_subsets(
    n: usize,
    min_size: usize,
    max_size: usize,
    degenerate: &[usize],
) -> Result<Vec<Vec<usize>>> {
    if min_size < 2 || min_size > max_size || max_size > n {
        return Err(Error::InvalidConfig(format!(
            "subset sizes must satisfy 2 <= {min_size} <= {max_size} <= {n}"
        )));
    }
    let usable: Vec<usize> = (0..n).filter(|i| !degenerate.contains(i)).collect();
    if usable.len() < min_size {
        return Err(Error::TooFewTechniques {
            available: usable.len(),
            required: min_size,
        });
    }
    let mut out = Vec::new();
    for size in min_size..=max_size.min(usable.len()) {
        push_combinations(&usable, size, &mut out);
    }
    Ok(out)
}

fn push_combinations(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    let n = items.len();
    let mut pos: Vec<usize> = (0..k).collect();
    loop {
        out.push(pos.iter().map(|&p| items[p]).collect());
        // advance the rightmost position that still has room
        let Some(i) = (0..k).rev().find(|&i| pos[i] < n - k + i) else {
            return;
        };
        pos[i] += 1;
        for j in i + 1..k {
            pos[j] = pos[j - 1] + 1;
        }
    }
}

/// Element-wise sum of the subset members, accumulated in ascending member order.
pub fn fuse_subset(normalized: &[MinMax], subset: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; normalized.first().map_or(0, |m| m.values.len())];
    sum_into(&mut out, subset.iter().map(|&m| normalized[m].values.as_slice()));
    out
}

fn sum_into<'a>(acc: &mut [f64], members: impl IntoIterator<Item = &'a [f64]>) {
    acc.iter_mut().for_each(|x| *x = 0.0);
    for v in members {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
}

/// Exhaustive search for the subset whose summed vector has the highest ratio score.
pub fn select_best_subset(normalized: &[MinMax], config: &FusionConfig) -> Result<SubsetScore> {
    let n = normalized.len();
    let degenerate: Vec<usize> = (0..n).filter(|&i| normalized[i].degenerate).collect();
    let max = config.max_subset_size_for(n);
    let candidates = enumerate_subsets(n, config.min_subset_size, max, &degenerate)?;

    let mut scratch = vec![0.0; normalized[0].values.len()];
    let mut best: Option<SubsetScore> = None;
    for subset in candidates {
        sum_into(
            &mut scratch,
            subset.iter().map(|&m| normalized[m].values.as_slice()),
        );
        let score = ratio_score(&scratch, config.r_window, config.epsilon)?;
        let better = match &best {
            None => true,
            Some(b) if score > b.score => true,
            Some(b) if score == b.score => {
                config.tie_break == TieBreak::LowestIndex && subset < b.subset
            }
            Some(_) => false,
        };
        if better {
            best = Some(SubsetScore { subset, score });
        }
    }
    Ok(best.expect("enumerate_subsets never returns an empty list"))
}

/// Per-member weights: each member's own ratio score, or all ones under uniform weighting.
pub fn technique_weights(members: &[&[f64]], config: &FusionConfig) -> Result<Vec<f64>> {
    match config.weighting {
        Weighting::Uniform => Ok(vec![1.0; members.len()]),
        Weighting::Ratio => members
            .iter()
            .map(|v| ratio_score(v, config.r_window, config.epsilon))
            .collect(),
    }
}

/// Result of the weighted fusion for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMatch {
    /// Weighted sum before the final normalization.
    pub raw: Vec<f64>,
    /// Standard-scored vector, or `raw` again when normalization is off or the sum is constant.
    pub normalized: Vec<f64>,
    pub match_index: usize,
    /// Mean and sample standard deviation of `raw`.
    pub stats: (f64, f64),
}

/// Weighted sum of the members, optional standard score, and the best match.
///
/// The match index is taken from the raw sum; the standard score is a positive
/// affine map and does not move it.
pub fn weighted_fuse_and_match(
    members: &[&[f64]],
    weights: &[f64],
    config: &FusionConfig,
) -> WeightedMatch {
    let len = members.first().map_or(0, |m| m.len());
    let mut raw = vec![0.0; len];
    for (v, &w) in members.iter().zip(weights) {
        for (a, &x) in raw.iter_mut().zip(v.iter()) {
            *a += w * x;
        }
    }
    let match_index = argmax_lowest_index(&raw);
    let stats = mean_std(&raw);
    let normalized = if config.zscore_output {
        zscore_normalize(&raw).unwrap_or_else(|_| raw.clone())
    } else {
        raw.clone()
    };
    WeightedMatch {
        raw,
        normalized,
        match_index,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::minmax_normalize;

    fn mm(v: &[f64]) -> MinMax {
        minmax_normalize(v)
    }

    #[test]
    fn ratio_examples() {
        // window around index 1 drops {0, 1, 2}; runner-up 0.8
        let s = ratio_score(&[0.1, 0.9, 0.3, 0.8], 1, 1e-12).unwrap();
        assert!((s - 1.125).abs() < 1e-15);
        let s = ratio_score(&[1.0, 0.0, 0.0, 0.0, 0.5], 1, 1e-12).unwrap();
        assert_eq!(s, 2.0);
        assert!(matches!(
            ratio_score(&[1.0, 0.0, 0.0], 2, 1e-12),
            Err(Error::WindowCoversAll { .. })
        ));
    }

    #[test]
    fn ratio_clamps_zero_denominator() {
        let s = ratio_score(&[1.0, 0.0, 0.0], 0, 1e-12).unwrap();
        assert_eq!(s, 1e12);
    }

    #[test]
    fn ratio_tied_peaks_far_apart_is_one() {
        assert_eq!(ratio_score(&[1.0, 0.0, 0.0, 1.0], 1, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn enumerate_three() {
        let s = enumerate_subsets(3, 2, 3, &[]).unwrap();
        assert_eq!(s, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]);
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(enumerate_subsets(10, 2, 10, &[]).unwrap().len(), 1013);
        for n in 2..=12usize {
            let expected = (1usize << n) - n - 1;
            assert_eq!(enumerate_subsets(n, 2, n, &[]).unwrap().len(), expected);
        }
    }

    #[test]
    fn enumerate_skips_degenerate() {
        let s = enumerate_subsets(4, 2, 4, &[2]).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|m| !m.contains(&2)));
        assert_eq!(s[0], vec![0, 1]);
    }

    #[test]
    fn enumerate_errors() {
        assert!(matches!(
            enumerate_subsets(3, 2, 3, &[0, 1]),
            Err(Error::TooFewTechniques {
                available: 1,
                required: 2
            })
        ));
        assert!(matches!(
            enumerate_subsets(3, 1, 3, &[]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(enumerate_subsets(3, 2, 4, &[]).is_err());
    }

    #[test]
    fn enumerate_size_bounds() {
        let s = enumerate_subsets(5, 3, 3, &[]).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|m| m.len() == 3));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fuse_examples() {
        let n = vec![mm(&[0.0, 1.0]), mm(&[1.0, 0.0])];
        assert_eq!(fuse_subset(&n, &[0, 1]), vec![1.0, 1.0]);
        let n = vec![mm(&[0.0, 0.5, 1.0]); 3];
        assert_eq!(fuse_subset(&n, &[0, 1, 2]), vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn select_pair_beats_disagreeing_singles() {
        // A peaks at 0, B peaks at 6, both rank index 3 second.
        let a = [1.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.3];
        let b = [0.3, 0.0, 0.0, 0.9, 0.0, 0.0, 1.0];
        let n = vec![mm(&a), mm(&b)];
        let cfg = FusionConfig {
            r_window: 1,
            ..Default::default()
        };
        let best = select_best_subset(&n, &cfg).unwrap();
        assert_eq!(best.subset, vec![0, 1]);
        // sum = [1.3, 0, 0, 1.8, 0, 0, 1.3]
        assert!((best.score - 1.8 / 1.3).abs() < 1e-12);
        let sum = fuse_subset(&n, &best.subset);
        assert_eq!(argmax_lowest_index(&sum), 3);
    }

    #[test]
    fn select_identical_techniques_returns_first_pair() {
        let v = [0.1, 0.7, 0.2, 1.0, 0.3];
        let n = vec![mm(&v); 4];
        let best = select_best_subset(&n, &FusionConfig::default()).unwrap();
        assert_eq!(best.subset, vec![0, 1]);
    }

    #[test]
    fn tie_break_policies_differ_on_exact_ties() {
        // Binary fractions keep every sum exact:
        // {0,1} = {0,2} -> 2 / 1.25 = 1.6, {1,2} -> 2 / 1 = 2, {0,1,2} -> 3 / 1.5 = 2
        let u = [0.0, 0.0, 0.0, 1.0, 1.0];
        let v = [0.0, 0.5, 0.25, 1.0, 0.25];
        let n = vec![mm(&u), mm(&v), mm(&v)];
        let smallest = select_best_subset(&n, &FusionConfig::default()).unwrap();
        assert_eq!(smallest.subset, vec![1, 2]);
        assert_eq!(smallest.score, 2.0);
        let cfg = FusionConfig {
            tie_break: TieBreak::LowestIndex,
            ..Default::default()
        };
        let lowest = select_best_subset(&n, &cfg).unwrap();
        assert_eq!(lowest.subset, vec![0, 1, 2]);
        assert_eq!(lowest.score, 2.0);
    }

    #[test]
    fn select_two_techniques_single_candidate() {
        let n = vec![mm(&[0.0, 1.0, 0.5]), mm(&[0.2, 0.1, 0.9])];
        let best = select_best_subset(&n, &FusionConfig::default()).unwrap();
        assert_eq!(best.subset, vec![0, 1]);
    }

    #[test]
    fn select_with_degenerate_leaves_too_few() {
        let n = vec![mm(&[0.0, 1.0]), mm(&[2.0, 2.0])];
        assert!(matches!(
            select_best_subset(&n, &FusionConfig::default()),
            Err(Error::TooFewTechniques { .. })
        ));
    }

    #[test]
    fn weights_examples() {
        let cfg = FusionConfig::default();
        let v: &[f64] = &[0.2, 1.0, 0.1, 0.0];
        let w = technique_weights(&[v, v], &cfg).unwrap();
        assert!((w[0] - 5.0).abs() < 1e-12);
        assert_eq!(w[0], w[1]);
        let spike: &[f64] = &[0.0, 1.0, 0.0];
        let w = technique_weights(&[spike], &cfg).unwrap();
        assert_eq!(w[0], 1.0 / 1e-12);
        let uniform = FusionConfig {
            weighting: Weighting::Uniform,
            ..cfg
        };
        assert_eq!(technique_weights(&[v, spike], &uniform).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn equal_weights_match_unweighted_argmax() {
        let a = mm(&[0.3, 0.9, 0.1, 0.5, 0.7]);
        let b = mm(&[0.8, 0.2, 0.4, 0.6, 0.1]);
        let members = [a.values.as_slice(), b.values.as_slice()];
        let m = weighted_fuse_and_match(&members, &[2.5, 2.5], &FusionConfig::default());
        let sum = fuse_subset(&[a, b], &[0, 1]);
        assert_eq!(m.match_index, argmax_lowest_index(&sum));
    }

    #[test]
    fn confident_member_dominates() {
        let a = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let b = [0.5, 0.52, 0.49, 0.5, 0.51, 1.0];
        let members = [a.as_slice(), b.as_slice()];
        let m = weighted_fuse_and_match(&members, &[10.0, 0.1], &FusionConfig::default());
        assert_eq!(m.match_index, 3);
        // raw = [0.05, 0.052, 0.049, 10.05, 0.051, 0.1]
        assert!((m.raw[3] - 10.05).abs() < 1e-12);
    }

    #[test]
    fn normalization_does_not_move_match() {
        let a = [0.2, 0.4, 0.9, 0.1];
        let b = [0.7, 0.3, 0.8, 0.0];
        let members = [a.as_slice(), b.as_slice()];
        let on = weighted_fuse_and_match(&members, &[1.5, 0.5], &FusionConfig::default());
        let off_cfg = FusionConfig {
            zscore_output: false,
            ..Default::default()
        };
        let off = weighted_fuse_and_match(&members, &[1.5, 0.5], &off_cfg);
        assert_eq!(on.match_index, off.match_index);
        assert_eq!(argmax_lowest_index(&on.normalized), on.match_index);
        assert_eq!(off.normalized, off.raw);
        let (mean, std) = mean_std(&on.normalized);
        assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_weighted_sum_keeps_raw() {
        let a = [0.5, 0.5, 0.5];
        let m = weighted_fuse_and_match(&[a.as_slice()], &[1.0], &FusionConfig::default());
        assert_eq!(m.normalized, m.raw);
        assert_eq!(m.match_index, 0);
    }
}
