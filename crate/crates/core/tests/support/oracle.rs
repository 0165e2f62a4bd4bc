//! Straightforward reference implementations used to cross-check the library.
//!
//! Written without reference to the library's internals: subsets come from
//! bitmasks, the runner-up is found by scanning every index, and ties are broken
//! by comparing (size, member list) tuples.

#![allow(dead_code)]

pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return None;
    }
    Some(v.iter().map(|x| (x - lo) / (hi - lo)).collect())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn ratio(v: &[f64], r: usize, eps: f64) -> Option<f64> {
    let a = argmax(v);
    let mut runner_up: Option<f64> = None;
    for (i, &x) in v.iter().enumerate() {
        let far = if i > a { i - a > r } else { a - i > r };
        if far && runner_up.is_none_or(|m| x > m) {
            runner_up = Some(x);
        }
    }
    runner_up.map(|m| v[a] / if m > eps { m } else { eps })
}

fn sum_members(normalized: &[Option<Vec<f64>>], members: &[usize]) -> Vec<f64> {
    let d = normalized.iter().flatten().next().map_or(0, |v| v.len());
    let mut s = vec![0.0; d];
    for &m in members {
        let v = normalized[m].as_ref().unwrap();
        for i in 0..d {
            s[i] += v[i];
        }
    }
    s
}

/// Best subset by ratio score over all subsets of usable techniques with size in
/// `[min, max]`; ties prefer fewer members, then the lexicographically smaller list.
pub fn best_subset(
    raw: &[&[f64]],
    r: usize,
    eps: f64,
    min: usize,
    max: usize,
) -> Option<(Vec<usize>, f64)> {
    best_subset_with(raw, r, eps, min, max, false)
}

/// As [`best_subset`]; with `list_order` ties go to the lexicographically smallest
/// member list regardless of size.
pub fn best_subset_with(
    raw: &[&[f64]],
    r: usize,
    eps: f64,
    min: usize,
    max: usize,
    list_order: bool,
) -> Option<(Vec<usize>, f64)> {
    let n = raw.len();
    let normalized: Vec<Option<Vec<f64>>> = raw.iter().map(|v| normalize(v)).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if members.len() < min || members.len() > max {
            continue;
        }
        if members.iter().any(|&m| normalized[m].is_none()) {
            continue;
        }
        let score = ratio(&sum_members(&normalized, &members), r, eps)?;
        let replace = match &best {
            None => true,
            Some((b, s)) => {
                let smaller = if list_order {
                    members < *b
                } else {
                    (members.len(), members.clone()) < (b.len(), b.clone())
                };
                score > *s || (score == *s && smaller)
            }
        };
        if replace {
            best = Some((members, score));
        }
    }
    best
}

/// One calibrated frame: best subset, per-member ratio weights, weighted match.
pub struct Frame {
    pub subset: Vec<usize>,
    pub score: f64,
    pub weights: Vec<f64>,
    pub match_index: usize,
}

pub fn dyn_frame(raw: &[&[f64]], r: usize, eps: f64) -> Option<Frame> {
    let (subset, score) = best_subset(raw, r, eps, 2, raw.len())?;
    let normalized: Vec<Vec<f64>> = subset.iter().map(|&m| normalize(raw[m]).unwrap()).collect();
    let weights: Vec<f64> = normalized.iter().map(|v| ratio(v, r, eps)).collect::<Option<_>>()?;
    let mut fused = vec![0.0; raw[0].len()];
    for (v, w) in normalized.iter().zip(&weights) {
        for i in 0..fused.len() {
            fused[i] += w * v[i];
        }
    }
    Some(Frame {
        subset,
        score,
        weights,
        match_index: argmax(&fused),
    })
}

/// Plain sum of every non-constant technique.
pub fn full_sum_match(raw: &[&[f64]]) -> usize {
    let normalized: Vec<Option<Vec<f64>>> = raw.iter().map(|v| normalize(v)).collect();
    let usable: Vec<usize> = (0..raw.len()).filter(|&i| normalized[i].is_some()).collect();
    argmax(&sum_members(&normalized, &usable))
}
