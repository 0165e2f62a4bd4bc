//! Elementary operations on similarity vectors.

use crate::error::{Error, Result};
use crate::types::SimilarityVector;

/// A min-max normalized vector. `degenerate` is set when the input was constant,
/// in which case `values` is all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// Affine map onto `[0, 1]`: the minimum becomes exactly 0 and the maximum exactly 1.
pub fn minmax_normalize(v: &[f64]) -> MinMax {
    let (min, max) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = max - min;
    if range <= 0.0 || !range.is_finite() {
        return MinMax {
            values: vec![0.0; v.len()],
            degenerate: true,
        };
    }
    MinMax {
        values: v.iter().map(|&x| (x - min) / range).collect(),
        degenerate: false,
    }
}

/// Typed wrapper over [`minmax_normalize`].
pub fn minmax_vector(v: &SimilarityVector) -> (SimilarityVector, bool) {
    let MinMax { values, degenerate } = minmax_normalize(v);
    (SimilarityVector::new(values).expect("length preserved"), degenerate)
}

/// Mean and sample (n - 1) standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standard score with the sample standard deviation. Constant input is an error;
/// callers keep the input as is in that case.
pub fn zscore_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let (mean, std) = mean_std(v);
    if std <= 0.0 || !std.is_finite() {
        return Err(Error::ConstantVector);
    }
    Ok(v.iter().map(|&x| (x - mean) / std).collect())
}

/// Index of the maximum, lowest index on ties. Returns 0 for an empty slice.
pub fn argmax_lowest_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The `k` best indices, highest score first, lower index first among equals.
pub fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let cmp = |&a: &usize, &b: &usize| v[b].total_cmp(&v[a]).then(a.cmp(&b));
    let k = k.min(v.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(
            minmax_normalize(&[2.0, 4.0, 6.0]),
            MinMax {
                values: vec![0.0, 0.5, 1.0],
                degenerate: false
            }
        );
        assert_eq!(
            minmax_normalize(&[1.0, 1.0, 1.0]),
            MinMax {
                values: vec![0.0, 0.0, 0.0],
                degenerate: true
            }
        );
        // (x + 3) / 4 per entry
        assert_eq!(
            minmax_normalize(&[-3.0, 1.0, 0.0, -1.0]).values,
            vec![0.0, 1.0, 0.75, 0.5]
        );
    }

    #[test]
    fn zscore_two_points_sample_convention() {
        // mean 1, sample std sqrt(2) -> -1/sqrt(2), +1/sqrt(2)
        let out = zscore_normalize(&[0.0, 2.0]).unwrap();
        let x = 1.0 / 2f64.sqrt();
        assert!((out[0] + x).abs() < 1e-12);
        assert!((out[1] - x).abs() < 1e-12);
    }

    #[test]
    fn zscore_mean_zero_std_one() {
        let out = zscore_normalize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let (m, s) = mean_std(&out);
        assert!(m.abs() < 1e-9);
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zscore_constant_is_error() {
        assert!(matches!(
            zscore_normalize(&[3.0, 3.0]),
            Err(Error::ConstantVector)
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_lowest_index(&[0.1, 0.9, 0.9]), 1);
        assert_eq!(argmax_lowest_index(&[0.0, 0.0, 0.1]), 2);
        assert_eq!(argmax_lowest_index(&[0.0, 0.0]), 0);
    }

    #[test]
    fn top_k_orders_and_breaks_ties() {
        let v = [0.5, 0.9, 0.1, 0.9, 0.5];
        assert_eq!(top_k(&v, 3), vec![1, 3, 0]);
        assert_eq!(top_k(&v, 10), vec![1, 3, 0, 4, 2]);
        assert_eq!(top_k(&v, 0), Vec::<usize>::new());
        assert_eq!(top_k(&v, 1)[0], argmax_lowest_index(&v));
    }

    fn non_constant() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 2..40)
            .prop_filter("non-constant", |v| v.iter().any(|&x| x != v[0]))
    }

    proptest! {
        #[test]
        fn minmax_affine_invariant(v in non_constant(), a in 0.01f64..100.0, b in -100f64..100.0) {
            let base = minmax_normalize(&v);
            let shifted: Vec<f64> = v.iter().map(|&x| a * x + b).collect();
            let moved = minmax_normalize(&shifted);
            prop_assert!(!moved.degenerate);
            for (x, y) in base.values.iter().zip(&moved.values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn minmax_hits_both_ends_and_is_idempotent(v in non_constant()) {
            let n = minmax_normalize(&v).values;
            prop_assert_eq!(n.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(n.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
            let again = minmax_normalize(&n).values;
            for (x, y) in n.iter().zip(&again) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn minmax_preserves_order(v in non_constant()) {
            let n = minmax_normalize(&v).values;
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(n[i] <= n[j]);
                    }
                }
            }
        }

        #[test]
        fn zscore_keeps_argmax(v in non_constant()) {
            let z = zscore_normalize(&v).unwrap();
            prop_assert_eq!(argmax_lowest_index(&z), argmax_lowest_index(&v));
        }
    }
}
