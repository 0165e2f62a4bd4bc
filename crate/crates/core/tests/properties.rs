mod support;

use dynfuse::engine::{run_dyn_mpf, run_full_mpf, with_workers, RunContext, StrategyResult};
use dynfuse::eval::{frame_separation_sweep, recall_at_k};
use dynfuse::fusion::select_best_subset;
use dynfuse::synth::{generate, PerTechnique, SynthSpec};
use dynfuse::vector::minmax_normalize;
use dynfuse::{FusionConfig, GroundTruth, SimilarityTensor, Weighting};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle;

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, q: usize, d: usize) -> SimilarityTensor {
    let data = (0..n * q * d).map(|_| rng.gen::<f64>()).collect();
    SimilarityTensor::from_flat((0..n).map(|i| format!("t{i}")).collect(), q, d, data).unwrap()
}

fn slices(t: &SimilarityTensor, q: usize) -> Vec<&[f64]> {
    (0..t.n_techniques()).map(|i| t.slice(i, q)).collect()
}

#[test]
fn selection_matches_oracle_with_constant_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(3..=5);
        let d = rng.gen_range(8..=30);
        let r = rng.gen_range(0..=2);
        let mut raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        // knock out one technique
        let dead = rng.gen_range(0..n);
        raw[dead] = vec![0.25; d];
        let cfg = FusionConfig { r_window: r, ..Default::default() };
        let normalized: Vec<_> = raw.iter().map(|v| minmax_normalize(v)).collect();
        let got = select_best_subset(&normalized, &cfg).unwrap();
        let refs: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let (subset, score) = oracle::best_subset(&refs, r, cfg.epsilon, 2, n).unwrap();
        assert!(!got.subset.contains(&dead));
        assert_eq!(got.subset, subset);
        assert!((got.score - score).abs() <= 1e-12 * score.abs().max(1.0));
    }
}

#[test]
fn dyn_mpf_frames_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let (n, q, d) = (rng.gen_range(2..=5), rng.gen_range(1..=10), rng.gen_range(10..=40));
        let t = random_tensor(&mut rng, n, q, d);
        let cfg = FusionConfig { r_window: rng.gen_range(0..=3), ..Default::default() };
        let res = run_dyn_mpf(&RunContext::new(&t, &cfg)).unwrap();
        for rec in &res.records {
            let want = oracle::dyn_frame(&slices(&t, rec.query), cfg.r_window, cfg.epsilon).unwrap();
            assert_eq!(rec.subset, want.subset);
            assert_eq!(rec.match_index, Some(want.match_index));
            for (a, b) in rec.weights.iter().zip(&want.weights) {
                assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}

#[test]
fn full_mpf_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = random_tensor(&mut rng, 4, 20, 30);
    let cfg = FusionConfig::default();
    let res = run_full_mpf(&RunContext::new(&t, &cfg)).unwrap();
    for rec in &res.records {
        assert_eq!(rec.match_index, Some(oracle::full_sum_match(&slices(&t, rec.query))));
    }
}

fn recalls(res: &StrategyResult, gt: &GroundTruth) -> Vec<f64> {
    let r = recall_at_k(res, gt, &[1, 5, 10]).unwrap();
    [1, 5, 10].iter().map(|&k| r.recall(k).unwrap()).collect()
}

#[test]
fn recall_is_permutation_equivariant() {
    // index-space windows do not survive a permutation, so the window is off here
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, q, d) = (4, 40, 30);
    let t = random_tensor(&mut rng, n, q, d);
    let gt = GroundTruth::new((0..q).map(|_| vec![rng.gen_range(0..d)]).collect(), d).unwrap();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    // new position perm[i] holds old index i
    let permuted = t
        .map_slices(|_, _, v| {
            let old = v.to_vec();
            for (i, &p) in perm.iter().enumerate() {
                v[p] = old[i];
            }
        })
        .unwrap();
    let gt_p = gt.permuted(&perm);
    let cfg = FusionConfig::default();
    let ctx = RunContext::new(&t, &cfg).with_rank_depth(10);
    let ctx_p = RunContext::new(&permuted, &cfg).with_rank_depth(10);
    assert_eq!(
        recalls(&run_dyn_mpf(&ctx).unwrap(), &gt),
        recalls(&run_dyn_mpf(&ctx_p).unwrap(), &gt_p)
    );
    assert_eq!(
        recalls(&run_full_mpf(&ctx).unwrap(), &gt),
        recalls(&run_full_mpf(&ctx_p).unwrap(), &gt_p)
    );
}

#[test]
fn recall_is_monotone_in_k() {
    let (t, gt) = generate(&SynthSpec::complementary(9)).unwrap();
    let cfg = FusionConfig { r_window: 2, ..Default::default() };
    let ctx = RunContext::new(&t, &cfg);
    for res in [run_dyn_mpf(&ctx).unwrap(), run_full_mpf(&ctx).unwrap()] {
        let r = recalls(&res, &gt);
        assert!(r.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (t, _) = generate(&SynthSpec::drifting(3, 20)).unwrap();
    let cfg = FusionConfig { r_window: 2, frame_separation: 7, ..Default::default() };
    let ctx = RunContext::new(&t, &cfg);
    let one = with_workers(1, || run_dyn_mpf(&ctx)).unwrap().unwrap();
    let many = with_workers(8, || run_dyn_mpf(&ctx)).unwrap().unwrap();
    assert_eq!(one, many);
}

#[test]
fn steady_conditions_give_flat_sweep() {
    let mut spec = SynthSpec::drifting(4, 20);
    spec.drift_period = None;
    spec.alias_strength = PerTechnique::All(0.3);
    let (t, gt) = generate(&spec).unwrap();
    let cfg = FusionConfig { r_window: 2, ..Default::default() };
    let pts = frame_separation_sweep(&t, &gt, &cfg, &[1, 5, 10, 25, 50], &[1]).unwrap();
    for p in &pts {
        assert_eq!(p.report.recall(1), Some(1.0), "F = {}", p.frame_separation);
    }
}

#[test]
fn uniform_weighting_over_full_set_reproduces_full_mpf() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.gen_range(2..=6);
        let t = random_tensor(&mut rng, n, 15, 25);
        let cfg = FusionConfig {
            min_subset_size: n,
            max_subset_size: Some(n),
            weighting: Weighting::Uniform,
            ..Default::default()
        };
        let ctx = RunContext::new(&t, &cfg);
        assert_eq!(
            run_dyn_mpf(&ctx).unwrap().match_indices(),
            run_full_mpf(&ctx).unwrap().match_indices()
        );
    }
}
