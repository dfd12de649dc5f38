//! Randomised properties of the building blocks.

use adadetect::adadetect::NullSplit;
use adadetect::conformal::{break_ties, empirical_pvalues, pvalues_from_scores, ScoredSplit};
use adadetect::mtest::{adaptive_bh, bh_rejections, storey_pi0};
use adadetect::simlab::{fdp, sample_least_favorable, tdp};
use adadetect::{run_adadetect, split_nts, PValues, Pi0Method, Points, ScorerConfig, SplitDataset, SplitPolicy};
use proptest::prelude::*;

fn coarse_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    // few distinct values, so ties are common
    prop::collection::vec((-4i32..4).prop_map(|v| v as f64 * 0.5), 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn tie_breaking_separates_and_keeps_order(scores in coarse_scores(60), seed in any::<u64>()) {
        let out = break_ties(&scores, seed);
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn tie_breaking_handles_values_ulps_apart(steps in prop::collection::vec(0u8..4, 2..400), seed in any::<u64>()) {
        // large tie groups sitting a few ulps from each other
        let scores: Vec<f64> = steps
            .iter()
            .map(|&k| (0..k).fold(1.0f64, |x, _| x.next_up()))
            .collect();
        let out = break_ties(&scores, seed);
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn untied_scores_are_left_alone(raw in prop::collection::hash_set(-1000i32..1000, 1..50), seed in any::<u64>()) {
        let scores: Vec<f64> = raw.into_iter().map(f64::from).collect();
        prop_assert_eq!(break_ties(&scores, seed), scores);
    }

    #[test]
    fn pvalues_lie_on_the_grid_and_decrease_in_score(
        calib in coarse_scores(40),
        test in coarse_scores(40),
        seed in any::<u64>(),
    ) {
        let split = ScoredSplit::new(&calib, &test, seed).unwrap();
        let p = empirical_pvalues(&split).unwrap();
        let ell = calib.len() as f64;
        for (j, &v) in p.as_slice().iter().enumerate() {
            let scaled = v * (ell + 1.0);
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            prop_assert!(scaled.round() >= 1.0 && scaled.round() <= ell + 1.0);
            for (i, &w) in p.as_slice().iter().enumerate() {
                if split.test()[i] > split.test()[j] {
                    prop_assert!(w <= v);
                }
            }
        }
    }

    #[test]
    fn storey_bh_extends_bh_when_pi0_is_below_one(
        p in prop::collection::vec(0.0f64..=1.0, 1..80),
        alpha in 0.01f64..0.5,
        lambda in 0.1f64..0.9,
    ) {
        let pv = PValues::new(p).unwrap();
        let bh = bh_rejections(&pv, alpha).unwrap();
        let pi0 = storey_pi0(&pv, lambda).unwrap();
        let ad = adaptive_bh(&pv, alpha, Pi0Method::Storey { lambda }).unwrap();
        if pi0.value <= 1.0 {
            prop_assert!(bh.indices.iter().all(|i| ad.rejections.indices.contains(i)));
        }
        prop_assert!(ad.rejections.level_used <= 1.0);
    }

    #[test]
    fn bh_rejections_are_nested_in_alpha(
        p in prop::collection::vec(0.0f64..=1.0, 1..80),
        a in 0.01f64..0.5,
        b in 0.01f64..0.5,
    ) {
        let pv = PValues::new(p).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = bh_rejections(&pv, lo).unwrap();
        let large = bh_rejections(&pv, hi).unwrap();
        prop_assert!(small.indices.iter().all(|i| large.indices.contains(i)));
    }

    #[test]
    fn split_sizes_add_up(n in 0usize..40, m in 1usize..20, k in 0usize..45, shuffle in any::<Option<u64>>()) {
        let nulls = Points::from_scalars(&(0..n).map(|v| v as f64).collect::<Vec<_>>());
        let test = Points::from_scalars(&vec![0.5; m]);
        match split_nts(&nulls, &test, SplitPolicy::Explicit { k }, shuffle) {
            Ok(ds) => {
                prop_assert!(k <= n);
                prop_assert_eq!(ds.sizes(), NullSplit { k, ell: n - k, m });
                // the split is a partition of the nulls
                let mut all: Vec<f64> = ds.first_null().as_slice().iter().chain(ds.calib_null().as_slice()).copied().collect();
                all.sort_by(f64::total_cmp);
                prop_assert_eq!(all, nulls.as_slice().to_vec());
            }
            Err(_) => prop_assert!(k > n),
        }
    }

    #[test]
    fn fdp_and_tdp_are_proportions(novel in prop::collection::vec(any::<bool>(), 1..50), pick in prop::collection::vec(any::<bool>(), 50)) {
        let rejected: Vec<usize> = (0..novel.len()).filter(|&i| pick[i]).collect();
        let f = fdp(&rejected, &novel);
        let t = tdp(&rejected, &novel);
        prop_assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&t));
        if rejected.is_empty() {
            prop_assert_eq!(f, 0.0);
        }
        if novel.iter().all(|v| !v) {
            prop_assert_eq!(t, 0.0);
        }
    }

    #[test]
    fn least_favorable_draws_sit_on_the_grid(m0 in 1usize..12, extra in 0usize..8, ell in 1usize..40, seed in any::<u64>()) {
        let m = m0 + extra;
        let h0: Vec<usize> = (0..m0).collect();
        let p = sample_least_favorable(m, ell, &h0, 0, seed).unwrap();
        prop_assert_eq!(p.len(), m);
        for &v in &p {
            let scaled = v * (ell + 1) as f64;
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((scaled - scaled.round()).abs() < 1e-9 || v == 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn fixed_score_runs_match_plain_bh(
        calib in prop::collection::vec(-3.0f64..3.0, 1..60),
        test in prop::collection::vec(-3.0f64..6.0, 1..40),
        alpha in 0.05f64..0.5,
    ) {
        // the first coordinate is the score, so p-values follow directly
        let ds = SplitDataset::new(Points::empty(1), Points::from_scalars(&calib), Points::from_scalars(&test)).unwrap();
        let report = run_adadetect(&ds, &ScorerConfig::Linear { mu: vec![1.0] }, alpha, 0).unwrap();
        let bh = bh_rejections(&pvalues_from_scores(&report.calib_scores, &report.test_scores), alpha).unwrap();
        // continuous draws: no ties, so tie-breaking changes nothing
        prop_assert_eq!(report.rejections.indices, bh.indices);
    }
}
