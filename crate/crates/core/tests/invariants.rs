use fairweigh::classifier::{predict_score, ModelParams};
use fairweigh::dataset::subgroup_stats;
use fairweigh::metrics::{delta_dp, delta_eo, delta_eop};
use fairweigh::reweigher::{
    compute_margins, compute_sample_weights, update_subgroup_weights, update_subgroup_weights_dp,
    update_subgroup_weights_eo, update_subgroup_weights_eop, FairnessCriterion, SubgroupWeights,
};
use proptest::prelude::*;

fn bits(m: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..2u8, m)
}

/// `(preds, labels, sensitive)` of one length.
fn instance(max_m: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
    (1..=max_m).prop_flat_map(|m| (bits(m), bits(m), bits(m)))
}

/// Rows covering all four `(y, a)` cells plus random extras, with margins.
fn populated(max_extra: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<f64>)> {
    (0..=max_extra).prop_flat_map(|extra| {
        let m = extra + 4;
        (
            bits(extra),
            bits(extra),
            prop::collection::vec(0.0..0.5f64, m),
        )
            .prop_map(|(mut y, mut a, phi)| {
                y.extend([0, 0, 1, 1]);
                a.extend([0, 1, 0, 1]);
                (y, a, phi)
            })
    })
}

fn positive_weights() -> impl Strategy<Value = SubgroupWeights> {
    prop::array::uniform2(prop::array::uniform2(0.01..100.0f64)).prop_map(SubgroupWeights)
}

fn flip(v: &[u8]) -> Vec<u8> {
    v.iter().map(|b| 1 - b).collect()
}

proptest! {
    #[test]
    fn scores_in_open_unit_interval(coef in prop::collection::vec(-3.0..3.0f64, 3),
                                    row in prop::collection::vec(-3.0..3.0f64, 3),
                                    b in -3.0..3.0f64) {
        // |logit| ≤ 30 here; beyond about 36.7 the score rounds to exactly 1
        let p = ModelParams { coefficients: coef, intercept: b, feature_names: vec![] };
        let s = predict_score(&p, &row).unwrap();
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn eo_dominates_eop((p, y, a) in instance(20)) {
        if let (Ok(eo), Ok(eop)) = (delta_eo(&p, &y, &a), delta_eop(&p, &y, &a)) {
            prop_assert!(eo >= eop);
        }
    }

    #[test]
    fn gaps_ignore_group_naming((p, y, a) in instance(20)) {
        let fa = flip(&a);
        prop_assert_eq!(delta_dp(&p, &a).ok(), delta_dp(&p, &fa).ok());
        prop_assert_eq!(delta_eo(&p, &y, &a).ok(), delta_eo(&p, &y, &fa).ok());
        prop_assert_eq!(delta_eop(&p, &y, &a).ok(), delta_eop(&p, &y, &fa).ok());
    }

    #[test]
    fn constant_and_perfect_predictors((_, y, a) in instance(20), c in 0..2u8) {
        let constant = vec![c; a.len()];
        if let Ok(g) = delta_dp(&constant, &a) {
            prop_assert_eq!(g, 0.0);
        }
        if let Ok(g) = delta_eo(&y, &y, &a) {
            prop_assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn sample_weights_positive_and_normalized(
        (y, a, phi) in populated(30),
        w in positive_weights(),
        eta in 0.0..5.0f64,
        c in 0..3usize,
    ) {
        let stats = subgroup_stats(&y, &a).unwrap();
        let out = compute_sample_weights(&w, &stats, &phi, &y, &a, eta, FairnessCriterion::ALL[c]).unwrap();
        prop_assert!(out.iter().all(|&v| v > 0.0));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn smaller_margin_gets_more_weight(
        (y, a, phi) in populated(30),
        w in positive_weights(),
        eta in 0.1..5.0f64,
    ) {
        let stats = subgroup_stats(&y, &a).unwrap();
        let c = FairnessCriterion::EqualizedOdds;
        let out = compute_sample_weights(&w, &stats, &phi, &y, &a, eta, c).unwrap();
        let flat = compute_sample_weights(&w, &stats, &phi, &y, &a, 0.0, c).unwrap();
        for i in 0..y.len() {
            for j in 0..y.len() {
                if (y[i], a[i]) != (y[j], a[j]) {
                    continue;
                }
                if phi[i] < phi[j] {
                    prop_assert!(out[i] > out[j]);
                }
                prop_assert!((flat[i] - flat[j]).abs() <= 1e-15 * flat[i]);
            }
        }
    }

    #[test]
    fn margins_bounded(scores in prop::collection::vec(0.0..=1.0f64, 1..30), d in 0.05..0.95f64) {
        for phi in compute_margins(&scores, d) {
            prop_assert!((0.0..=d.max(1.0 - d)).contains(&phi));
        }
    }

    #[test]
    fn larger_alpha_damps_toward_one(
        (p, y, a) in instance(12),
        alpha in 0.0..1e4f64,
        factor in 1.0..100.0f64,
        c in 0..3usize,
    ) {
        let crit = FairnessCriterion::ALL[c];
        let one = SubgroupWeights::ones();
        let lo = update_subgroup_weights(crit, &one, &p, &y, &a, alpha);
        let hi = update_subgroup_weights(crit, &one, &p, &y, &a, alpha * factor + 1.0);
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            for (l, h) in lo.0.iter().flatten().zip(hi.0.iter().flatten()) {
                prop_assert!((h - 1.0).abs() <= (l - 1.0).abs() * (1.0 + 1e-12));
                // never overshoots past 1
                prop_assert!((h - 1.0) * (l - 1.0) >= 0.0);
            }
        }
    }

    #[test]
    fn eo_positive_class_is_eop((p, y, a) in instance(12), w in positive_weights(), alpha in 0.0..100.0f64) {
        let eo = update_subgroup_weights_eo(&w, &p, &y, &a, alpha);
        let eop = update_subgroup_weights_eop(&w, &p, &y, &a, alpha);
        match (eo, eop) {
            (Ok(eo), Ok(eop)) => {
                prop_assert_eq!(eo.0[1], eop.0[1]);
                prop_assert_eq!(eop.0[0], w.0[0]);
            }
            // an empty negative cell can fail EO alone
            (Err(_), _) => {}
            (Ok(_), Err(e)) => prop_assert!(false, "EOP failed where EO succeeded: {e}"),
        }
    }

    #[test]
    fn independence_is_a_fixed_point(k in 1..6usize, alpha in 0.0..1e3f64) {
        // each (ŷ, a) cell holds k rows: predictions independent of the group
        let mut p = Vec::new();
        let mut a = Vec::new();
        for (pv, av) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            p.extend(std::iter::repeat_n(pv, k));
            a.extend(std::iter::repeat_n(av, k));
        }
        let w = update_subgroup_weights_dp(&SubgroupWeights::ones(), &p, &a, alpha).unwrap();
        prop_assert_eq!(w, SubgroupWeights::ones());
    }
}
