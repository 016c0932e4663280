//! Independent reference implementations shared by the oracle tests and the
//! acceptance suite. Nothing here calls into the code it checks.

#![allow(dead_code)]

use fairweigh::classifier::{gradient, weighted_loss, ModelParams, TrainSettings};
use fairweigh::dataset::{ColumnKind, Dataset};
use fairweigh::metrics::{delta_dp, delta_eo, delta_eop};
use fairweigh::reweigher::{update_subgroup_weights, FairnessCriterion, SubgroupWeights};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub preds: Vec<u8>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_m: usize) -> Instance {
    let m = rng.random_range(1..=max_m);
    let mut bits = || (0..m).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>();
    Instance {
        preds: bits(),
        labels: bits(),
        sensitive: bits(),
    }
}

/// `P(ŷ = 1 | rows matching cond)` by enumeration, `None` on an empty condition.
fn positive_rate(inst: &Instance, cond: impl Fn(usize) -> bool) -> Option<f64> {
    let rows: Vec<usize> = (0..inst.preds.len()).filter(|&i| cond(i)).collect();
    if rows.is_empty() {
        return None;
    }
    let hits = rows.iter().filter(|&&i| inst.preds[i] == 1).count();
    Some(hits as f64 / rows.len() as f64)
}

pub fn oracle_dp(inst: &Instance) -> Option<f64> {
    let r0 = positive_rate(inst, |i| inst.sensitive[i] == 0)?;
    let r1 = positive_rate(inst, |i| inst.sensitive[i] == 1)?;
    Some((r0 - r1).abs())
}

fn oracle_odds_term(inst: &Instance, y: u8) -> Option<f64> {
    let r0 = positive_rate(inst, |i| inst.labels[i] == y && inst.sensitive[i] == 0)?;
    let r1 = positive_rate(inst, |i| inst.labels[i] == y && inst.sensitive[i] == 1)?;
    Some((r0 - r1).abs())
}

pub fn oracle_eo(inst: &Instance) -> Option<f64> {
    Some(oracle_odds_term(inst, 0)?.max(oracle_odds_term(inst, 1)?))
}

pub fn oracle_eop(inst: &Instance) -> Option<f64> {
    oracle_odds_term(inst, 1)
}

/// Runs `n` random instances through the three gap functions and returns the
/// number of disagreements with the enumeration oracle.
pub fn metric_oracle_mismatches(seed: u64, n: usize, max_m: usize) -> usize {
    let mut rng = rng(seed);
    let mut bad = 0;
    for _ in 0..n {
        let inst = random_instance(&mut rng, max_m);
        let got = [
            delta_dp(&inst.preds, &inst.sensitive).ok(),
            delta_eo(&inst.preds, &inst.labels, &inst.sensitive).ok(),
            delta_eop(&inst.preds, &inst.labels, &inst.sensitive).ok(),
        ];
        let want = [oracle_dp(&inst), oracle_eo(&inst), oracle_eop(&inst)];
        if got != want {
            eprintln!("metric mismatch on {inst:?}: got {got:?}, want {want:?}");
            bad += 1;
        }
    }
    bad
}

/// Subgroup update written out cell by cell from the counting formulas.
pub fn oracle_update(
    criterion: FairnessCriterion,
    w: &[[f64; 2]; 2],
    inst: &Instance,
    alpha: f64,
) -> Option<[[f64; 2]; 2]> {
    let m = inst.preds.len();
    let count = |f: &dyn Fn(usize) -> bool| (0..m).filter(|&i| f(i)).count() as f64;
    let mut out = *w;
    for y in 0..2u8 {
        if criterion == FairnessCriterion::EqualOpportunity && y == 0 {
            continue;
        }
        for a in 0..2u8 {
            let (num, den) = match criterion {
                FairnessCriterion::DemographicParity => (
                    count(&|i| inst.preds[i] == y) * count(&|i| inst.sensitive[i] == a),
                    m as f64 * count(&|i| inst.preds[i] == y && inst.sensitive[i] == a),
                ),
                _ => (
                    count(&|i| inst.preds[i] == y && inst.labels[i] == y)
                        * count(&|i| inst.labels[i] == y && inst.sensitive[i] == a),
                    count(&|i| inst.labels[i] == y)
                        * count(&|i| {
                            inst.preds[i] == y && inst.labels[i] == y && inst.sensitive[i] == a
                        }),
                ),
            };
            if den + alpha == 0.0 {
                return None;
            }
            out[y as usize][a as usize] = w[y as usize][a as usize] * (num + alpha) / (den + alpha);
        }
    }
    Some(out)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Worst relative error of the library updates against [`oracle_update`];
/// `f64::INFINITY` if one side errors and the other does not.
pub fn update_oracle_max_error(seed: u64, n: usize, max_m: usize) -> f64 {
    let mut rng = rng(seed);
    let alphas = [0.0, 0.5, 1.0, 10.0, 1000.0];
    let mut worst = 0.0f64;
    for k in 0..n {
        let inst = random_instance(&mut rng, max_m);
        let w = [
            [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)],
            [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)],
        ];
        let alpha = alphas[rng.random_range(0..alphas.len())];
        let criterion = FairnessCriterion::ALL[k % 3];
        let got = update_subgroup_weights(
            criterion,
            &SubgroupWeights(w),
            &inst.preds,
            &inst.labels,
            &inst.sensitive,
            alpha,
        );
        match (got, oracle_update(criterion, &w, &inst, alpha)) {
            (Ok(g), Some(o)) => {
                for (gy, oy) in g.0.iter().zip(&o) {
                    for (ga, oa) in gy.iter().zip(oy) {
                        worst = worst.max(rel_err(*ga, *oa));
                    }
                }
            }
            (Err(_), None) => {}
            (g, o) => {
                eprintln!("update disagreement on {inst:?} alpha={alpha}: {g:?} vs {o:?}");
                return f64::INFINITY;
            }
        }
    }
    worst
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn dataset_from(features: Array2<f64>, labels: Vec<u8>, sensitive: Vec<u8>) -> Dataset {
    let d = features.ncols();
    Dataset::new(
        features,
        (0..d).map(|j| format!("x{j}")).collect(),
        vec![ColumnKind::Numeric; d],
        sensitive,
        labels,
    )
    .unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Dataset {
    let x = Array2::from_shape_vec((m, d), normal_vec(rng, m * d)).unwrap();
    let labels = (0..m).map(|_| rng.random_range(0..2u8)).collect();
    let sensitive = (0..m).map(|_| rng.random_range(0..2u8)).collect();
    dataset_from(x, labels, sensitive)
}

/// Worst norm-wise relative error `‖g − ĝ‖∞ / ‖g‖∞` between the analytic
/// gradient and central differences with step `h`, over `n` random
/// five-row batches.
pub fn gradient_check_max_error(seed: u64, n: usize, h: f64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let d = rng.random_range(1..=6);
        let ds = random_dataset(&mut rng, 5, d);
        let weights: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
        let mut params = ModelParams::zeros(d);
        params.coefficients = normal_vec(&mut rng, d);
        params.intercept = StandardNormal.sample(&mut rng);

        let g = gradient(&params, &ds, &weights).unwrap();
        let analytic: Vec<f64> = g
            .coefficients
            .iter()
            .copied()
            .chain([g.intercept])
            .collect();
        let numeric: Vec<f64> = (0..=d)
            .map(|j| {
                let shifted = |delta: f64| {
                    let mut p = params.clone();
                    if j < d {
                        p.coefficients[j] += delta;
                    } else {
                        p.intercept += delta;
                    }
                    weighted_loss(&p, &ds, &weights).unwrap()
                };
                (shifted(h) - shifted(-h)) / (2.0 * h)
            })
            .collect();
        let scale = analytic.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let diff = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        worst = worst.max(diff / scale);
    }
    worst
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Textbook mini-batch SGD on the mean cross-entropy, no sample weights:
/// each batch moves the parameters by `lr / batch_size` times the summed
/// per-row gradient. Epoch `e` visits rows in the order of a ChaCha8
/// shuffle seeded with `seed` on stream `e`.
pub fn unweighted_sgd(init: &ModelParams, ds: &Dataset, settings: &TrainSettings) -> ModelParams {
    let m = ds.len();
    let mut theta = init.coefficients.clone();
    let mut bias = init.intercept;
    let step = settings.learning_rate / settings.batch_size as f64;
    for epoch in settings.start_epoch..settings.start_epoch + settings.epochs {
        let mut order: Vec<usize> = (0..m).collect();
        if settings.shuffle {
            let mut r = ChaCha8Rng::seed_from_u64(settings.seed);
            r.set_stream(epoch as u64);
            order.shuffle(&mut r);
        }
        for batch in order.chunks(settings.batch_size) {
            let mut g = vec![0.0; theta.len()];
            let mut gb = 0.0;
            for &i in batch {
                let x = ds.row(i);
                let z = theta.iter().zip(x).fold(bias, |acc, (t, v)| acc + t * v);
                let r = logistic(z) - f64::from(ds.labels()[i]);
                for (gj, v) in g.iter_mut().zip(x) {
                    *gj += r * v;
                }
                gb += r;
            }
            for (t, gj) in theta.iter_mut().zip(&g) {
                *t -= step * gj;
            }
            bias -= step * gb;
        }
    }
    ModelParams {
        coefficients: theta,
        intercept: bias,
        feature_names: ds.feature_names().to_vec(),
    }
}
