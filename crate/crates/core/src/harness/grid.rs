//! Cross-validated selection of `(alpha, eta)` for the adaptive method.
//!
//! Folds are cut from the training split only, so the held-out test rows
//! never influence the chosen hyperparameters.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GridSpec};
use super::experiment::{evaluate, load_data, MeanStd};
use crate::dataset::{permutation, split, standardize, Dataset, Standardizer};
use crate::reweigher::{train_fair, ReweighConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub eta: f64,
    pub folds_used: usize,
    pub val_accuracy: MeanStd,
    pub val_gap: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: ReweighConfig,
    pub points: Vec<GridPoint>,
    pub folds_skipped: usize,
    /// Original row ids of every row used for fitting or validation.
    #[serde(skip)]
    pub visited_rows: BTreeSet<usize>,
}

/// Index of the selected point: among points whose mean validation gap is
/// within `tolerance` of the smallest, the most accurate one, ties going to
/// the lower `alpha` and then the lower `eta`.
pub fn select_best(points: &[GridPoint], tolerance: f64) -> Option<usize> {
    let min_gap = points
        .iter()
        .map(|p| p.val_gap.mean)
        .fold(f64::INFINITY, f64::min);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.val_gap.mean <= min_gap + tolerance)
        .min_by(|(_, p), (_, q)| {
            q.val_accuracy
                .mean
                .total_cmp(&p.val_accuracy.mean)
                .then(p.alpha.total_cmp(&q.alpha))
                .then(p.eta.total_cmp(&q.eta))
        })
        .map(|(i, _)| i)
}

struct Fold {
    train: Dataset,
    val: Dataset,
}

fn make_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let m = ds.len();
    if m < k {
        return Err(Error::invalid(format!("{m} rows cannot form {k} folds")));
    }
    let perm = permutation(m, seed);
    (0..k)
        .map(|f| {
            let (lo, hi) = (f * m / k, (f + 1) * m / k);
            let mut val_idx = perm[lo..hi].to_vec();
            let mut fit_idx: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
            val_idx.sort_unstable();
            fit_idx.sort_unstable();
            // rescale each fold on its own fitting rows
            let scaler = Standardizer::fit(&ds.select(&fit_idx));
            Ok(Fold {
                train: scaler.transform(&ds.select(&fit_idx))?,
                val: scaler.transform(&ds.select(&val_idx))?,
            })
        })
        .collect()
}

/// Grid search on an already split training set. `base` supplies every
/// setting except `alpha` and `eta`.
pub fn grid_search_on(
    train: &Dataset,
    base: &ReweighConfig,
    spec: &GridSpec,
    seed: u64,
) -> Result<GridOutcome> {
    spec.validate()?;
    let folds = make_folds(train, spec.folds, seed)?;
    let metric = base.criterion.metric();
    let configs: Vec<ReweighConfig> = spec
        .alphas
        .iter()
        .flat_map(|&alpha| {
            spec.etas.iter().map(move |&eta| ReweighConfig {
                alpha,
                eta,
                ..base.clone()
            })
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    // (accuracy, gap) per job, None when the fold cannot score the criterion
    let scores = jobs
        .par_iter()
        .map(|&(c, f)| -> Result<Option<(f64, f64)>> {
            let fold = &folds[f];
            let model = match train_fair(&fold.train, &configs[c], seed) {
                Ok((model, _)) => model,
                Err(Error::EmptyCell { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let report = evaluate(&model, &fold.val, base.d)?;
            Ok(report.get(metric).map(|gap| (report.accuracy, gap)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(configs.len());
    let mut folds_skipped = 0;
    for (c, cfg) in configs.iter().enumerate() {
        let (acc, gap): (Vec<f64>, Vec<f64>) = scores[c * folds.len()..(c + 1) * folds.len()]
            .iter()
            .flatten()
            .copied()
            .unzip();
        folds_skipped += folds.len() - acc.len();
        if acc.len() < 2 {
            log::warn!(
                "grid point alpha={} eta={} scored on {} fold(s); dropped",
                cfg.alpha,
                cfg.eta,
                acc.len()
            );
            continue;
        }
        points.push(GridPoint {
            alpha: cfg.alpha,
            eta: cfg.eta,
            folds_used: acc.len(),
            val_accuracy: MeanStd::of(&acc).expect("nonempty"),
            val_gap: MeanStd::of(&gap).expect("nonempty"),
        });
    }
    let best = select_best(&points, spec.tolerance)
        .ok_or_else(|| Error::invalid("no grid point could be scored on two or more folds"))?;
    let best = ReweighConfig {
        alpha: points[best].alpha,
        eta: points[best].eta,
        ..base.clone()
    };
    let visited_rows = folds
        .iter()
        .flat_map(|f| f.train.row_ids().iter().chain(f.val.row_ids()))
        .copied()
        .collect();
    Ok(GridOutcome {
        best,
        points,
        folds_skipped,
        visited_rows,
    })
}

/// Grid search on the training split of the config's first replication.
pub fn grid_search(cfg: &ExperimentConfig, spec: &GridSpec) -> Result<GridOutcome> {
    cfg.validate()?;
    let (ds, _) = load_data(cfg)?;
    let (train, test) = split(&ds, cfg.test_fraction, cfg.seed)?;
    let (train, _) = standardize(&train, &test)?;
    grid_search_on(&train, &cfg.reweigh_config(), spec, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(alpha: f64, eta: f64, acc: f64, gap: f64) -> GridPoint {
        let ms = |v| MeanStd {
            mean: v,
            std: 0.0,
            n: 3,
        };
        GridPoint {
            alpha,
            eta,
            folds_used: 3,
            val_accuracy: ms(acc),
            val_gap: ms(gap),
        }
    }

    #[test]
    fn selection_rule() {
        let pts = [
            point(0.0, 1.0, 0.90, 0.050),
            point(10.0, 1.0, 0.80, 0.010),
            point(100.0, 1.0, 0.82, 0.014),
            point(100.0, 2.0, 0.85, 0.016),
        ];
        // 0.016 is outside 0.010 + 0.005
        assert_eq!(select_best(&pts, 0.005), Some(2));
        assert_eq!(select_best(&pts, 0.0), Some(1));
        assert_eq!(select_best(&pts, 1.0), Some(0));
    }

    #[test]
    fn ties_prefer_lower_alpha_then_eta() {
        let pts = [
            point(100.0, 1.0, 0.8, 0.01),
            point(10.0, 2.0, 0.8, 0.01),
            point(10.0, 1.0, 0.8, 0.01),
        ];
        assert_eq!(select_best(&pts, 0.0), Some(2));
        assert_eq!(select_best(&[], 0.0), None);
    }

    #[test]
    fn folds_partition_training_rows() {
        let ds = crate::dataset::generate_synthetic(101, 0.5, 3).unwrap();
        let folds = make_folds(&ds, 3, 9).unwrap();
        let mut val: Vec<usize> = folds
            .iter()
            .flat_map(|f| f.val.row_ids().to_vec())
            .collect();
        val.sort_unstable();
        assert_eq!(val, (0..101).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train.len() + f.val.len(), 101);
        }
    }
}
