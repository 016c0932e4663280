//! Reference trainers: unweighted ERM, group-size cutting and static
//! expected/observed reweighing.

use crate::classifier::{init_params, train_weighted, ModelParams, TrainSettings};
use crate::dataset::{permutation, Dataset};
use crate::reweigher::SubgroupWeights;
use crate::{Error, Result};

/// Uniform-weight training from a seeded initialization; `seed` also drives
/// the shuffles.
pub fn train_erm(ds: &Dataset, settings: &TrainSettings, seed: u64) -> Result<ModelParams> {
    let weights = vec![1.0 / ds.len() as f64; ds.len()];
    train_with_weights(ds, &weights, settings, seed)
}

fn train_with_weights(
    ds: &Dataset,
    weights: &[f64],
    settings: &TrainSettings,
    seed: u64,
) -> Result<ModelParams> {
    let settings = TrainSettings {
        seed,
        start_epoch: 0,
        ..settings.clone()
    };
    train_weighted(&init_params(ds.n_features(), seed)?, ds, weights, &settings)
}

/// Subsample of `ds` with both sensitive groups cut to the smaller group's
/// size. Rows keep their original relative order.
pub fn cutting_subsample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let groups: [Vec<usize>; 2] =
        [0, 1].map(|a| (0..ds.len()).filter(|&i| ds.sensitive()[i] == a).collect());
    let keep = groups[0].len().min(groups[1].len());
    if keep == 0 {
        return Err(Error::EmptyCell {
            cell: format!("(a={})", if groups[0].is_empty() { 0 } else { 1 }),
            context: "cutting needs both sensitive groups",
        });
    }
    let mut rows: Vec<usize> = Vec::with_capacity(2 * keep);
    for group in &groups {
        if group.len() == keep {
            rows.extend(group);
        } else {
            rows.extend(
                permutation(group.len(), seed)[..keep]
                    .iter()
                    .map(|&k| group[k]),
            );
        }
    }
    rows.sort_unstable();
    Ok(ds.select(&rows))
}

pub fn train_cutting(ds: &Dataset, settings: &TrainSettings, seed: u64) -> Result<ModelParams> {
    train_erm(&cutting_subsample(ds, seed)?, settings, seed)
}

/// Static label-based cell weights `W_{y,a} = m_{y,*}·m_{*,a} / (m·m_{y,a})`.
pub fn fixed_subgroup_weights(ds: &Dataset) -> Result<SubgroupWeights> {
    let s = ds.label_stats();
    let mut w = [[0.0; 2]; 2];
    for y in 0..2 {
        for a in 0..2 {
            if s.count(y, a) == 0 {
                return Err(Error::EmptyCell {
                    cell: format!("(y={y}, a={a})"),
                    context: "fixed reweighing needs every cell",
                });
            }
            w[y][a] = (s.row_total(y) * s.col_total(a)) as f64 / (s.m() * s.count(y, a)) as f64;
        }
    }
    Ok(SubgroupWeights(w))
}

/// Per-row weights `W_{y_i,a_i}`, normalized to sum 1.
pub fn fixed_sample_weights(ds: &Dataset) -> Result<Vec<f64>> {
    let w = fixed_subgroup_weights(ds)?;
    let raw: Vec<f64> = ds
        .labels()
        .iter()
        .zip(ds.sensitive())
        .map(|(&y, &a)| w.get(y as usize, a as usize))
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / sum).collect())
}

pub fn train_fixed_reweighing(
    ds: &Dataset,
    settings: &TrainSettings,
    seed: u64,
) -> Result<ModelParams> {
    train_with_weights(ds, &fixed_sample_weights(ds)?, settings, seed)
}
