//! Binary-classification datasets with one binary sensitive attribute.
//!
//! A [`Dataset`] is a dense feature matrix plus, per row, a sensitive value
//! `a ∈ {0, 1}` and a label `y ∈ {0, 1}`. Rows also carry the index they had
//! in the dataset they were originally loaded or generated as, so that
//! subsets produced by [`split`] and cross-validation can be traced back.
//!
//! Feature layout is canonical: schema order, one-hot categories in sorted
//! value order, and the sensitive attribute appended last when it is used as
//! a model input.

mod load;
mod synthetic;

pub use load::{load_csv, write_csv, DatasetSchema, LoadReport};
pub use synthetic::{generate_synthetic, SYNTHETIC_WEIGHTS};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How a feature column was produced; only `Numeric` columns are standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// One-hot indicator of a categorical value.
    Indicator,
    /// Copy of the sensitive attribute used as a model input.
    Sensitive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    sensitive: Vec<u8>,
    labels: Vec<u8>,
    row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        sensitive: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let m = features.nrows();
        if m == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        check_len("sensitive vs rows", sensitive.len(), m)?;
        check_len("labels vs rows", labels.len(), m)?;
        check_len(
            "feature names vs columns",
            feature_names.len(),
            features.ncols(),
        )?;
        check_len(
            "column kinds vs columns",
            column_kinds.len(),
            features.ncols(),
        )?;
        check_binary("sensitive", &sensitive)?;
        check_binary("labels", &labels)?;
        let features = features.as_standard_layout().into_owned();
        Ok(Self {
            features,
            feature_names,
            column_kinds,
            sensitive,
            labels,
            row_ids: (0..m).collect(),
        })
    }

    /// Number of rows, `m`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.features.ncols();
        let all = self
            .features
            .as_slice()
            .expect("features are kept in standard layout");
        &all[i * d..(i + 1) * d]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Original row index of each row.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            column_kinds: self.column_kinds.clone(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Appends the sensitive attribute as a final feature column, unless one
    /// is already present.
    pub fn with_sensitive_feature(&self, name: &str) -> Dataset {
        if self.column_kinds.contains(&ColumnKind::Sensitive) {
            return self.clone();
        }
        let m = self.len();
        let d = self.n_features();
        let mut features = Array2::zeros((m, d + 1));
        features
            .slice_mut(ndarray::s![.., ..d])
            .assign(&self.features);
        for (i, &a) in self.sensitive.iter().enumerate() {
            features[[i, d]] = f64::from(a);
        }
        let mut feature_names = self.feature_names.clone();
        feature_names.push(name.to_string());
        let mut column_kinds = self.column_kinds.clone();
        column_kinds.push(ColumnKind::Sensitive);
        Dataset {
            features,
            feature_names,
            column_kinds,
            sensitive: self.sensitive.clone(),
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Counts of `(label, sensitive)` cells.
    pub fn label_stats(&self) -> SubgroupStats {
        SubgroupStats::tally(&self.labels, &self.sensitive)
    }
}

fn check_len(what: &'static str, left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { what, left, right });
    }
    Ok(())
}

pub(crate) fn check_binary(what: &'static str, values: &[u8]) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(&value) => Err(Error::NotBinary { what, value }),
        None => Ok(()),
    }
}

/// Cell counts `m_{y,a}` of a labelling against the sensitive attribute.
///
/// The labelling may be true labels or predictions; `y` indexes whichever
/// was counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupStats {
    m: usize,
    /// `counts[y][a]`.
    counts: [[usize; 2]; 2],
}

impl SubgroupStats {
    fn tally(outcomes: &[u8], sensitive: &[u8]) -> Self {
        let mut counts = [[0usize; 2]; 2];
        for (&y, &a) in outcomes.iter().zip(sensitive) {
            counts[y as usize][a as usize] += 1;
        }
        Self {
            m: outcomes.len(),
            counts,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `m_{y,a}`.
    pub fn count(&self, y: usize, a: usize) -> usize {
        self.counts[y][a]
    }

    /// `m_{y,*}`.
    pub fn row_total(&self, y: usize) -> usize {
        self.counts[y][0] + self.counts[y][1]
    }

    /// `m_{*,a}`.
    pub fn col_total(&self, a: usize) -> usize {
        self.counts[0][a] + self.counts[1][a]
    }

    /// `p_{y,a} = m_{y,a} / m`.
    pub fn proportion(&self, y: usize, a: usize) -> f64 {
        self.counts[y][a] as f64 / self.m as f64
    }
}

pub fn subgroup_stats(outcomes: &[u8], sensitive: &[u8]) -> Result<SubgroupStats> {
    check_len("outcomes vs sensitive", outcomes.len(), sensitive.len())?;
    if outcomes.is_empty() {
        return Err(Error::Empty("subgroup_stats"));
    }
    check_binary("outcomes", outcomes)?;
    check_binary("sensitive", sensitive)?;
    Ok(SubgroupStats::tally(outcomes, sensitive))
}

/// Number of test rows for a split: `fraction · m` rounded half away from
/// zero, so `0.05 · 10 = 0.5` rounds to one row.
pub fn test_size(m: usize, test_fraction: f64) -> usize {
    (test_fraction * m as f64).round() as usize
}

/// Seeded shuffle of `0..m`.
pub(crate) fn permutation(m: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Random train/test partition; the test side holds [`test_size`] rows.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let m = ds.len();
    if m < 2 {
        return Err(Error::invalid(format!("cannot split {m} row(s)")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = test_size(m, test_fraction);
    if n_test == 0 || n_test == m {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} of {m} rows leaves an empty side"
        )));
    }
    let idx = permutation(m, seed);
    let (test_idx, train_idx) = idx.split_at(n_test);
    Ok((ds.select(train_idx), ds.select(test_idx)))
}

/// Per-column shift and scale fitted on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    kinds: Vec<ColumnKind>,
}

impl Standardizer {
    /// Mean and population standard deviation (divide by `m`) of each
    /// numeric column.
    pub fn fit(ds: &Dataset) -> Self {
        let m = ds.len() as f64;
        let d = ds.n_features();
        let mut means = vec![0.0; d];
        let mut stds = vec![1.0; d];
        for (j, col) in ds.features.axis_iter(Axis(1)).enumerate() {
            if ds.column_kinds[j] != ColumnKind::Numeric {
                continue;
            }
            let mean = col.sum() / m;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            means[j] = mean;
            stds[j] = var.sqrt();
        }
        Self {
            means,
            stds,
            kinds: ds.column_kinds.clone(),
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        check_len("column count", ds.n_features(), self.means.len())?;
        if ds.column_kinds != self.kinds {
            return Err(Error::invalid("column layout differs from the fitted one"));
        }
        let mut out = ds.clone();
        for (j, mut col) in out.features.axis_iter_mut(Axis(1)).enumerate() {
            // constant columns are left as they are
            if self.kinds[j] != ColumnKind::Numeric || self.stds[j] == 0.0 {
                continue;
            }
            let (mean, std) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - mean) / std);
        }
        Ok(out)
    }
}

/// Standardizes numeric columns of both sides with statistics of `train`.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    if train.feature_names != test.feature_names || train.column_kinds != test.column_kinds {
        return Err(Error::invalid("train and test column layouts differ"));
    }
    let scaler = Standardizer::fit(train);
    Ok((scaler.transform(train)?, scaler.transform(test)?))
}
