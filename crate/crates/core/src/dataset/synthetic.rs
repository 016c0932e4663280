//! Seeded generator for a biased two-feature classification problem.
//!
//! Each row draws
//!
//! * `x1, x2 ~ N(0, 1)` independently,
//! * `a ~ Bernoulli(0.5)`,
//! * `y ~ Bernoulli(σ(1.5·x1 − 1.0·x2 + bias·(2a − 1)))`.
//!
//! The intercept moves by `+bias` for `a = 1` and `−bias` for `a = 0`, so
//! `bias` tunes the gap between the groups' positive-label rates: about 0.27
//! at `bias = 0.8` and zero in expectation at `bias = 0`. The returned
//! dataset has the two Gaussian columns as features; the harness appends the
//! sensitive attribute when it is used as a model input.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ColumnKind, Dataset};
use crate::classifier::sigmoid;
use crate::{Error, Result};

/// Coefficients of `x1` and `x2` in the label logit.
pub const SYNTHETIC_WEIGHTS: [f64; 2] = [1.5, -1.0];

pub fn generate_synthetic(n: usize, bias: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::invalid(format!(
            "synthetic dataset needs n >= 4, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::invalid(format!("bias {bias} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, 2));
    let mut sensitive = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x1: f64 = StandardNormal.sample(&mut rng);
        let x2: f64 = StandardNormal.sample(&mut rng);
        let a = u8::from(rng.random_bool(0.5));
        let shift = if a == 1 { bias } else { -bias };
        let p = sigmoid(SYNTHETIC_WEIGHTS[0] * x1 + SYNTHETIC_WEIGHTS[1] * x2 + shift);
        let y = u8::from(rng.random::<f64>() < p);
        features[[i, 0]] = x1;
        features[[i, 1]] = x2;
        sensitive.push(a);
        labels.push(y);
    }
    Dataset::new(
        features,
        vec!["x1".into(), "x2".into()],
        vec![ColumnKind::Numeric; 2],
        sensitive,
        labels,
    )
}
