//! Logistic scorer trained by mini-batch SGD on a sample-weighted
//! cross-entropy.
//!
//! The objective is `Σ_i w_i · L(y_i, σ(θ·x_i + b))` with the weights
//! carrying their own normalization: weights summing to one make it the mean
//! cross-entropy. Each mini-batch step follows `(m / batch_size) · Σ_batch
//! w_i ∇L_i`, whose expectation under a uniform shuffle is the gradient of
//! the full objective, so the step size does not depend on the batch size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{Error, Result};

/// Scores are clamped to `[EPS, 1 − EPS]` before taking logarithms.
pub const LOSS_EPS: f64 = 1e-12;

/// Standard deviation of the random coefficient initialization.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            coefficients: vec![0.0; dim],
            intercept: 0.0,
            feature_names: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.coefficients.iter().all(|c| c.is_finite())
    }

    fn logit(&self, row: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(row)
            .fold(self.intercept, |acc, (c, x)| acc + c * x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Index of the first epoch; the shuffle of epoch `e` depends only on
    /// `(seed, e)`, so a run split into consecutive calls sees the same
    /// batches as one long call.
    #[serde(default)]
    pub start_epoch: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 1000,
            seed: 0,
            shuffle: true,
            start_epoch: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(())
    }
}

/// Coefficients drawn from `N(0, INIT_SCALE²)`, intercept zero.
pub fn init_params(dim: usize, seed: u64) -> Result<ModelParams> {
    if dim < 1 {
        return Err(Error::invalid("model dimension must be at least 1"));
    }
    let normal = Normal::new(0.0, INIT_SCALE).expect("positive scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ModelParams {
        coefficients: (0..dim).map(|_| normal.sample(&mut rng)).collect(),
        intercept: 0.0,
        feature_names: Vec::new(),
    })
}

/// Logistic function without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn predict_score(params: &ModelParams, row: &[f64]) -> Result<f64> {
    if row.len() != params.dim() {
        return Err(Error::LengthMismatch {
            what: "row vs coefficients",
            left: row.len(),
            right: params.dim(),
        });
    }
    Ok(sigmoid(params.logit(row)))
}

/// Threshold rule: 1 when `score >= d`, so a tie goes to the positive class.
pub fn predict_label(score: f64, d: f64) -> u8 {
    u8::from(score >= d)
}

fn check_dims(params: &ModelParams, ds: &Dataset) -> Result<()> {
    if ds.n_features() != params.dim() {
        return Err(Error::LengthMismatch {
            what: "features vs coefficients",
            left: ds.n_features(),
            right: params.dim(),
        });
    }
    Ok(())
}

pub fn predict_scores(params: &ModelParams, ds: &Dataset) -> Result<Vec<f64>> {
    check_dims(params, ds)?;
    Ok((0..ds.len())
        .map(|i| sigmoid(params.logit(ds.row(i))))
        .collect())
}

pub fn predict_labels(params: &ModelParams, ds: &Dataset, d: f64) -> Result<Vec<u8>> {
    Ok(predict_scores(params, ds)?
        .into_iter()
        .map(|s| predict_label(s, d))
        .collect())
}

fn check_weights(ds: &Dataset, weights: &[f64]) -> Result<()> {
    if weights.len() != ds.len() {
        return Err(Error::LengthMismatch {
            what: "weights vs rows",
            left: weights.len(),
            right: ds.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!(
            "sample weight {w} is not a finite nonnegative number"
        )));
    }
    Ok(())
}

fn cross_entropy(y: u8, score: f64) -> f64 {
    let s = score.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    if y == 1 {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// `Σ_i w_i · L(y_i, h(x_i))` with `L` the clamped cross-entropy.
pub fn weighted_loss(params: &ModelParams, ds: &Dataset, weights: &[f64]) -> Result<f64> {
    check_dims(params, ds)?;
    check_weights(ds, weights)?;
    Ok((0..ds.len())
        .filter(|&i| weights[i] != 0.0)
        .map(|i| weights[i] * cross_entropy(ds.labels()[i], sigmoid(params.logit(ds.row(i)))))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

/// Analytic gradient of [`weighted_loss`] over every row of `batch`.
pub fn gradient(params: &ModelParams, batch: &Dataset, weights: &[f64]) -> Result<Gradient> {
    check_dims(params, batch)?;
    check_weights(batch, weights)?;
    let mut g = Gradient {
        coefficients: vec![0.0; params.dim()],
        intercept: 0.0,
    };
    let rows: Vec<usize> = (0..batch.len()).collect();
    accumulate(params, batch, weights, &rows, &mut g);
    Ok(g)
}

/// Adds `Σ_{i ∈ rows} w_i (σ(z_i) − y_i) (x_i, 1)` into `g`.
fn accumulate(
    params: &ModelParams,
    ds: &Dataset,
    weights: &[f64],
    rows: &[usize],
    g: &mut Gradient,
) {
    let labels = ds.labels();
    for &i in rows {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row = ds.row(i);
        let residual = w * (sigmoid(params.logit(row)) - f64::from(labels[i]));
        for (gc, x) in g.coefficients.iter_mut().zip(row) {
            *gc += residual * x;
        }
        g.intercept += residual;
    }
}

fn epoch_order(m: usize, settings: &TrainSettings, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    if settings.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
    }
    order
}

/// Runs `settings.epochs` epochs of mini-batch SGD from `params`.
pub fn train_weighted(
    params: &ModelParams,
    ds: &Dataset,
    weights: &[f64],
    settings: &TrainSettings,
) -> Result<ModelParams> {
    check_dims(params, ds)?;
    check_weights(ds, weights)?;
    settings.validate()?;
    let m = ds.len();
    let scale = settings.learning_rate * m as f64 / settings.batch_size as f64;
    let full_batch = settings.batch_size >= m;
    let mut theta = params.clone();
    theta.feature_names = ds.feature_names().to_vec();
    let mut g = Gradient {
        coefficients: vec![0.0; theta.dim()],
        intercept: 0.0,
    };
    let mut previous_loss = if full_batch {
        Some(weighted_loss(&theta, ds, weights)?)
    } else {
        None
    };
    for e in 0..settings.epochs {
        let epoch = settings.start_epoch + e;
        let order = epoch_order(m, settings, epoch);
        for (b, batch) in order.chunks(settings.batch_size).enumerate() {
            g.coefficients.iter_mut().for_each(|c| *c = 0.0);
            g.intercept = 0.0;
            accumulate(&theta, ds, weights, batch, &mut g);
            for (c, gc) in theta.coefficients.iter_mut().zip(&g.coefficients) {
                *c -= scale * gc;
            }
            theta.intercept -= scale * g.intercept;
            if !theta.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
        }
        if let Some(prev) = previous_loss {
            let loss = weighted_loss(&theta, ds, weights)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            if loss > prev + 1e-9 {
                log::warn!("full-batch loss increased at epoch {epoch}: {prev} -> {loss}");
            }
            previous_loss = Some(loss);
        }
    }
    Ok(theta)
}
