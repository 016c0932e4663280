use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, Method};
use super::grid::grid_search_on;
use crate::baselines::{train_cutting, train_erm, train_fixed_reweighing};
use crate::classifier::{predict_labels, ModelParams};
use crate::dataset::{generate_synthetic, load_csv, split, standardize, Dataset, LoadReport};
use crate::metrics::{fairness_report, FairnessReport, Metric};
use crate::reweigher::train_fair;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Hyperparameters picked by cross-validation for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub alpha: f64,
    pub eta: f64,
}

/// `test − train` for each metric; absent when either side is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricGaps {
    pub accuracy: f64,
    pub delta_dp: Option<f64>,
    pub delta_eo: Option<f64>,
    pub delta_eop: Option<f64>,
}

impl MetricGaps {
    pub fn between(train: &FairnessReport, test: &FairnessReport) -> Self {
        let gap = |m| Some(test.get(m)? - train.get(m)?);
        Self {
            accuracy: test.accuracy - train.accuracy,
            delta_dp: gap(Metric::DeltaDp),
            delta_eo: gap(Metric::DeltaEo),
            delta_eop: gap(Metric::DeltaEop),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub train: FairnessReport,
    pub test: FairnessReport,
    pub gaps: MetricGaps,
    pub selection: Option<Selection>,
    pub model: ModelParams,
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for `n = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub train: Option<MeanStd>,
    pub test: Option<MeanStd>,
    /// `test.mean − train.mean`.
    pub generalization_gap: Option<f64>,
}

/// Choices the run depends on that are not part of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub uncertainty: String,
    pub split: String,
    pub standardization: String,
    pub initialization: String,
    pub optimizer: String,
}

impl RunMetadata {
    fn describe(cfg: &ExperimentConfig) -> Self {
        Self {
            uncertainty: format!(
                "mean and sample std over {} seed replications (seeds {}..{})",
                cfg.replications,
                cfg.seed,
                cfg.seed + cfg.replications as u64
            ),
            split: format!(
                "random {:.0}/{:.0} train/test split per replication seed",
                100.0 * (1.0 - cfg.test_fraction),
                100.0 * cfg.test_fraction
            ),
            standardization: "numeric columns scaled with train mean and population std".into(),
            initialization: format!(
                "coefficients ~ N(0, {}^2), intercept 0",
                crate::classifier::INIT_SCALE
            ),
            optimizer: "plain mini-batch SGD, no momentum or weight decay".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub load_report: Option<LoadReport>,
    pub replications: Vec<ReplicationResult>,
    pub summary: Vec<MetricSummary>,
    pub wall_clock_seconds: f64,
    pub metadata: RunMetadata,
}

impl ResultRecord {
    pub fn metric(&self, metric: Metric) -> &MetricSummary {
        self.summary
            .iter()
            .find(|s| s.metric == metric)
            .expect("summary covers every metric")
    }

    pub fn test_mean(&self, metric: Metric) -> Option<f64> {
        Some(self.metric(metric).test?.mean)
    }

    pub fn train_mean(&self, metric: Metric) -> Option<f64> {
        Some(self.metric(metric).train?.mean)
    }
}

/// Loads or generates the configured dataset, with the sensitive attribute
/// appended as a feature when the config asks for it.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Option<LoadReport>)> {
    let (ds, report, sensitive_name) = match &cfg.data {
        DataSource::Csv { path, schema } => {
            let (ds, report) = load_csv(path, schema)?;
            (ds, Some(report), schema.sensitive_column.as_str())
        }
        DataSource::Synthetic { n, bias, seed } => {
            (generate_synthetic(*n, *bias, *seed)?, None, "a")
        }
    };
    let ds = if cfg.include_sensitive {
        ds.with_sensitive_feature(sensitive_name)
    } else {
        ds
    };
    Ok((ds, report))
}

pub fn evaluate(params: &ModelParams, ds: &Dataset, d: f64) -> Result<FairnessReport> {
    let preds = predict_labels(params, ds, d)?;
    fairness_report(&preds, ds.labels(), ds.sensitive())
}

/// Trains the configured method on an already standardized training split.
pub fn train_method(
    cfg: &ExperimentConfig,
    train: &Dataset,
    seed: u64,
) -> Result<(ModelParams, Option<Selection>)> {
    match cfg.method {
        Method::Erm => Ok((train_erm(train, &cfg.train, seed)?, None)),
        Method::Cutting => Ok((train_cutting(train, &cfg.train, seed)?, None)),
        Method::FixedReweigh => Ok((train_fixed_reweighing(train, &cfg.train, seed)?, None)),
        Method::Adaptive => {
            let mut rc = cfg.reweigh_config();
            let selection = match &cfg.tune {
                Some(spec) => {
                    let outcome = grid_search_on(train, &rc, spec, seed)?;
                    rc = outcome.best.clone();
                    Some(Selection {
                        alpha: rc.alpha,
                        eta: rc.eta,
                    })
                }
                None => None,
            };
            Ok((train_fair(train, &rc, seed)?.0, selection))
        }
    }
}

fn run_replication(ds: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<ReplicationResult> {
    let (train, test) = split(ds, cfg.test_fraction, seed)?;
    let (train, test) = standardize(&train, &test)?;
    let (model, selection) = train_method(cfg, &train, seed)?;
    let d = cfg.adaptive.d;
    let train_report = evaluate(&model, &train, d)?;
    let test_report = evaluate(&model, &test, d)?;
    Ok(ReplicationResult {
        seed,
        train_size: train.len(),
        test_size: test.len(),
        gaps: MetricGaps::between(&train_report, &test_report),
        train: train_report,
        test: test_report,
        selection,
        model,
    })
}

pub fn summarize(replications: &[ReplicationResult]) -> Vec<MetricSummary> {
    Metric::ALL
        .iter()
        .map(|&metric| {
            let side = |f: fn(&ReplicationResult) -> &FairnessReport| {
                let values: Vec<f64> = replications
                    .iter()
                    .filter_map(|r| f(r).get(metric))
                    .collect();
                MeanStd::of(&values)
            };
            let train = side(|r| &r.train);
            let test = side(|r| &r.test);
            let generalization_gap = match (train, test) {
                (Some(tr), Some(te)) => Some(te.mean - tr.mean),
                _ => None,
            };
            MetricSummary {
                metric,
                train,
                test,
                generalization_gap,
            }
        })
        .collect()
}

/// Runs every replication of `cfg`: split, standardize, train, evaluate.
///
/// Replications run in parallel and are gathered in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let (ds, load_report) = load_data(cfg)?;
    let replications = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed + r;
            run_replication(&ds, cfg, seed).map_err(|e| Error::Replication {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        load_report,
        summary: summarize(&replications),
        replications,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        metadata: RunMetadata::describe(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_sample_convention() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }

    fn quick(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            method.as_str(),
            DataSource::Synthetic {
                n: 600,
                bias: 0.8,
                seed: 1,
            },
            method,
        );
        cfg.train.epochs = 20;
        cfg.train.batch_size = 100;
        cfg
    }

    #[test]
    fn every_method_runs() {
        for m in [
            Method::Erm,
            Method::Cutting,
            Method::FixedReweigh,
            Method::Adaptive,
        ] {
            let rec = run_experiment(&quick(m)).unwrap();
            assert_eq!(rec.replications.len(), 3);
            assert_eq!(rec.summary.len(), 4);
            assert_eq!(rec.replications[0].test_size, 180);
            assert_eq!(
                rec.replications[0].model.feature_names,
                vec!["x1", "x2", "a"]
            );
        }
    }

    #[test]
    fn summaries_reconcile_with_replications() {
        let rec = run_experiment(&quick(Method::Erm)).unwrap();
        for s in &rec.summary {
            let test: Vec<f64> = rec
                .replications
                .iter()
                .filter_map(|r| r.test.get(s.metric))
                .collect();
            let recomputed = MeanStd::of(&test).unwrap();
            let stored = s.test.unwrap();
            assert!((recomputed.mean - stored.mean).abs() < 1e-9);
            assert!((recomputed.std - stored.std).abs() < 1e-9);
        }
        for r in &rec.replications {
            assert_eq!(r.gaps.accuracy, r.test.accuracy - r.train.accuracy);
        }
        // distinct splits per seed give a nonzero spread
        assert!(rec.metric(Metric::Accuracy).test.unwrap().std > 0.0);
    }

    #[test]
    fn exclude_sensitive_feature() {
        let mut cfg = quick(Method::Erm);
        cfg.include_sensitive = false;
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.replications[0].model.dim(), 2);
    }

    #[test]
    fn failing_replication_names_its_seed() {
        let mut cfg = quick(Method::Erm);
        cfg.data = DataSource::Synthetic {
            n: 4,
            bias: 0.0,
            seed: 0,
        };
        cfg.test_fraction = 0.1;
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("seed 0"), "{err}");
    }
}
