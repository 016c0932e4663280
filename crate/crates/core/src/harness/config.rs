//! Experiment configuration and its flat `key = value` text format.
//!
//! One entry per line, `key = value`, whitespace around both trimmed. Lines
//! that are blank or start with `#` are ignored. Lists are comma-separated.
//! Unknown and repeated keys are errors. [`ExperimentConfig::to_text`]
//! renders every key in a fixed order and parses back to an equal config.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::TrainSettings;
use crate::dataset::DatasetSchema;
use crate::reweigher::{FairnessCriterion, ReweighConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    Cutting,
    FixedReweigh,
    Adaptive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Cutting => "cutting",
            Method::FixedReweigh => "fixed_reweigh",
            Method::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(Method::Erm),
            "cutting" => Ok(Method::Cutting),
            "fixed_reweigh" => Ok(Method::FixedReweigh),
            "adaptive" => Ok(Method::Adaptive),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: DatasetSchema,
    },
    Synthetic {
        n: usize,
        bias: f64,
        seed: u64,
    },
}

/// Hyperparameters of the adaptive method; the inner trainer shares the
/// experiment's learning rate, batch size and shuffling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub criterion: FairnessCriterion,
    pub alpha: f64,
    pub eta: f64,
    pub d: f64,
    pub inner_epochs: usize,
    /// Defaults to `train.epochs / inner_epochs − 1`, so the adaptive run
    /// spends the same number of epochs as the baselines.
    pub outer_iterations: Option<usize>,
    pub early_stop_gap: Option<f64>,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            criterion: FairnessCriterion::EqualOpportunity,
            alpha: 100.0,
            eta: 1.0,
            d: 0.5,
            inner_epochs: 1,
            outer_iterations: None,
            early_stop_gap: None,
        }
    }
}

/// Cross-validated search over `(alpha, eta)` on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub folds: usize,
    /// Grid points whose mean validation gap is within this much of the
    /// smallest one compete on validation accuracy.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 10.0, 100.0, 1000.0, 10000.0],
            etas: vec![0.5, 1.0, 2.0, 3.0],
            folds: 3,
            tolerance: 0.005,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.etas.is_empty() {
            return Err(Error::invalid("grids must be nonempty"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("selection tolerance must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub include_sensitive: bool,
    pub test_fraction: f64,
    /// Replication `r` uses seed `seed + r` for its split and training.
    pub seed: u64,
    pub replications: usize,
    pub method: Method,
    /// Settings of the baselines; `seed` and `start_epoch` are ignored.
    pub train: TrainSettings,
    pub adaptive: AdaptiveParams,
    /// When set, each replication tunes `(alpha, eta)` on its training split.
    pub tune: Option<GridSpec>,
}

/// Batch sizes used per dataset: 1000 for Adult, 200 for COMPAS and 2000
/// for synthetic data.
pub const ADULT_BATCH_SIZE: usize = 1000;
pub const COMPAS_BATCH_SIZE: usize = 200;
pub const SYNTHETIC_BATCH_SIZE: usize = 2000;

impl ExperimentConfig {
    pub fn new(name: &str, data: DataSource, method: Method) -> Self {
        let batch_size = match &data {
            DataSource::Synthetic { .. } => SYNTHETIC_BATCH_SIZE,
            DataSource::Csv { .. } => ADULT_BATCH_SIZE,
        };
        Self {
            name: name.to_string(),
            data,
            include_sensitive: true,
            test_fraction: 0.3,
            seed: 0,
            replications: 3,
            method,
            train: TrainSettings {
                batch_size,
                ..TrainSettings::default()
            },
            adaptive: AdaptiveParams::default(),
            tune: None,
        }
    }

    /// Canonical schema for `data/adult.csv`: income above 50K is the
    /// positive label, sex the sensitive attribute with `Male` privileged.
    pub fn adult_schema() -> DatasetSchema {
        let mut s = DatasetSchema::new("income", "sex", ">50K", "Male");
        s.numeric_columns = [
            "age",
            "education-num",
            "capital-gain",
            "capital-loss",
            "hours-per-week",
        ]
        .map(String::from)
        .to_vec();
        s.categorical_columns = [
            "workclass",
            "marital-status",
            "occupation",
            "relationship",
            "race",
            "native-country",
        ]
        .map(String::from)
        .to_vec();
        s
    }

    /// Canonical schema for `data/compas.csv`: no two-year recidivism is the
    /// positive label, race the sensitive attribute with `Caucasian`
    /// privileged and every other race mapped to 0.
    pub fn compas_schema() -> DatasetSchema {
        let mut s = DatasetSchema::new("two_year_recid", "race", "0", "Caucasian");
        s.numeric_columns = [
            "age",
            "priors_count",
            "juv_fel_count",
            "juv_misd_count",
            "juv_other_count",
        ]
        .map(String::from)
        .to_vec();
        s.categorical_columns = ["sex", "age_cat", "c_charge_degree"]
            .map(String::from)
            .to_vec();
        s.binarize_sensitive = true;
        s
    }

    pub fn reweigh_config(&self) -> ReweighConfig {
        let a = &self.adaptive;
        let inner_epochs = a.inner_epochs.max(1);
        ReweighConfig {
            criterion: a.criterion,
            alpha: a.alpha,
            eta: a.eta,
            d: a.d,
            outer_iterations: a
                .outer_iterations
                .unwrap_or_else(|| (self.train.epochs / inner_epochs).saturating_sub(1).max(1)),
            inner: TrainSettings {
                epochs: inner_epochs,
                ..self.train.clone()
            },
            early_stop_gap: a.early_stop_gap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        self.train.validate()?;
        if self.method == Method::Adaptive {
            self.reweigh_config().validate()?;
        }
        if let Some(tune) = &self.tune {
            if self.method != Method::Adaptive {
                return Err(Error::invalid("tuning applies to the adaptive method only"));
            }
            tune.validate()?;
        }
        Ok(())
    }

    /// Reads a config file; a relative `data.path` is taken relative to the
    /// directory holding the config.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = text.parse()?;
        if let DataSource::Csv { path: data, .. } = &mut cfg.data {
            if data.is_relative() {
                *data = path.parent().unwrap_or(Path::new("")).join(&*data);
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("name", self.name.clone());
        match &self.data {
            DataSource::Csv { path, schema } => {
                put("data", "csv".into());
                put("data.path", path.display().to_string());
                put("data.label_column", schema.label_column.clone());
                put("data.sensitive_column", schema.sensitive_column.clone());
                put("data.positive_label", schema.positive_label_value.clone());
                put(
                    "data.privileged_value",
                    schema.privileged_group_value.clone(),
                );
                put("data.numeric", schema.numeric_columns.join(","));
                put("data.categorical", schema.categorical_columns.join(","));
                put("data.missing_values", schema.missing_values.join(","));
                put(
                    "data.binarize_sensitive",
                    schema.binarize_sensitive.to_string(),
                );
            }
            DataSource::Synthetic { n, bias, seed } => {
                put("data", "synthetic".into());
                put("synthetic.n", n.to_string());
                put("synthetic.bias", bias.to_string());
                put("synthetic.seed", seed.to_string());
            }
        }
        put("include_sensitive", self.include_sensitive.to_string());
        put("split.test_fraction", self.test_fraction.to_string());
        put("seed", self.seed.to_string());
        put("replications", self.replications.to_string());
        put("method", self.method.to_string());
        put("train.epochs", self.train.epochs.to_string());
        put("train.learning_rate", self.train.learning_rate.to_string());
        put("train.batch_size", self.train.batch_size.to_string());
        put("train.shuffle", self.train.shuffle.to_string());
        let a = &self.adaptive;
        put("adaptive.criterion", a.criterion.to_string());
        put("adaptive.alpha", a.alpha.to_string());
        put("adaptive.eta", a.eta.to_string());
        put("adaptive.d", a.d.to_string());
        put("adaptive.inner_epochs", a.inner_epochs.to_string());
        if let Some(t) = a.outer_iterations {
            put("adaptive.outer_iterations", t.to_string());
        }
        if let Some(g) = a.early_stop_gap {
            put("adaptive.early_stop_gap", g.to_string());
        }
        if let Some(t) = &self.tune {
            put("tune.alpha", join(&t.alphas));
            put("tune.eta", join(&t.etas));
            put("tune.folds", t.folds.to_string());
            put("tune.tolerance", t.tolerance.to_string());
        }
        out
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Parsed `key = value` lines, consumed as they are read.
struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if let Some((first, _)) = map.insert(key.clone(), (line_no, v.trim().to_string())) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("key `{key}` already set on line {first}"),
                });
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e: T::Err| Error::Config {
                line,
                message: format!("`{key}`: cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take_raw(key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Config {
                line: 0,
                message: format!("missing required key `{key}`"),
            })
    }

    fn list(&mut self, key: &str) -> Option<Vec<String>> {
        self.take_raw(key).map(|(_, v)| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    fn numbers(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((line, v)) = self.take_raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Config {
                    line,
                    message: format!("`{key}`: cannot parse `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.map.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let method: Method = e.require("method")?.parse()?;
        let data = match e.require("data")?.as_str() {
            "csv" => {
                let mut schema = DatasetSchema::new(
                    &e.require("data.label_column")?,
                    &e.require("data.sensitive_column")?,
                    &e.require("data.positive_label")?,
                    &e.require("data.privileged_value")?,
                );
                schema.numeric_columns = e.list("data.numeric").unwrap_or_default();
                schema.categorical_columns = e.list("data.categorical").unwrap_or_default();
                if let Some(mv) = e.take_raw("data.missing_values") {
                    schema.missing_values = mv.1.split(',').map(|s| s.trim().to_string()).collect();
                }
                schema.binarize_sensitive = e.take_or("data.binarize_sensitive", false)?;
                DataSource::Csv {
                    path: PathBuf::from(e.require("data.path")?),
                    schema,
                }
            }
            "synthetic" => DataSource::Synthetic {
                n: e.take_or("synthetic.n", 4000)?,
                bias: e.take_or("synthetic.bias", 0.8)?,
                seed: e.take_or("synthetic.seed", 1)?,
            },
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("unknown data source `{other}` (expected csv or synthetic)"),
                })
            }
        };
        let mut cfg = ExperimentConfig::new(method.as_str(), data, method);
        if let Some(name) = e.take_raw("name") {
            cfg.name = name.1;
        }
        cfg.include_sensitive = e.take_or("include_sensitive", cfg.include_sensitive)?;
        cfg.test_fraction = e.take_or("split.test_fraction", cfg.test_fraction)?;
        cfg.seed = e.take_or("seed", cfg.seed)?;
        cfg.replications = e.take_or("replications", cfg.replications)?;
        cfg.train.epochs = e.take_or("train.epochs", cfg.train.epochs)?;
        cfg.train.learning_rate = e.take_or("train.learning_rate", cfg.train.learning_rate)?;
        cfg.train.batch_size = e.take_or("train.batch_size", cfg.train.batch_size)?;
        cfg.train.shuffle = e.take_or("train.shuffle", cfg.train.shuffle)?;
        let a = &mut cfg.adaptive;
        if let Some((line, v)) = e.take_raw("adaptive.criterion") {
            a.criterion = v.parse().map_err(|err: Error| Error::Config {
                line,
                message: err.to_string(),
            })?;
        }
        a.alpha = e.take_or("adaptive.alpha", a.alpha)?;
        a.eta = e.take_or("adaptive.eta", a.eta)?;
        a.d = e.take_or("adaptive.d", a.d)?;
        a.inner_epochs = e.take_or("adaptive.inner_epochs", a.inner_epochs)?;
        a.outer_iterations = e.take("adaptive.outer_iterations")?;
        a.early_stop_gap = e.take("adaptive.early_stop_gap")?;
        let alphas = e.numbers("tune.alpha")?;
        let etas = e.numbers("tune.eta")?;
        let folds: Option<usize> = e.take("tune.folds")?;
        let tolerance: Option<f64> = e.take("tune.tolerance")?;
        if alphas.is_some() || etas.is_some() || folds.is_some() || tolerance.is_some() {
            let d = GridSpec::default();
            cfg.tune = Some(GridSpec {
                alphas: alphas.unwrap_or(d.alphas),
                etas: etas.unwrap_or(d.etas),
                folds: folds.unwrap_or(d.folds),
                tolerance: tolerance.unwrap_or(d.tolerance),
            });
        }
        e.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}
