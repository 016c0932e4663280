//! Adaptive priority reweighing.
//!
//! Each outer iteration scores every training row with the current model and
//! then
//!
//! 1. sets the margin `φ_i = |h(x_i) − d|` of each row,
//! 2. multiplies each subgroup weight `W_{y,a}` by a damped ratio of the
//!    expected to the observed frequency of a prediction cell, the cells
//!    depending on the fairness criterion,
//! 3. spreads each subgroup's share `W_{y,a} / ΣW · p_{y,a}` over its rows
//!    with a softmax of `−η·φ_i`, so rows near the boundary weigh more,
//! 4. continues training from the current parameters on the new weights.
//!
//! Subgroups for the sample weights are always the true-label cells
//! `G_{y,a} = {i : y_i = y, a_i = a}`; the demographic-parity ratio counts
//! predicted labels. Sample weights are rescaled to sum to one after every
//! update, which leaves their ratios unchanged.
//!
//! `α` damps the ratio: `(expected + α) / (observed + α)` in count units.
//! Larger `α` means smaller adjustments. Any nonnegative value is accepted;
//! typical values lie in `[0, 10000]`, though far larger values have been
//! reported as optimal on some data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    init_params, predict_label, predict_scores, train_weighted, weighted_loss, ModelParams,
    TrainSettings,
};
use crate::dataset::{check_binary, Dataset, SubgroupStats};
use crate::metrics::{fairness_report, FairnessReport, Metric};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FairnessCriterion {
    #[serde(rename = "dp")]
    DemographicParity,
    #[serde(rename = "eo")]
    EqualizedOdds,
    #[serde(rename = "eop")]
    EqualOpportunity,
}

impl FairnessCriterion {
    pub const ALL: [FairnessCriterion; 3] = [
        FairnessCriterion::DemographicParity,
        FairnessCriterion::EqualizedOdds,
        FairnessCriterion::EqualOpportunity,
    ];

    /// The gap this criterion drives to zero.
    pub fn metric(self) -> Metric {
        match self {
            FairnessCriterion::DemographicParity => Metric::DeltaDp,
            FairnessCriterion::EqualizedOdds => Metric::DeltaEo,
            FairnessCriterion::EqualOpportunity => Metric::DeltaEop,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            FairnessCriterion::DemographicParity => "dp",
            FairnessCriterion::EqualizedOdds => "eo",
            FairnessCriterion::EqualOpportunity => "eop",
        }
    }
}

impl fmt::Display for FairnessCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FairnessCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" | "demographic_parity" => Ok(FairnessCriterion::DemographicParity),
            "eo" | "equalized_odds" => Ok(FairnessCriterion::EqualizedOdds),
            "eop" | "equal_opportunity" => Ok(FairnessCriterion::EqualOpportunity),
            other => Err(Error::invalid(format!(
                "unknown fairness criterion `{other}`"
            ))),
        }
    }
}

/// Subgroup weights `W_{y,a}`, stored as `[y][a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgroupWeights(pub [[f64; 2]; 2]);

impl SubgroupWeights {
    pub fn ones() -> Self {
        SubgroupWeights([[1.0; 2]; 2])
    }

    pub fn get(&self, y: usize, a: usize) -> f64 {
        self.0[y][a]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }
}

/// Mutable state of the outer loop at iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub subgroup_weights: SubgroupWeights,
    pub sample_weights: Vec<f64>,
    pub margins: Vec<f64>,
    pub iteration: usize,
}

impl WeightState {
    /// Unit subgroup weights, uniform sample weights `1/m`, zero margins.
    pub fn initial(m: usize) -> Self {
        Self {
            subgroup_weights: SubgroupWeights::ones(),
            sample_weights: vec![1.0 / m as f64; m],
            margins: vec![0.0; m],
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweighConfig {
    pub criterion: FairnessCriterion,
    /// Subgroup learning rate.
    pub alpha: f64,
    /// Sharpness of the within-subgroup margin softmax.
    pub eta: f64,
    /// Decision boundary value.
    pub d: f64,
    /// Reweighing rounds after the initial unweighted fit.
    pub outer_iterations: usize,
    /// Inner trainer settings; `epochs` is the number of epochs per round.
    pub inner: TrainSettings,
    pub early_stop_gap: Option<f64>,
}

impl ReweighConfig {
    /// Defaults: `d = 0.5`, one inner epoch per round and 199 rounds, i.e.
    /// 200 epochs in total.
    pub fn new(criterion: FairnessCriterion, alpha: f64, eta: f64) -> Self {
        Self {
            criterion,
            alpha,
            eta,
            d: 0.5,
            outer_iterations: 199,
            inner: TrainSettings {
                epochs: 1,
                ..TrainSettings::default()
            },
            early_stop_gap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid(format!(
                "alpha {} must be nonnegative",
                self.alpha
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "eta {} must be nonnegative",
                self.eta
            )));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(Error::invalid(format!(
                "decision boundary {} outside (0, 1)",
                self.d
            )));
        }
        if self.outer_iterations == 0 {
            return Err(Error::invalid("outer iterations must be positive"));
        }
        if let Some(gap) = self.early_stop_gap {
            if !(gap >= 0.0) {
                return Err(Error::invalid(format!(
                    "early stop gap {gap} must be nonnegative"
                )));
            }
        }
        self.inner.validate()
    }

    /// Total inner epochs over the initial fit and every round.
    pub fn total_epochs(&self) -> usize {
        (self.outer_iterations + 1) * self.inner.epochs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub subgroup_weights: SubgroupWeights,
    pub train_report: FairnessReport,
    /// Weighted loss of the model after this round, under this round's weights.
    pub weighted_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line, one line per round.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// `φ_i = |score_i − d|`.
pub fn compute_margins(scores: &[f64], d: f64) -> Vec<f64> {
    scores.iter().map(|s| (s - d).abs()).collect()
}

fn damped_ratio(expected: f64, observed: f64, alpha: f64, cell: (usize, usize)) -> Result<f64> {
    let den = observed + alpha;
    if den == 0.0 {
        return Err(Error::EmptyCell {
            cell: format!("(y={}, a={})", cell.0, cell.1),
            context: "subgroup update with alpha = 0",
        });
    }
    Ok((expected + alpha) / den)
}

fn check_update_inputs(
    preds: &[u8],
    labels: Option<&[u8]>,
    sensitive: &[u8],
    alpha: f64,
) -> Result<()> {
    let m = preds.len();
    if sensitive.len() != m {
        return Err(Error::LengthMismatch {
            what: "predictions vs sensitive",
            left: m,
            right: sensitive.len(),
        });
    }
    if let Some(labels) = labels {
        if labels.len() != m {
            return Err(Error::LengthMismatch {
                what: "predictions vs labels",
                left: m,
                right: labels.len(),
            });
        }
        check_binary("labels", labels)?;
    }
    if m == 0 {
        return Err(Error::Empty("predictions"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be nonnegative")));
    }
    check_binary("predictions", preds)?;
    check_binary("sensitive", sensitive)
}

/// Demographic-parity update over predicted-label cells:
/// `W_{y,a} ← W_{y,a} · (|ŷ=y|·|a| + α) / (m·|ŷ=y, a| + α)`.
pub fn update_subgroup_weights_dp(
    prev: &SubgroupWeights,
    preds: &[u8],
    sensitive: &[u8],
    alpha: f64,
) -> Result<SubgroupWeights> {
    check_update_inputs(preds, None, sensitive, alpha)?;
    let m = preds.len() as f64;
    let mut joint = [[0usize; 2]; 2];
    for (&p, &a) in preds.iter().zip(sensitive) {
        joint[p as usize][a as usize] += 1;
    }
    let predicted = |y: usize| (joint[y][0] + joint[y][1]) as f64;
    let group = |a: usize| (joint[0][a] + joint[1][a]) as f64;
    let mut next = *prev;
    for y in 0..2 {
        for a in 0..2 {
            let expected = predicted(y) * group(a);
            let observed = m * joint[y][a] as f64;
            next.0[y][a] *= damped_ratio(expected, observed, alpha, (y, a))?;
        }
    }
    Ok(next)
}

/// `[ŷ == y][y][a]` counts used by the equalized-odds family of updates.
fn conditional_hits(
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
) -> ([[usize; 2]; 2], [[usize; 2]; 2]) {
    let mut hits = [[0usize; 2]; 2];
    let mut cells = [[0usize; 2]; 2];
    for ((&p, &y), &a) in preds.iter().zip(labels).zip(sensitive) {
        cells[y as usize][a as usize] += 1;
        if p == y {
            hits[y as usize][a as usize] += 1;
        }
    }
    (hits, cells)
}

fn conditional_update(
    prev: &SubgroupWeights,
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
    alpha: f64,
    classes: &[usize],
) -> Result<SubgroupWeights> {
    check_update_inputs(preds, Some(labels), sensitive, alpha)?;
    let (hits, cells) = conditional_hits(preds, labels, sensitive);
    let mut next = *prev;
    for &y in classes {
        let class_hits = (hits[y][0] + hits[y][1]) as f64;
        let class_total = (cells[y][0] + cells[y][1]) as f64;
        for a in 0..2 {
            let expected = class_hits * cells[y][a] as f64;
            let observed = class_total * hits[y][a] as f64;
            next.0[y][a] *= damped_ratio(expected, observed, alpha, (y, a))?;
        }
    }
    Ok(next)
}

/// Equalized-odds update: within each true class `y`,
/// `W_{y,a} ← W_{y,a} · (|ŷ=y, y|·m_{y,a} + α) / (m_{y,*}·|ŷ=y, y, a| + α)`.
pub fn update_subgroup_weights_eo(
    prev: &SubgroupWeights,
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
    alpha: f64,
) -> Result<SubgroupWeights> {
    conditional_update(prev, preds, labels, sensitive, alpha, &[0, 1])
}

/// Equal-opportunity update: the equalized-odds rule on the positive class
/// only; `W_{0,a}` are returned unchanged.
pub fn update_subgroup_weights_eop(
    prev: &SubgroupWeights,
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
    alpha: f64,
) -> Result<SubgroupWeights> {
    conditional_update(prev, preds, labels, sensitive, alpha, &[1])
}

pub fn update_subgroup_weights(
    criterion: FairnessCriterion,
    prev: &SubgroupWeights,
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
    alpha: f64,
) -> Result<SubgroupWeights> {
    match criterion {
        FairnessCriterion::DemographicParity => {
            update_subgroup_weights_dp(prev, preds, sensitive, alpha)
        }
        FairnessCriterion::EqualizedOdds => {
            update_subgroup_weights_eo(prev, preds, labels, sensitive, alpha)
        }
        FairnessCriterion::EqualOpportunity => {
            update_subgroup_weights_eop(prev, preds, labels, sensitive, alpha)
        }
    }
}

/// Per-row weights from subgroup weights and margins, normalized to sum 1.
///
/// Before normalization a row of `G_{y,a}` gets
/// `W_{y,a}/ΣW · p_{y,a} · exp(−η φ_i) / Σ_{j ∈ G_{y,a}} exp(−η φ_j)`.
/// Under equal opportunity, rows with `y = 0` get `1 / (m · ΣW)` instead.
/// `stats` must be the `(label, sensitive)` counts of the same rows.
pub fn compute_sample_weights(
    weights: &SubgroupWeights,
    stats: &SubgroupStats,
    margins: &[f64],
    labels: &[u8],
    sensitive: &[u8],
    eta: f64,
    criterion: FairnessCriterion,
) -> Result<Vec<f64>> {
    let m = margins.len();
    for (what, len) in [
        ("labels vs margins", labels.len()),
        ("sensitive vs margins", sensitive.len()),
    ] {
        if len != m {
            return Err(Error::LengthMismatch {
                what,
                left: len,
                right: m,
            });
        }
    }
    if m == 0 {
        return Err(Error::Empty("margins"));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta {eta} must be nonnegative")));
    }
    check_binary("labels", labels)?;
    check_binary("sensitive", sensitive)?;
    if weights
        .0
        .iter()
        .flatten()
        .any(|w| !(*w > 0.0 && w.is_finite()))
    {
        return Err(Error::invalid(format!(
            "subgroup weights must be positive: {weights:?}"
        )));
    }

    let mut counts = [[0usize; 2]; 2];
    let mut min_margin = [[f64::INFINITY; 2]; 2];
    for ((&y, &a), &phi) in labels.iter().zip(sensitive).zip(margins) {
        counts[y as usize][a as usize] += 1;
        let slot = &mut min_margin[y as usize][a as usize];
        *slot = slot.min(phi);
    }
    if stats.m() != m {
        return Err(Error::LengthMismatch {
            what: "subgroup stats vs rows",
            left: stats.m(),
            right: m,
        });
    }
    for y in 0..2 {
        for a in 0..2 {
            if counts[y][a] != stats.count(y, a) {
                return Err(Error::EmptyCell {
                    cell: format!("(y={y}, a={a})"),
                    context: "subgroup stats disagree with row memberships",
                });
            }
        }
    }

    let uses_softmax = |y: usize| criterion != FairnessCriterion::EqualOpportunity || y == 1;
    // softmax terms are shifted by each cell's smallest margin
    let kernel = |y: usize, a: usize, phi: f64| (-eta * (phi - min_margin[y][a])).exp();
    let mut normalizer = [[0.0f64; 2]; 2];
    for ((&y, &a), &phi) in labels.iter().zip(sensitive).zip(margins) {
        normalizer[y as usize][a as usize] += kernel(y as usize, a as usize, phi);
    }
    let total_w = weights.total();
    let mut out: Vec<f64> = labels
        .iter()
        .zip(sensitive)
        .zip(margins)
        .map(|((&y, &a), &phi)| {
            let (y, a) = (y as usize, a as usize);
            if uses_softmax(y) {
                weights.get(y, a) / total_w * stats.proportion(y, a) * kernel(y, a, phi)
                    / normalizer[y][a]
            } else {
                1.0 / (m as f64 * total_w)
            }
        })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|w| *w /= sum);
    Ok(out)
}

fn check_trainable(ds: &Dataset) -> Result<()> {
    let s = ds.label_stats();
    for k in 0..2 {
        if s.col_total(k) == 0 {
            return Err(Error::EmptyCell {
                cell: format!("(a={k})"),
                context: "training data needs both sensitive groups",
            });
        }
        if s.row_total(k) == 0 {
            return Err(Error::EmptyCell {
                cell: format!("(y={k})"),
                context: "training data needs both labels",
            });
        }
    }
    Ok(())
}

/// Outer reweighing loop around the weighted trainer.
///
/// Round 0 fits with uniform weights from a seeded initialization; each of
/// the following `outer_iterations` rounds updates the weights from the
/// current model and continues training from its parameters. `seed` drives
/// both the initialization and the mini-batch shuffles. Returns the last
/// iterate and one trace record per round.
pub fn train_fair(
    ds: &Dataset,
    cfg: &ReweighConfig,
    seed: u64,
) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    check_trainable(ds)?;
    let stats = ds.label_stats();
    let mut inner = TrainSettings {
        seed,
        start_epoch: 0,
        ..cfg.inner.clone()
    };
    let mut state = WeightState::initial(ds.len());
    let mut params = init_params(ds.n_features(), seed)?;
    let mut trace = TrainTrace::default();

    loop {
        params = train_weighted(&params, ds, &state.sample_weights, &inner)?;
        let scores = predict_scores(&params, ds)?;
        let preds: Vec<u8> = scores.iter().map(|&s| predict_label(s, cfg.d)).collect();
        let report = fairness_report(&preds, ds.labels(), ds.sensitive())?;
        trace.records.push(TraceRecord {
            iteration: state.iteration,
            subgroup_weights: state.subgroup_weights,
            train_report: report,
            weighted_loss: weighted_loss(&params, ds, &state.sample_weights)?,
        });
        if state.iteration == cfg.outer_iterations {
            break;
        }
        if let (Some(stop), Some(gap)) = (cfg.early_stop_gap, report.get(cfg.criterion.metric())) {
            if gap < stop {
                log::debug!(
                    "stopping at round {}: training gap {gap} < {stop}",
                    state.iteration
                );
                break;
            }
        }

        state.iteration += 1;
        state.margins = compute_margins(&scores, cfg.d);
        state.subgroup_weights = update_subgroup_weights(
            cfg.criterion,
            &state.subgroup_weights,
            &preds,
            ds.labels(),
            ds.sensitive(),
            cfg.alpha,
        )?;
        state.sample_weights = compute_sample_weights(
            &state.subgroup_weights,
            &stats,
            &state.margins,
            ds.labels(),
            ds.sensitive(),
            cfg.eta,
            cfg.criterion,
        )?;
        inner.start_epoch = state.iteration * inner.epochs;
    }
    Ok((params, trace))
}
