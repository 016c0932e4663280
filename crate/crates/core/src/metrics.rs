//! Accuracy and group-fairness gaps.
//!
//! All gaps are absolute differences of empirical positive-prediction rates
//! between the two sensitive groups, as fractions in `[0, 1]`:
//!
//! * `Δ_DP  = |P(Ŷ=1 | A=0) − P(Ŷ=1 | A=1)|`
//! * `Δ_EO  = max_y |P(Ŷ=1 | A=0, Y=y) − P(Ŷ=1 | A=1, Y=y)|`
//! * `Δ_EOP = |P(Ŷ=1 | A=0, Y=1) − P(Ŷ=1 | A=1, Y=1)|`
//!
//! Single-metric functions fail when a conditioning cell is empty;
//! [`fairness_report`] marks such a metric absent instead.

use serde::{Deserialize, Serialize};

use crate::dataset::check_binary;
use crate::{Error, Result};

/// `[pred][label][a]` counts.
#[derive(Debug, Clone, Copy, Default)]
struct Contingency([[[usize; 2]; 2]; 2]);

impl Contingency {
    fn build(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Self {
        let mut t = [[[0usize; 2]; 2]; 2];
        for ((&p, &y), &a) in preds.iter().zip(labels).zip(sensitive) {
            t[p as usize][y as usize][a as usize] += 1;
        }
        Self(t)
    }

    /// Rows with sensitive value `a` and, if given, label `y`.
    fn total(&self, y: Option<usize>, a: usize) -> usize {
        let t = &self.0;
        match y {
            Some(y) => t[0][y][a] + t[1][y][a],
            None => t[0][0][a] + t[0][1][a] + t[1][0][a] + t[1][1][a],
        }
    }

    fn positives(&self, y: Option<usize>, a: usize) -> usize {
        let t = &self.0;
        match y {
            Some(y) => t[1][y][a],
            None => t[1][0][a] + t[1][1][a],
        }
    }

    fn rate(&self, y: Option<usize>, a: usize) -> Option<f64> {
        let n = self.total(y, a);
        (n > 0).then(|| self.positives(y, a) as f64 / n as f64)
    }

    fn gap(&self, y: Option<usize>) -> std::result::Result<f64, String> {
        match (self.rate(y, 0), self.rate(y, 1)) {
            (Some(r0), Some(r1)) => Ok((r0 - r1).abs()),
            (r0, _) => {
                let a = if r0.is_none() { 0 } else { 1 };
                Err(match y {
                    Some(y) => format!("(y={y}, a={a})"),
                    None => format!("(a={a})"),
                })
            }
        }
    }
}

fn check_inputs(preds: &[u8], labels: Option<&[u8]>, sensitive: &[u8]) -> Result<()> {
    if preds.len() != sensitive.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs sensitive",
            left: preds.len(),
            right: sensitive.len(),
        });
    }
    if let Some(labels) = labels {
        if preds.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "predictions vs labels",
                left: preds.len(),
                right: labels.len(),
            });
        }
        check_binary("labels", labels)?;
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    check_binary("predictions", preds)?;
    check_binary("sensitive", sensitive)
}

fn empty_cell(context: &'static str) -> impl FnOnce(String) -> Error {
    move |cell| Error::EmptyCell { cell, context }
}

pub fn delta_dp(preds: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_inputs(preds, None, sensitive)?;
    let t = Contingency::build(preds, &vec![0; preds.len()], sensitive);
    t.gap(None).map_err(empty_cell("demographic parity"))
}

pub fn delta_eo(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_inputs(preds, Some(labels), sensitive)?;
    let t = Contingency::build(preds, labels, sensitive);
    let g0 = t.gap(Some(0)).map_err(empty_cell("equalized odds"))?;
    let g1 = t.gap(Some(1)).map_err(empty_cell("equalized odds"))?;
    Ok(g0.max(g1))
}

pub fn delta_eop(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_inputs(preds, Some(labels), sensitive)?;
    let t = Contingency::build(preds, labels, sensitive);
    t.gap(Some(1)).map_err(empty_cell("equal opportunity"))
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Positive-prediction rate per sensitive group `[a = 0, a = 1]`, overall and
/// conditioned on the true label. `None` marks an empty conditioning cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub overall: [Option<f64>; 2],
    pub given_negative: [Option<f64>; 2],
    pub given_positive: [Option<f64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub delta_dp: Option<f64>,
    pub delta_eo: Option<f64>,
    pub delta_eop: Option<f64>,
    pub group_rates: GroupRates,
}

/// The metric a fairness criterion is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    DeltaDp,
    DeltaEo,
    DeltaEop,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Accuracy,
        Metric::DeltaDp,
        Metric::DeltaEo,
        Metric::DeltaEop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::DeltaDp => "delta_dp",
            Metric::DeltaEo => "delta_eo",
            Metric::DeltaEop => "delta_eop",
        }
    }
}

impl FairnessReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::DeltaDp => self.delta_dp,
            Metric::DeltaEo => self.delta_eo,
            Metric::DeltaEop => self.delta_eop,
        }
    }
}

pub fn fairness_report(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<FairnessReport> {
    check_inputs(preds, Some(labels), sensitive)?;
    let t = Contingency::build(preds, labels, sensitive);
    let rates = |y| [t.rate(y, 0), t.rate(y, 1)];
    let eo = match (t.gap(Some(0)), t.gap(Some(1))) {
        (Ok(g0), Ok(g1)) => Some(g0.max(g1)),
        _ => None,
    };
    Ok(FairnessReport {
        accuracy: accuracy(preds, labels)?,
        delta_dp: t.gap(None).ok(),
        delta_eo: eo,
        delta_eop: t.gap(Some(1)).ok(),
        group_rates: GroupRates {
            overall: rates(None),
            given_negative: rates(Some(0)),
            given_positive: rates(Some(1)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dp_examples() {
        assert_eq!(delta_dp(&[1, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(delta_dp(&[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(delta_dp(&[1, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.5);
        assert!(matches!(
            delta_dp(&[1, 0], &[0, 0]),
            Err(Error::EmptyCell { .. })
        ));
    }

    #[test]
    fn eo_examples() {
        // y=1 rows: group 0 predicts [1,1], group 1 predicts [0,0];
        // y=0 rows: each group predicts [0,1].
        let preds = [1, 1, 0, 0, 0, 1, 0, 1];
        let labels = [1, 1, 1, 1, 0, 0, 0, 0];
        let sens = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(delta_eo(&preds, &labels, &sens).unwrap(), 1.0);
        assert_eq!(delta_eo(&labels, &labels, &sens).unwrap(), 0.0);
        assert_eq!(delta_eo(&[1; 8], &labels, &sens).unwrap(), 0.0);
    }

    #[test]
    fn eo_names_the_empty_cell() {
        let err = delta_eo(&[1, 0, 1], &[1, 0, 1], &[0, 0, 1]).unwrap_err();
        assert!(err.to_string().contains("(y=0, a=1)"), "{err}");
    }

    #[test]
    fn eop_examples() {
        let preds = [1, 1, 0, 1, 0, 0];
        let labels = [1; 6];
        let sens = [0, 0, 0, 1, 1, 1];
        let g = delta_eop(&preds, &labels, &sens).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(delta_eop(&labels, &labels, &sens).unwrap(), 0.0);
        assert!(matches!(
            delta_eo(&preds, &labels, &sens),
            Err(Error::EmptyCell { .. })
        ));
        let mut p = preds.to_vec();
        let mut y = labels.to_vec();
        let mut s = sens.to_vec();
        p.extend([0, 1]);
        y.extend([0, 0]);
        s.extend([0, 1]);
        assert!(delta_eo(&p, &y, &s).unwrap() >= 1.0 / 3.0);
    }

    #[test]
    fn accuracy_examples() {
        let labels = [1, 0, 1, 1, 0];
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        assert_eq!(accuracy(&flipped, &labels).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 0, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn report_degrades_gracefully() {
        let labels = [1, 0, 1, 1];
        let sens = [0, 0, 1, 1];
        let r = fairness_report(&labels, &labels, &sens).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.delta_eop, Some(0.0));
        // no (y=0, a=1) rows
        assert_eq!(r.delta_eo, None);
        assert_eq!(r.group_rates.given_negative[1], None);
        assert!(r.delta_dp.is_some());

        let perfect = fairness_report(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.delta_dp, Some(0.0));
        assert_eq!(perfect.delta_eo, Some(0.0));
        assert_eq!(perfect.delta_eop, Some(0.0));
    }

    #[test]
    fn report_length_mismatch() {
        assert!(fairness_report(&[1, 0], &[1], &[0, 1]).is_err());
    }
}
