use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{MeanStd, ResultRecord};
use crate::metrics::Metric;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::invalid(format!("unknown output format `{other}`"))),
        }
    }
}

/// Reads records written in the JSON format, either an array or a single
/// record.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.is_array() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}

pub fn render(records: &[ResultRecord], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(records)? + "\n"),
        OutputFormat::Csv => render_csv(records),
        OutputFormat::Markdown => Ok(render_markdown(records)),
    }
}

pub fn emit_results(
    records: &[ResultRecord],
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = render(records, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Long format: one row per record, metric and split. Values are fractions,
/// exactly as in the JSON output.
fn render_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv {
        path: "<output>".into(),
        source: e,
    };
    w.write_record(["name", "method", "metric", "split", "mean", "std", "n"])
        .map_err(csv_err)?;
    for rec in records {
        for s in &rec.summary {
            let sides = [("train", s.train), ("test", s.test)];
            for (split, ms) in sides {
                if let Some(ms) = ms {
                    w.write_record([
                        rec.config.name.clone(),
                        rec.config.method.as_str().to_string(),
                        s.metric.name().to_string(),
                        split.to_string(),
                        ms.mean.to_string(),
                        ms.std.to_string(),
                        ms.n.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            if let Some(gap) = s.generalization_gap {
                w.write_record([
                    rec.config.name.as_str(),
                    rec.config.method.as_str(),
                    s.metric.name(),
                    "gap",
                    &gap.to_string(),
                    "",
                    "",
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn pct(ms: Option<MeanStd>) -> String {
    match ms {
        Some(ms) => format!("{:.2}±{:.2}", 100.0 * ms.mean, 100.0 * ms.std),
        None => "n/a".into(),
    }
}

fn pct_diff(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{:+.2}", 100.0 * v))
}

const GAPS: [Metric; 3] = [Metric::DeltaDp, Metric::DeltaEo, Metric::DeltaEop];

/// Test-split results in percent, then train/test comparisons per metric.
fn render_markdown(records: &[ResultRecord]) -> String {
    let mut out = String::new();
    out.push_str("| Method | Accuracy↑ | Δ_DP↓ | Δ_EO↓ | Δ_EOP↓ |\n|---|---|---|---|---|\n");
    for rec in records {
        let _ = write!(
            out,
            "| {} | {}",
            rec.config.name,
            pct(rec.metric(Metric::Accuracy).test)
        );
        for m in GAPS {
            let _ = write!(out, " | {}", pct(rec.metric(m).test));
        }
        out.push_str(" |\n");
    }
    for m in std::iter::once(Metric::Accuracy).chain(GAPS) {
        let _ = write!(
            out,
            "\n{}\n\n| Method | Train | Test | Test − Train |\n|---|---|---|---|\n",
            m.name()
        );
        for rec in records {
            let s = rec.metric(m);
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                rec.config.name,
                pct(s.train),
                pct(s.test),
                pct_diff(s.generalization_gap)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names() {
        assert_eq!("JSON".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert_eq!(
            "md".parse::<OutputFormat>().unwrap(),
            OutputFormat::Markdown
        );
        assert!("xml".parse::<OutputFormat>().is_err());
    }

    #[test]
    fn percent_cells() {
        let ms = MeanStd {
            mean: 0.8451,
            std: 0.0012,
            n: 3,
        };
        assert_eq!(pct(Some(ms)), "84.51±0.12");
        assert_eq!(pct(None), "n/a");
        assert_eq!(pct_diff(Some(-0.0031)), "-0.31");
    }
}
