use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::{Error, Result};

/// Column roles and value mappings for a raw CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label_column: String,
    pub sensitive_column: String,
    /// Label value mapped to `y = 1`; the other value maps to 0.
    pub positive_label_value: String,
    /// Sensitive value mapped to `a = 1`.
    pub privileged_group_value: String,
    pub categorical_columns: Vec<String>,
    pub numeric_columns: Vec<String>,
    /// Field values treated as missing (the row is dropped).
    pub missing_values: Vec<String>,
    /// Map every non-privileged sensitive value to 0 instead of requiring
    /// the column to hold exactly two values.
    pub binarize_sensitive: bool,
}

impl DatasetSchema {
    pub fn new(
        label_column: &str,
        sensitive_column: &str,
        positive: &str,
        privileged: &str,
    ) -> Self {
        Self {
            label_column: label_column.to_string(),
            sensitive_column: sensitive_column.to_string(),
            positive_label_value: positive.to_string(),
            privileged_group_value: privileged.to_string(),
            categorical_columns: Vec::new(),
            numeric_columns: Vec::new(),
            missing_values: default_missing_values(),
            binarize_sensitive: false,
        }
    }

    /// Schema matching files produced by [`write_csv`].
    pub fn encoded(numeric_columns: &[String]) -> Self {
        let mut schema = Self::new("label", "sensitive", "1", "1");
        schema.numeric_columns = numeric_columns.to_vec();
        schema
    }

    fn validate(&self) -> Result<()> {
        if self.label_column == self.sensitive_column {
            return Err(Error::invalid("label and sensitive column must differ"));
        }
        Ok(())
    }
}

pub fn default_missing_values() -> Vec<String> {
    ["", "?", "NA"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows: usize,
    pub features: usize,
}

struct RawRow {
    numeric: Vec<f64>,
    categorical: Vec<String>,
    label: String,
    sensitive: String,
}

/// Reads an RFC-4180 CSV with a header row and encodes it per `schema`.
///
/// Numeric columns pass through; categorical columns are one-hot encoded in
/// schema order, levels sorted. Rows with a missing or unparseable value in
/// any schema column are dropped and counted in the report. The sensitive
/// column is never encoded as a feature here; see
/// [`Dataset::with_sensitive_feature`].
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    schema.validate()?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header = reader.headers().map_err(csv_err)?.clone();
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &String| {
        position
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.clone()))
    };
    let label_idx = find(&schema.label_column)?;
    let sensitive_idx = find(&schema.sensitive_column)?;
    let numeric_cols: Vec<&String> = schema
        .numeric_columns
        .iter()
        .filter(|c| **c != schema.sensitive_column)
        .collect();
    let categorical_cols: Vec<&String> = schema
        .categorical_columns
        .iter()
        .filter(|c| **c != schema.sensitive_column)
        .collect();
    let numeric_idx = numeric_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let categorical_idx = categorical_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let is_missing = |v: &str| schema.missing_values.iter().any(|mv| mv == v);
    let mut rows = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        rows_read += 1;
        let field = |i: usize| record.get(i).filter(|v| !is_missing(v));
        let parsed = (|| {
            let numeric = numeric_idx
                .iter()
                .map(|&i| field(i)?.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()?;
            let categorical = categorical_idx
                .iter()
                .map(|&i| field(i).map(str::to_string))
                .collect::<Option<Vec<_>>>()?;
            Some(RawRow {
                numeric,
                categorical,
                label: field(label_idx)?.to_string(),
                sensitive: field(sensitive_idx)?.to_string(),
            })
        })();
        match parsed {
            Some(row) => rows.push(row),
            None => rows_dropped += 1,
        }
    }
    if rows_dropped > 0 {
        log::warn!(
            "{}: dropped {rows_dropped} of {rows_read} rows with missing or unparseable values",
            path.display()
        );
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows {
            dropped: rows_dropped,
        });
    }

    let distinct = |f: fn(&RawRow) -> &str| rows.iter().map(f).collect::<BTreeSet<_>>().len();
    let n_labels = distinct(|r| &r.label);
    if n_labels > 2 {
        return Err(Error::NonBinaryLabel {
            column: schema.label_column.clone(),
            distinct: n_labels,
        });
    }
    let n_sensitive = distinct(|r| &r.sensitive);
    if n_sensitive > 2 && !schema.binarize_sensitive {
        return Err(Error::NonBinarySensitive {
            column: schema.sensitive_column.clone(),
            distinct: n_sensitive,
        });
    }

    let levels: Vec<Vec<String>> = (0..categorical_idx.len())
        .map(|k| {
            rows.iter()
                .map(|r| r.categorical[k].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();

    let mut feature_names: Vec<String> = numeric_cols.iter().map(|c| c.to_string()).collect();
    let mut column_kinds = vec![ColumnKind::Numeric; numeric_cols.len()];
    for (col, lv) in categorical_cols.iter().zip(&levels) {
        for v in lv {
            feature_names.push(format!("{col}={v}"));
            column_kinds.push(ColumnKind::Indicator);
        }
    }

    let m = rows.len();
    let d = feature_names.len();
    let mut features = Array2::zeros((m, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.numeric.iter().enumerate() {
            features[[i, j]] = *v;
        }
        let mut offset = row.numeric.len();
        for (k, lv) in levels.iter().enumerate() {
            let pos = lv
                .binary_search(&row.categorical[k])
                .expect("level collected from the same rows");
            features[[i, offset + pos]] = 1.0;
            offset += lv.len();
        }
    }
    let labels = rows
        .iter()
        .map(|r| u8::from(r.label == schema.positive_label_value))
        .collect();
    let sensitive = rows
        .iter()
        .map(|r| u8::from(r.sensitive == schema.privileged_group_value))
        .collect();

    let ds = Dataset::new(features, feature_names, column_kinds, sensitive, labels)?;
    let report = LoadReport {
        rows_read,
        rows_dropped,
        rows: m,
        features: ds.n_features(),
    };
    Ok((ds, report))
}

/// Writes the encoded features followed by `sensitive` and `label` columns.
///
/// A feature column holding a copy of the sensitive attribute is not
/// written; append it again after loading.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let keep: Vec<usize> = (0..ds.n_features())
        .filter(|&j| ds.column_kinds()[j] != ColumnKind::Sensitive)
        .collect();
    let mut header: Vec<&str> = keep
        .iter()
        .map(|&j| ds.feature_names()[j].as_str())
        .collect();
    header.extend(["sensitive", "label"]);
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.len() {
        let row = ds.row(i);
        let mut fields: Vec<String> = keep.iter().map(|&j| row[j].to_string()).collect();
        fields.push(ds.sensitive()[i].to_string());
        fields.push(ds.labels()[i].to_string());
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
