//! CSV dataset ingestion.
//!
//! A dataset file has a header row, a `label` column of integer classes,
//! and numeric feature columns in header order. Test files may omit the
//! label column.

use std::path::Path;

use epiboot_core::LabeledDataset;

use crate::error::{CliError, CliResult};

/// Features with optional labels, as read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    /// Row-major.
    pub features: Vec<f64>,
    pub labels: Option<Vec<usize>>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        if self.dim() == 0 {
            self.labels.as_ref().map_or(0, Vec::len)
        } else {
            self.features.len() / self.dim()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }
}

/// Parsed labeled dataset and any warnings raised while inferring classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDataset {
    pub data: LabeledDataset,
    pub feature_names: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn parse_dataset_csv(path: &Path) -> CliResult<ParsedDataset> {
    let text = read(path)?;
    parse_dataset_str(&text, &path.display().to_string())
}

/// Reads a file whose `label` column is optional.
pub fn parse_feature_csv(path: &Path) -> CliResult<FeatureTable> {
    let text = read(path)?;
    parse_table(&text, &path.display().to_string(), false)
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses labeled CSV text; `source` names the input in diagnostics. The
/// class count is the largest label plus one.
pub fn parse_dataset_str(text: &str, source: &str) -> CliResult<ParsedDataset> {
    let table = parse_table(text, source, true)?;
    let labels = table.labels.clone().unwrap_or_default();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(CliError::input(format!(
            "{source}: labels span {classes} class(es); at least two are required"
        )));
    }
    let mut seen = vec![false; classes];
    for &y in &labels {
        seen[y] = true;
    }
    let warnings = seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(k, _)| format!("{source}: class {k} has no rows"))
        .collect();
    let data = LabeledDataset::new(table.features, labels, table.feature_names.len(), classes)?;
    Ok(ParsedDataset {
        data,
        feature_names: table.feature_names,
        warnings,
    })
}

fn parse_table(text: &str, source: &str, require_label: bool) -> CliResult<FeatureTable> {
    if text.trim().is_empty() {
        return Err(CliError::input(format!("{source}:1: empty file")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::input(format!("{source}:1: unreadable header: {e}")))?
        .clone();
    let label_col = header.iter().position(|h| h == "label");
    if require_label && label_col.is_none() {
        return Err(CliError::input(format!("{source}:1: missing 'label' column")));
    }
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_col).collect();
    let feature_names = feature_cols.iter().map(|&c| header[c].to_string()).collect();
    let mut features = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(format!("{source}:{line}: malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for &c in &feature_cols {
            let raw = &record[c];
            let v: f64 = raw.parse().map_err(|_| {
                CliError::input(format!(
                    "{source}:{line}: non-numeric feature '{}' = '{raw}'",
                    &header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "{source}:{line}: non-finite feature '{}' = '{raw}'",
                    &header[c]
                )));
            }
            features.push(v);
        }
        if let (Some(c), Some(labels)) = (label_col, labels.as_mut()) {
            let raw = &record[c];
            let y: usize = raw
                .parse()
                .map_err(|_| CliError::input(format!("{source}:{line}: label out of range: '{raw}'")))?;
            labels.push(y);
        }
    }
    let rows = if feature_cols.is_empty() {
        labels.as_ref().map_or(0, Vec::len)
    } else {
        features.len() / feature_cols.len()
    };
    if rows == 0 {
        return Err(CliError::input(format!("{source}:2: empty file (no data rows)")));
    }
    Ok(FeatureTable {
        feature_names,
        features,
        labels,
    })
}

/// Checks test features (and labels, when present) against a training set.
pub fn check_compatible(train: &LabeledDataset, test: &FeatureTable, source: &str) -> CliResult<()> {
    if test.dim() != train.dim() {
        return Err(CliError::input(format!(
            "{source}: {} feature columns, training data has {}",
            test.dim(),
            train.dim()
        )));
    }
    if let Some(labels) = &test.labels {
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= train.class_count()) {
            return Err(CliError::input(format!(
                "{source}:{}: label out of range: {y} (training data has {} classes)",
                i + 2,
                train.class_count()
            )));
        }
    }
    Ok(())
}

/// Writes a labeled dataset as CSV with features `x0, x1, ...`.
pub fn dataset_to_csv(data: &LabeledDataset) -> String {
    let mut out = String::new();
    for j in 0..data.dim() {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("label\n");
    for (x, y) in data.iter() {
        for v in x {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let parsed = parse_dataset_str("x0,x1,label\n0.5,-1.2,1\n", "t.csv").unwrap();
        assert_eq!(parsed.data.len(), 1);
        assert_eq!(parsed.data.dim(), 2);
        assert_eq!(parsed.data.class_count(), 2);
        assert_eq!(parsed.data.row(0), &[0.5, -1.2]);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn empty_class_warns() {
        let parsed = parse_dataset_str("x,label\n1,0\n2,2\n", "t.csv").unwrap();
        assert_eq!(parsed.data.class_count(), 3);
        assert_eq!(parsed.warnings, vec!["t.csv: class 1 has no rows".to_string()]);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = |text: &str| parse_dataset_str(text, "d.csv").unwrap_err().to_string();
        assert!(err("x,y\n1,0\n").contains("missing 'label'"));
        assert!(err("x,label\n1,0\nNaN,1\n").starts_with("d.csv:3: non-finite"));
        assert!(err("x,label\n1,0\nabc,1\n").starts_with("d.csv:3: non-numeric"));
        assert!(err("x,label\n1,0\n2,-1\n").starts_with("d.csv:3: label out of range"));
        assert!(err("").contains("empty file"));
        assert!(err("x,label\n").contains("empty file"));
    }

    #[test]
    fn crlf_and_round_trip() {
        let parsed = parse_dataset_str("a,label,b\r\n1,1,2\r\n3,0,4\r\n", "t.csv").unwrap();
        assert_eq!(parsed.feature_names, vec!["a", "b"]);
        assert_eq!(parsed.data.row(1), &[3.0, 4.0]);
        let again = parse_dataset_str(&dataset_to_csv(&parsed.data), "r.csv").unwrap();
        assert_eq!(again.data, parsed.data);
    }
}
