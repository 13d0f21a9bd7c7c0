use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::format::decimal;

/// Reads a dataset CSV: optional `# classes=K` first line, a header
/// `f0,...,f{D-1},label`, then one row per sample.
pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

/// Parses CSV text; `origin` is used in diagnostics only.
pub fn parse_csv(text: &str, origin: impl Into<PathBuf>) -> Result<FeatureDataset> {
    let origin = origin.into();
    let err = |line: usize, reason: String| Error::Parse {
        path: origin.clone(),
        line,
        reason,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut declared_classes = None;

    let (mut header_no, mut header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if let Some(directive) = header.strip_prefix('#') {
        let value = directive
            .trim()
            .strip_prefix("classes=")
            .ok_or_else(|| err(header_no, format!("unrecognised directive `{header}`")))?;
        let k: usize = value
            .trim()
            .parse()
            .map_err(|_| err(header_no, format!("bad class count `{value}`")))?;
        declared_classes = Some(k);
        (header_no, header) = lines
            .next()
            .ok_or_else(|| err(header_no + 1, "missing header".into()))?;
    }

    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns.last() != Some(&"label") {
        return Err(err(
            header_no,
            "header must list feature columns followed by `label`".into(),
        ));
    }
    let d = columns.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(err(
                line_no,
                format!("expected {} fields, found {}", d + 1, cells.len()),
            ));
        }
        for (j, cell) in cells[..d].iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("feature f{j} is not a number: `{cell}`")))?;
            if !v.is_finite() {
                return Err(err(
                    line_no,
                    format!("feature f{j} is not finite: `{cell}`"),
                ));
            }
            values.push(v);
        }
        let raw = cells[d].trim();
        let label: i64 = raw
            .parse()
            .map_err(|_| err(line_no, format!("label is not an integer: `{raw}`")))?;
        if label < 0 {
            return Err(err(line_no, format!("label is negative: {label}")));
        }
        let label = label as usize;
        if let Some(k) = declared_classes {
            if label >= k {
                return Err(err(
                    line_no,
                    format!("label {label} outside declared classes={k}"),
                ));
            }
        }
        labels.push(label);
    }

    if labels.is_empty() {
        return Err(err(header_no, "no data rows".into()));
    }
    let k = declared_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    FeatureDataset::new(features, labels, k)
}

/// Serializes with a `# classes=K` directive so K survives subsets that
/// lack the highest class.
pub fn to_csv_string(ds: &FeatureDataset) -> String {
    let d = ds.feature_dim();
    let mut out = String::new();
    out.push_str(&format!("# classes={}\n", ds.num_classes()));
    for j in 0..d {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for (row, label) in ds.features().rows().into_iter().zip(ds.labels()) {
        for v in row {
            out.push_str(&decimal(*v));
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

pub fn write_csv(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv_string(ds)).map_err(|e| Error::io(path, e))
}
