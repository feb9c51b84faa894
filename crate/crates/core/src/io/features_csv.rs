//! Feature-matrix CSV: a header row of registry names (prefixed by `id`
//! and `label` columns), one record per row, missing values rendered as
//! empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::features::{feature_names, FeatureVector, FEATURE_COUNT};
use crate::pipeline::RhythmLabel;
use crate::Result;

pub type FeatureRow = (String, Option<RhythmLabel>, FeatureVector);

pub fn header_line() -> String {
    let mut line = String::from("id,label");
    for name in feature_names() {
        line.push(',');
        line.push_str(name);
    }
    line
}

pub fn format_row(id: &str, label: Option<RhythmLabel>, features: &FeatureVector) -> String {
    let mut line = String::with_capacity(FEATURE_COUNT * 8);
    line.push_str(id);
    line.push(',');
    if let Some(l) = label {
        line.push(l.as_char());
    }
    for value in features.values() {
        line.push(',');
        if let Some(v) = value {
            let _ = write!(line, "{v}");
        }
    }
    line
}

pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut text = header_line();
    text.push('\n');
    for (id, label, features) in rows {
        text.push_str(&format_row(id, *label, features));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path)?;
    parse_features_csv(&text)
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty feature file".into()))?;
    if header != header_line() {
        return Err(Error::Format(
            "feature file header does not match the registry".into(),
        ));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_COUNT + 2 {
            return Err(Error::Format(format!(
                "feature row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                FEATURE_COUNT + 2
            )));
        }
        let id = fields[0].to_string();
        let label = if fields[1].is_empty() {
            None
        } else {
            Some(RhythmLabel::parse(fields[1]).ok_or_else(|| {
                Error::Format(format!("feature row {}: bad label `{}`", lineno + 2, fields[1]))
            })?)
        };
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        for raw in &fields[2..] {
            if raw.is_empty() {
                values.push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::Format(format!("feature row {}: bad value `{raw}`", lineno + 2))
                })?;
                values.push(Some(v));
            }
        }
        rows.push((id, label, FeatureVector::from_values(values)?));
    }
    Ok(rows)
}
