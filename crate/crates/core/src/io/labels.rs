//! Label files: comma-separated `<record id>,<label>` lines.

use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::pipeline::RhythmLabel;
use crate::Result;

/// Read `id,label` lines. Ids must be unique and labels one of `N A O ~`.
pub fn read_labels(path: &Path) -> Result<Vec<(String, RhythmLabel)>> {
    let text = fs::read_to_string(path)?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<Vec<(String, RhythmLabel)>> {
    let mut out: Vec<(String, RhythmLabel)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("label line {}: expected `id,label`", lineno + 1))
        })?;
        let label = RhythmLabel::parse(label.trim()).ok_or_else(|| {
            Error::Format(format!("label line {}: unknown label `{}`", lineno + 1, label))
        })?;
        let id = id.trim().to_string();
        if out.iter().any(|(existing, _)| existing == &id) {
            return Err(Error::Format(format!("duplicate record id `{id}`")));
        }
        out.push((id, label));
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[(String, RhythmLabel)]) -> Result<()> {
    let mut text = String::new();
    for (id, label) in labels {
        text.push_str(id);
        text.push(',');
        text.push(label.as_char());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
