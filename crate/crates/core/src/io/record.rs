//! Record file format: a text header plus a companion binary of 16-bit
//! samples.
//!
//! Header file (`<id>.hea`): a single line `<id> <fs> <n> <gain>`. The
//! companion `<id>.dat` holds `n` little-endian signed 16-bit integers;
//! amplitude in millivolts is `raw / gain`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::pipeline::RhythmLabel;
use crate::Result;

/// Identified single-lead waveform with sampling rate and optional
/// reference label.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub id: String,
    pub sampling_rate: f64,
    /// Amplitudes in millivolts.
    pub samples: Vec<f64>,
    pub label: Option<RhythmLabel>,
}

impl EcgRecord {
    pub fn new(id: impl Into<String>, sampling_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if sampling_rate <= 0.0 {
            return Err(Error::InvalidSignal("sampling rate must be positive".into()));
        }
        crate::signal::check_finite(&samples)?;
        Ok(Self {
            id: id.into(),
            sampling_rate,
            samples,
            label: None,
        })
    }

    /// Duration in seconds (`n / fs`).
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate
    }
}

fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("dat")
}

/// Parse a header file and load the companion samples.
pub fn read_record(header_path: &Path) -> Result<EcgRecord> {
    let text = fs::read_to_string(header_path)?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Format(format!(
            "malformed header {}: expected `<id> <fs> <n> <gain>`, got {} fields",
            header_path.display(),
            fields.len()
        )));
    }
    let id = fields[0].to_string();
    let fs_hz: f64 = fields[1]
        .parse()
        .map_err(|_| Error::Format(format!("malformed header: bad sampling rate `{}`", fields[1])))?;
    let n: usize = fields[2]
        .parse()
        .map_err(|_| Error::Format(format!("malformed header: bad sample count `{}`", fields[2])))?;
    let gain: f64 = fields[3]
        .parse()
        .map_err(|_| Error::Format(format!("malformed header: bad gain `{}`", fields[3])))?;
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Format(format!("bad gain: {gain} (must be positive)")));
    }
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::Format(format!("bad sampling rate: {fs_hz}")));
    }

    let bytes = fs::read(data_path(header_path))?;
    if bytes.len() != 2 * n {
        return Err(Error::Format(format!(
            "length mismatch: header declares {} samples, data file holds {}",
            n,
            bytes.len() / 2
        )));
    }
    let samples = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / gain)
        .collect();
    EcgRecord::new(id, fs_hz, samples)
}

/// Write `<id>.hea` and `<id>.dat` under `dir`, quantizing samples to
/// 16-bit integers at the given gain. Returns the header path.
pub fn write_record(dir: &Path, record: &EcgRecord, gain: f64) -> Result<PathBuf> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Format(format!("bad gain: {gain} (must be positive)")));
    }
    let mut bytes = Vec::with_capacity(record.samples.len() * 2);
    for &mv in &record.samples {
        let raw = (mv * gain).round();
        if raw < i16::MIN as f64 || raw > i16::MAX as f64 {
            return Err(Error::Format(format!(
                "sample {mv} mV out of 16-bit range at gain {gain}"
            )));
        }
        bytes.extend_from_slice(&(raw as i16).to_le_bytes());
    }
    let header_path = dir.join(format!("{}.hea", record.id));
    fs::write(
        &header_path,
        format!(
            "{} {} {} {}\n",
            record.id,
            record.sampling_rate,
            record.samples.len(),
            gain
        ),
    )?;
    fs::write(data_path(&header_path), bytes)?;
    Ok(header_path)
}
