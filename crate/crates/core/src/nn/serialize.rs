//! Model files: one JSON header line, then parameters and running
//! statistics as little-endian 64-bit floats in canonical visitor order.
//! Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::model::{Model, ModelConfig};
use crate::Result;

const FORMAT_TAG: &str = "densenet-rowbn-v1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    config: ModelConfig,
    seed: u64,
    param_values: usize,
    stat_values: usize,
}

fn counts(model: &Model) -> (usize, usize) {
    let mut params = 0usize;
    model.for_each_param(&mut |_, p| params += p.len());
    let mut stats = 0usize;
    model.for_each_stat(&mut |_, s| stats += s.len());
    (params, stats)
}

pub fn serialize_model(model: &Model) -> Vec<u8> {
    let (param_values, stat_values) = counts(model);
    let header = Header {
        format: FORMAT_TAG.to_string(),
        config: model.config,
        seed: model.seed,
        param_values,
        stat_values,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    model.for_each_param(&mut |_, p| {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    model.for_each_stat(&mut |_, s| {
        for v in s {
            out.extend_from_slice(&v.to_le_bytes());
        }
    });
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<Model> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("model file has no header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad model header: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "unsupported model format `{}`",
            header.format
        )));
    }

    let mut model = Model::new(header.config, header.seed)?;
    let (param_values, stat_values) = counts(&model);
    if param_values != header.param_values || stat_values != header.stat_values {
        return Err(Error::Format(format!(
            "header declares {}+{} values, architecture needs {param_values}+{stat_values}",
            header.param_values, header.stat_values
        )));
    }
    let body = &bytes[newline + 1..];
    let expected_len = (param_values + stat_values) * 8;
    if body.len() != expected_len {
        return Err(Error::Format(format!(
            "model body is {} bytes, expected {expected_len}",
            body.len()
        )));
    }

    let mut offset = 0usize;
    let mut take = |len: usize, target: &mut Vec<f64>| {
        for (i, v) in target.iter_mut().enumerate().take(len) {
            let at = offset + i * 8;
            *v = f64::from_le_bytes(body[at..at + 8].try_into().expect("8 bytes"));
        }
        offset += len * 8;
    };
    model.for_each_param_mut(&mut |_, p| {
        let len = p.len();
        take(len, p);
    });
    model.for_each_stat_mut(&mut |_, s| {
        let len = s.len();
        take(len, s);
    });
    Ok(model)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, serialize_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    deserialize_model(&fs::read(path)?)
}
