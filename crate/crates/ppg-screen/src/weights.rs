//! Weights container.
//!
//! ```text
//! magic     8 bytes   "PPGSCRN\0"
//! version   u32 LE
//! hlen      u64 LE
//! header    hlen bytes of JSON: model kind, config echo, tensor table, provenance
//! tensors   f64 LE, each tensor in header order
//! checksum  SHA-256 of every preceding byte
//! ```

use std::path::Path;

use ppg_screen_core::eval::{FittedModel, ModelKind};
use ppg_screen_core::features::LogisticModel;
use ppg_screen_core::model::{ModelConfig, ModelWeights};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Provenance;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PPGSCRN\0";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tensor {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelKind,
    /// ResNet architecture; absent for the baseline.
    config: Option<ModelConfig>,
    /// Baseline optimiser steps; absent for the ResNet.
    steps: Option<usize>,
    tensors: Vec<Tensor>,
    provenance: Provenance,
}

const BASELINE_TENSORS: [&str; 5] = ["medians", "means", "sds", "weights", "bias"];

pub fn encode(model: &FittedModel, provenance: &Provenance) -> Vec<u8> {
    let (config, steps, tensors): (_, _, Vec<(String, Vec<f64>)>) = match model {
        FittedModel::Resnet(w) => (
            Some(w.config.clone()),
            None,
            w.tensors().into_iter().map(|(n, t)| (n.to_owned(), t.to_vec())).collect(),
        ),
        FittedModel::Baseline(m) => {
            let parts = [&m.medians, &m.means, &m.sds, &m.weights, &vec![m.bias]];
            let named = BASELINE_TENSORS.iter().zip(parts).map(|(n, t)| (n.to_string(), t.clone())).collect();
            (None, Some(m.steps), named)
        }
    };
    let header = Header {
        model: model.kind(),
        config,
        steps,
        tensors: tensors.iter().map(|(n, t)| Tensor { name: n.clone(), len: t.len() }).collect(),
        provenance: provenance.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(json.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(FittedModel, Provenance)> {
    let bad = |why: String| Error::format(path, why);
    if bytes.len() < MAGIC.len() + 12 + CHECKSUM_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not a weights file".into()));
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != sum {
        return Err(bad("checksum mismatch: file is corrupt".into()));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported container version {version}")));
    }
    let hlen = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let json = body.get(20..20usize.saturating_add(hlen)).ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;

    let mut data = &body[20 + hlen..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for t in &header.tensors {
        let n = t.len.checked_mul(8).filter(|&n| n <= data.len()).ok_or_else(|| bad(format!("tensor `{}` truncated", t.name)))?;
        let (raw, rest) = data.split_at(n);
        tensors.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Vec<f64>>());
        data = rest;
    }
    if !data.is_empty() {
        return Err(bad(format!("{} trailing bytes after tensors", data.len())));
    }

    let model = match header.model {
        ModelKind::Resnet => {
            let config = header.config.ok_or_else(|| bad("resnet header lacks a config".into()))?;
            let w = ModelWeights::from_tensors(&config, &tensors)?;
            let expected: Vec<&str> = w.tensors().into_iter().map(|(n, _)| n).collect();
            let got: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
            if expected != got {
                return Err(bad("tensor names do not match the architecture".into()));
            }
            FittedModel::Resnet(Box::new(w))
        }
        ModelKind::Baseline => {
            let names: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
            if names != BASELINE_TENSORS {
                return Err(bad(format!("baseline tensors must be {BASELINE_TENSORS:?}")));
            }
            let dim = tensors[0].len();
            if tensors[1..4].iter().any(|t| t.len() != dim) || tensors[4].len() != 1 {
                return Err(bad("baseline tensor lengths disagree".into()));
            }
            let mut it = tensors.into_iter();
            let mut next = || it.next().unwrap();
            FittedModel::Baseline(LogisticModel {
                medians: next(),
                means: next(),
                sds: next(),
                weights: next(),
                bias: next()[0],
                steps: header.steps.unwrap_or(0),
            })
        }
    };
    Ok((model, header.provenance))
}

pub fn save(path: &Path, model: &FittedModel, provenance: &Provenance) -> Result<()> {
    std::fs::write(path, encode(model, provenance)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(FittedModel, Provenance)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use ppg_screen_core::model::init_weights;

    fn prov() -> Provenance {
        Provenance::new("train", &RunConfig::default())
    }

    fn small() -> ModelConfig {
        ModelConfig {
            fc_hidden: 8,
            conv1_channels: 4,
            input_len: 200,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn resnet_round_trip_is_byte_identical() {
        let mut w = init_weights(&small(), 3).unwrap();
        for (i, r) in w.running.iter_mut().enumerate() {
            *r += i as f64 * 0.125;
        }
        let m = FittedModel::Resnet(Box::new(w));
        let a = encode(&m, &prov());
        let (back, p) = decode(&a, Path::new("w")).unwrap();
        assert_eq!(back, m);
        assert_eq!(p, prov());
        assert_eq!(encode(&back, &p), a);
    }

    #[test]
    fn baseline_round_trip() {
        let mut lm = LogisticModel::zeros(3);
        lm.weights = vec![0.1, -2.5, f64::MIN_POSITIVE];
        lm.bias = -0.3;
        lm.steps = 17;
        let m = FittedModel::Baseline(lm);
        let a = encode(&m, &prov());
        let (back, _) = decode(&a, Path::new("w")).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back, &prov()), a);
    }

    #[test]
    fn corruption_is_detected() {
        let a = encode(&FittedModel::Resnet(Box::new(init_weights(&small(), 1).unwrap())), &prov());
        for pos in [0, 9, 30, a.len() / 2, a.len() - 1] {
            let mut b = a.clone();
            b[pos] ^= 0x40;
            assert!(matches!(decode(&b, Path::new("w")), Err(Error::Format { .. })), "flip at {pos}");
        }
        assert!(decode(&a[..a.len() - 9], Path::new("w")).is_err());
        let err = {
            let mut b = a.clone();
            b[a.len() / 2] ^= 1;
            decode(&b, Path::new("w")).unwrap_err().to_string()
        };
        assert!(err.contains("checksum"), "{err}");
    }
}
