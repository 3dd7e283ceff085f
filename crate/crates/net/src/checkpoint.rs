//! Model checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"BRAHMINN"
//! 8       4     format version, u32 (currently 1)
//! 12      8     header length H in bytes, u64
//! 20      H     header, UTF-8 JSON (see below)
//! 20+H    8·P   parameter payload: every tensor listed in header.tensors,
//!               in that order, as row-major f64 values
//! ```
//!
//! The header is a JSON object with the fields
//! `architecture` (object with `family` and, for mobilenet_micro, `pooling`; or null),
//! `input_shape` (`[C, H, W]`), `num_classes`, `labels` (ordered class names),
//! `layers` (layer specs tagged by `kind`) and `tensors`
//! (`{"layer": i, "name": "weight"|"bias", "shape": [...]}` per tensor).
//! Readers reject trailing bytes and any shape that disagrees with the layers.

use crate::error::{NetError, Result};
use crate::graph::ModelGraph;
use crate::layer::LayerSpec;
use crate::tensor::Tensor;
use crate::zoo::Architecture;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"BRAHMINN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub architecture: Option<Architecture>,
    pub labels: Vec<String>,
    pub model: ModelGraph,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    layer: usize,
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Option<Architecture>,
    input_shape: [usize; 3],
    num_classes: usize,
    labels: Vec<String>,
    layers: Vec<LayerSpec>,
    tensors: Vec<TensorEntry>,
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(NetError::Checkpoint(msg.into()))
}

impl Checkpoint {
    pub fn new(architecture: Option<Architecture>, labels: Vec<String>, model: ModelGraph) -> Result<Self> {
        if labels.len() != model.num_classes() {
            return bad(format!(
                "{} labels for a {}-class model",
                labels.len(),
                model.num_classes()
            ));
        }
        Ok(Self {
            architecture,
            labels,
            model,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let tensors = m
            .params()
            .iter()
            .enumerate()
            .flat_map(|(layer, group)| {
                group.iter().enumerate().map(move |(i, t)| TensorEntry {
                    layer,
                    name: if i == 0 { "weight" } else { "bias" }.into(),
                    shape: t.shape().to_vec(),
                })
            })
            .collect();
        let header = Header {
            architecture: self.architecture,
            input_shape: m.input_shape(),
            num_classes: m.num_classes(),
            labels: self.labels.clone(),
            layers: m.layers().to_vec(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + 8 * m.count_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in m.params().iter().flatten().flat_map(|t| t.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return bad("missing magic");
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return bad(format!("unsupported format version {version}"));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let hend = usize::try_from(hlen)
            .ok()
            .and_then(|h| h.checked_add(20))
            .filter(|&e| e <= bytes.len());
        let Some(hend) = hend else {
            return bad("header length exceeds file size");
        };
        let header: Header =
            serde_json::from_slice(&bytes[20..hend]).map_err(|e| NetError::Checkpoint(format!("header: {e}")))?;
        let mut params: Vec<Vec<Tensor>> = vec![Vec::new(); header.layers.len()];
        let mut payload = &bytes[hend..];
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            if payload.len() < 8 * n {
                return bad("truncated parameter payload");
            }
            let data = payload[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            payload = &payload[8 * n..];
            let Some(group) = params.get_mut(entry.layer) else {
                return bad(format!("tensor refers to missing layer {}", entry.layer));
            };
            group.push(Tensor::new(entry.shape.clone(), data).map_err(|e| NetError::Checkpoint(e.to_string()))?);
        }
        if !payload.is_empty() {
            return bad(format!("{} trailing bytes", payload.len()));
        }
        let model = ModelGraph::from_parts(header.input_shape, header.layers, params)
            .map_err(|e| NetError::Checkpoint(e.to_string()))?;
        if model.num_classes() != header.num_classes {
            return bad("num_classes disagrees with the layer stack");
        }
        Self::new(header.architecture, header.labels, model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::PoolMode;
    use crate::zoo::{build_mobilenet_micro, ZooConfig};

    fn sample() -> Checkpoint {
        let cfg = ZooConfig { width: 0.25, seed: 9 };
        let model = build_mobilenet_micro([1, 16, 16], 3, PoolMode::Max, &cfg).unwrap();
        Checkpoint::new(
            Some(Architecture::MobilenetMicro { pooling: PoolMode::Max }),
            vec!["a".into(), "ba".into(), "ka".into()],
            model,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), c);
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());
        assert!(Checkpoint::from_bytes(&[]).is_err());
    }

    #[test]
    fn label_count_must_match() {
        let c = sample();
        assert!(Checkpoint::new(None, vec!["x".into()], c.model).is_err());
    }
}
