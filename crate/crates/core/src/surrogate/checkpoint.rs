use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::hasher::FeatureHasher;
use super::model::{ModelConfig, ModelParams, HEAD_WIDTH};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "silverloop-student";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_seen: usize,
    pub steps: u64,
    /// Fingerprint of the most recent training set.
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    /// Little-endian f32, base64.
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    hasher: FeatureHasher,
    ngram_orders: Vec<u8>,
    embed_dim: usize,
    hidden_dim: usize,
    tensors: BTreeMap<String, Tensor>,
    meta: TrainingMeta,
}

fn encode(values: &[f32], shape: Vec<usize>) -> Tensor {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Tensor {
        shape,
        data: B64.encode(bytes),
    }
}

fn decode(tensors: &BTreeMap<String, Tensor>, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let t = tensors
        .get(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
    if t.shape != shape {
        return Err(Error::Checkpoint(format!(
            "tensor {name} has shape {:?}, expected {shape:?}",
            t.shape
        )));
    }
    let bytes = B64
        .decode(&t.data)
        .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
    let n: usize = shape.iter().product();
    if bytes.len() != n * 4 {
        return Err(Error::Checkpoint(format!(
            "tensor {name} holds {} bytes, expected {}",
            bytes.len(),
            n * 4
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(format!("tensor {name} holds non-finite values")));
    }
    Ok(values)
}

impl Checkpoint {
    /// Wraps parameters that have not been trained.
    pub fn new(params: ModelParams) -> Self {
        Checkpoint {
            params,
            meta: TrainingMeta::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let p = &self.params;
        let (n, d, h) = (p.config.hasher.n_buckets, p.config.embed_dim, p.config.hidden_dim);
        let mut tensors = BTreeMap::new();
        tensors.insert("embedding".into(), encode(&p.embedding, vec![n, d]));
        tensors.insert("hidden_w".into(), encode(&p.hidden_w, vec![d, h]));
        tensors.insert("hidden_b".into(), encode(&p.hidden_b, vec![h]));
        tensors.insert("head_w".into(), encode(&p.head_w, vec![h, HEAD_WIDTH]));
        tensors.insert("head_b".into(), encode(&p.head_b, vec![HEAD_WIDTH]));
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hasher: p.config.hasher,
            ngram_orders: vec![1, 2],
            embed_dim: d,
            hidden_dim: h,
            tensors,
            meta: self.meta.clone(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        if file.ngram_orders != [1, 2] {
            return Err(Error::Checkpoint("only n-gram orders [1, 2] are supported".into()));
        }
        let config = ModelConfig {
            hasher: file.hasher,
            embed_dim: file.embed_dim,
            hidden_dim: file.hidden_dim,
        };
        config
            .validate()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let (n, d, h) = (config.hasher.n_buckets, config.embed_dim, config.hidden_dim);
        let t = &file.tensors;
        let params = ModelParams {
            config,
            embedding: decode(t, "embedding", &[n, d])?,
            hidden_w: decode(t, "hidden_w", &[d, h])?,
            hidden_b: decode(t, "hidden_b", &[h])?,
            head_w: decode(t, "head_w", &[h, HEAD_WIDTH])?,
            head_b: decode(t, "head_b", &[HEAD_WIDTH])?,
        };
        Ok(Checkpoint {
            params,
            meta: file.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = self.to_json();
        crate::io::write_atomic(path, |w| w.write_all(json.as_bytes()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
