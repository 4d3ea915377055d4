//! Named-tensor checkpoints.
//!
//! Layout (little-endian): the line `MECKPT1`, one line of JSON header, then
//! `u32` tensor count and per tensor `u32` name length, UTF-8 name, `u32`
//! rank, `u64` dims, and row-major `f64` values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::params::ParamSet;
use super::tensor::Tensor;
use super::ModelError;

pub const CHECKPOINT_MAGIC: &[u8] = b"MECKPT1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor<f64>>,
}

fn bad(message: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(message.into())
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(self.header.to_string().as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        let rest = bytes
            .strip_prefix(CHECKPOINT_MAGIC)
            .ok_or_else(|| bad("missing checkpoint magic"))?;
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header: serde_json::Value =
            serde_json::from_slice(&rest[..nl]).map_err(|e| bad(format!("header: {e}")))?;
        let mut r = Reader { buf: &rest[nl + 1..] };
        let count = r.u32()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(usize::try_from(r.u64()?).map_err(|_| bad("dimension overflow"))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| bad("dimension overflow"))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("dimension overflow"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            if tensors.insert(name.clone(), Tensor::new(shape, data)).is_some() {
                return Err(bad(format!("duplicate tensor {name}")));
            }
        }
        if !r.buf.is_empty() {
            return Err(bad("trailing bytes after tensors"));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        crate::io_util::write_atomic(path, &self.encode()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() < n {
            return Err(bad("truncated checkpoint"));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    kind: String,
    config: ModelConfig,
    #[serde(default)]
    extra: serde_json::Value,
}

const MODEL_KIND: &str = "model";

/// Checkpoint of a full network; `extra` is stored verbatim in the header.
pub fn model_checkpoint<T: Scalar>(config: &ModelConfig, params: &ParamSet<T>, extra: serde_json::Value) -> Checkpoint {
    let header = ModelHeader {
        kind: MODEL_KIND.into(),
        config: config.clone(),
        extra,
    };
    Checkpoint {
        header: serde_json::to_value(header).expect("header serializes"),
        tensors: params.iter().map(|(k, t)| (k.to_string(), t.convert())).collect(),
    }
}

/// Config, parameters and header extras of a network checkpoint.
pub fn load_model<T: Scalar>(path: &Path) -> Result<(ModelConfig, ParamSet<T>, serde_json::Value), ModelError> {
    let ckpt = Checkpoint::load(path)?;
    model_from_checkpoint(ckpt)
}

pub fn model_from_checkpoint<T: Scalar>(
    ckpt: Checkpoint,
) -> Result<(ModelConfig, ParamSet<T>, serde_json::Value), ModelError> {
    let header: ModelHeader =
        serde_json::from_value(ckpt.header).map_err(|e| bad(format!("model header: {e}")))?;
    if header.kind != MODEL_KIND {
        return Err(bad(format!("expected a {MODEL_KIND} checkpoint, found {:?}", header.kind)));
    }
    let tensors = ckpt.tensors.into_iter().map(|(k, t)| (k, t.convert())).collect();
    let params = ParamSet::from_tensors(&header.config, tensors)?;
    Ok((header.config, params, header.extra))
}
