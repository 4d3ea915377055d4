use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::checkpoint::Checkpoint;
use super::config::EncoderConfig;
use super::network::encode_conv;
use super::params::{conv_layout, Layout, ParamSet};
use super::tensor::Tensor;
use super::ModelError;

const PREFIX: &str = "encoder";
const FROZEN_KIND: &str = "frozen_encoder";

/// A convolutional encoder used only for feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEncoder<T> {
    config: EncoderConfig,
    params: ParamSet<T>,
    source: String,
}

#[derive(Serialize, Deserialize)]
struct FrozenHeader {
    kind: String,
    config: EncoderConfig,
}

fn layout(config: &EncoderConfig) -> Layout {
    let mut l = Layout::new();
    conv_layout(&mut l, PREFIX, config);
    l
}

impl<T: Scalar> FrozenEncoder<T> {
    /// Random-feature encoder: fan-in scaled Gaussian weights drawn from
    /// ChaCha8 streams keyed by `seed` and tensor name.
    pub fn random(config: EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ParamSet::from_layout(&layout(&config), seed);
        Ok(Self {
            config,
            params,
            source: format!("random:{seed}"),
        })
    }

    /// Encoder from an external checkpoint whose tensors are named
    /// `encoder.stage{i}.weight|bias` and `encoder.proj.weight|bias`.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let ckpt = Checkpoint::load(path)?;
        let header: FrozenHeader = serde_json::from_value(ckpt.header)
            .map_err(|e| ModelError::Checkpoint(format!("encoder header: {e}")))?;
        if header.kind != FROZEN_KIND {
            return Err(ModelError::Checkpoint(format!(
                "expected a {FROZEN_KIND} checkpoint, found {:?}",
                header.kind
            )));
        }
        header.config.validate()?;
        let params = ParamSet::from_map_unchecked(ckpt.tensors.into_iter().map(|(k, t)| (k, t.convert())).collect());
        params.check_layout(&layout(&header.config))?;
        let source = format!("file:{}", &params.content_hash()[..16]);
        Ok(Self {
            config: header.config,
            params,
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let header = FrozenHeader {
            kind: FROZEN_KIND.into(),
            config: self.config.clone(),
        };
        Checkpoint {
            header: serde_json::to_value(header).expect("header serializes"),
            tensors: self.params.iter().map(|(k, t)| (k.to_string(), t.convert())).collect(),
        }
        .save(path)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// `random:<seed>` or `file:<hash prefix>`.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    /// Embedding of a `[C, H, W]` input.
    pub fn extract(&self, input: &Tensor<T>) -> Result<Vec<T>, ModelError> {
        encode_conv(&self.params, PREFIX, &self.config, input)
    }
}
