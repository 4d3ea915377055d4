//! Dual-branch micro-expression network.
//!
//! A convolutional encoder embeds the flow image for emotion; a second
//! encoder (convolutional on flow or RGB, or a patch transformer on RGB)
//! embeds ethnic context. Three heads score emotion, ethnicity, and the
//! concatenated (emotion, ethnicity) embedding. Training minimizes the sum of
//! the three cross-entropies with gradients from a small reverse-mode tape.

mod checkpoint;
mod config;
mod frozen;
mod gradcam;
mod graph;
mod loss;
mod network;
mod optim;
mod params;
mod tensor;
mod train;

use std::path::PathBuf;

pub use checkpoint::{load_model, model_checkpoint, model_from_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{EncoderConfig, ModelConfig, PatchEncoderConfig, Variant, EMOTION_CLASSES, ETHNIC_CLASSES};
pub use frozen::FrozenEncoder;
pub use gradcam::{gradcam, ActivationMap, ActivationRecord, Branch};
pub use graph::{cce, Gradients, Graph, Var};
pub use loss::{backward, sample_gradient, softmax, total_loss, Labels, LossBreakdown, TrainingSample};
pub use network::{
    attention_maps, encode_motion, encode_texture_patches, forward, fuse_and_classify, patchify, rgb_tensor, Logits,
    ModelInput,
};
pub use optim::{adam_step, lr_schedule, AdamConfig, AdamState};
pub use params::{GradientSet, ParamSet, EMBED_INIT_STD, EMOTION_ENCODER, ETHNIC_ENCODER, TEXTURE_ENCODER};
pub use tensor::Tensor;
pub use train::{predict_all, train_fold, TrainConfig, TrainOutcome};

use crate::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("variant {0} requires an apex RGB frame")]
    MissingRgb(Variant),
    #[error("class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("missing {0} label")]
    MissingLabel(&'static str),
    #[error("non-finite values in {what}")]
    NonFinite { what: String },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("training split is empty")]
    EmptySplit,
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("unexpected parameter {0}")]
    UnknownParam(String),
    #[error("unsupported attribution branch: {0}")]
    UnsupportedBranch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ModelError::InvalidConfig(_) | ModelError::UnsupportedBranch(_) => ErrorKind::Config,
            ModelError::NonFinite { .. } | ModelError::NonFiniteGradient(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}
