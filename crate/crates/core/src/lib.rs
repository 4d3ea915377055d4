//! Micro-expression recognition workbench with ethnic context.
//!
//! * [`flowcore`]: onset→apex optical flow, optical strain, and the 3-channel
//!   flow image fed to the networks.
//! * [`corpus`]: dataset ingestion, attribute annotation and correction,
//!   label remapping, manifests, and a synthetic desk-scale corpus.
//! * [`model`]: dual-branch motion/texture network with a three-term
//!   cross-entropy objective, reverse-mode gradients, Adam, and Grad-CAM.
//! * [`protocol`]: leave-one-subject-out planning, macro-F1, the mono- vs.
//!   mixed-ethnicity sampling study, a random forest, and the variant benchmark.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the pipeline.

pub mod corpus;
pub mod error;
pub mod flowcore;
pub mod io_util;
pub mod model;
pub mod protocol;
pub mod scalar;
pub mod seed;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type GrayFrame = flowcore::GrayFrame<f64>;
pub type GrayFrame32 = flowcore::GrayFrame<f32>;
pub type RgbFrame = flowcore::RgbFrame<f64>;
pub type FlowField = flowcore::FlowField<f64>;
pub type FlowField32 = flowcore::FlowField<f32>;
pub type StrainMap = flowcore::StrainMap<f64>;
pub type OpticalFlowImage = flowcore::OpticalFlowImage<f64>;
pub type OpticalFlowImage32 = flowcore::OpticalFlowImage<f32>;
pub type Tensor = model::Tensor<f64>;
pub type ParamSet = model::ParamSet<f64>;
pub type ParamSet32 = model::ParamSet<f32>;
